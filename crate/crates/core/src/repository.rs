//! The labeled reference repository.
//!
//! Records arrive as JSONL, one object per line:
//!
//! ```text
//! {"id": str, "text": str, "label": 0|1, "style": str,
//!  "embedding": [float...], "token_logprobs": [float...], "score": float}
//! ```
//!
//! Label 1 is human-written, 0 is AI-generated. Extra fields are ignored.
//! Ingest fits one PCA model over every embedding and annotates each sample
//! with its full condition vector. A built repository is immutable.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compression::CompressionModel;
use crate::error::{Error, Result};
use crate::features::{tokenize, ConditionVector, TokenizerConfig};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Ai = 0,
    Human = 1,
}

impl Label {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Label::Ai),
            1 => Some(Label::Human),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn is_human(self) -> bool {
        self == Label::Human
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.bit())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let bit = u8::deserialize(d)?;
        Label::from_bit(bit)
            .ok_or_else(|| serde::de::Error::custom(format!("label must be 0 or 1, got {bit}")))
    }
}

/// One ingest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub style: String,
    pub embedding: Vec<f64>,
    pub token_logprobs: Vec<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrrSample {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub style: String,
    pub embedding: Vec<f64>,
    pub token_logprobs: Vec<f64>,
    pub score: f64,
    pub conditions: ConditionVector,
}

impl SrrSample {
    pub fn to_record(&self) -> RawRecord {
        RawRecord {
            id: self.id.clone(),
            text: self.text.clone(),
            label: self.label,
            style: self.style.clone(),
            embedding: self.embedding.clone(),
            token_logprobs: self.token_logprobs.clone(),
            score: self.score,
        }
    }
}

/// Parses JSONL, reporting the 1-based line number of the first bad record.
/// Blank lines are skipped.
pub fn parse_jsonl<R: Read>(reader: R) -> Result<Vec<(usize, RawRecord)>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((line_no, parse_record(&line, line_no)?));
    }
    Ok(out)
}

pub fn parse_record(line: &str, line_no: usize) -> Result<RawRecord> {
    let record: RawRecord = serde_json::from_str(line).map_err(|e| Error::Schema {
        line: line_no,
        message: e.to_string(),
    })?;
    if !record.score.is_finite() {
        return Err(Error::Schema {
            line: line_no,
            message: "field `score` is not finite".into(),
        });
    }
    if record.embedding.iter().any(|v| !v.is_finite()) {
        return Err(Error::Schema {
            line: line_no,
            message: "field `embedding` has non-finite entries".into(),
        });
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repository {
    pub embedding_dim: usize,
    pub tokenizer: TokenizerConfig,
    pub compression: CompressionModel,
    pub styles: BTreeSet<String>,
    /// Sorted by id.
    pub samples: Vec<SrrSample>,
}

#[derive(Serialize)]
struct SnapshotRef<'a> {
    schema_version: u64,
    #[serde(flatten)]
    repo: &'a Repository,
}

#[derive(Deserialize)]
struct SnapshotOwned {
    schema_version: u64,
    #[serde(flatten)]
    repo: Repository,
}

impl Repository {
    /// Builds a repository from records; the first element of each pair is the
    /// source line used in diagnostics.
    pub fn ingest(
        records: Vec<(usize, RawRecord)>,
        r: usize,
        tokenizer: TokenizerConfig,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("no records to ingest"));
        }
        let mut seen = HashSet::new();
        for (_, rec) in &records {
            if !seen.insert(rec.id.as_str()) {
                return Err(Error::DuplicateId(rec.id.clone()));
            }
        }
        let expected = records[0].1.embedding.len();
        if expected == 0 {
            return Err(Error::Schema {
                line: records[0].0,
                message: "field `embedding` is empty".into(),
            });
        }
        for (line, rec) in &records {
            if rec.embedding.len() != expected {
                return Err(Error::InconsistentEmbeddingDim {
                    line: *line,
                    expected,
                    actual: rec.embedding.len(),
                });
            }
        }

        let mut records = records;
        records.sort_by(|a, b| a.1.id.cmp(&b.1.id));

        let embeddings: Vec<Vec<f64>> = records.iter().map(|(_, r)| r.embedding.clone()).collect();
        let compression = CompressionModel::fit(&embeddings, r)?;

        let samples = records
            .into_iter()
            .map(|(line, rec)| annotate(line, rec, &compression, tokenizer))
            .collect::<Result<Vec<_>>>()?;
        let styles = samples.iter().map(|s| s.style.clone()).collect();

        Ok(Self {
            embedding_dim: expected,
            tokenizer,
            compression,
            styles,
            samples,
        })
    }

    pub fn from_jsonl_path(path: &Path, r: usize, tokenizer: TokenizerConfig) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::ingest(parse_jsonl(file)?, r, tokenizer)
    }

    /// Re-ingests a subset (or all) of the samples, refitting compression.
    pub fn rebuild<'a, I>(samples: I, r: usize, tokenizer: TokenizerConfig) -> Result<Self>
    where
        I: IntoIterator<Item = &'a SrrSample>,
    {
        let records = samples
            .into_iter()
            .enumerate()
            .map(|(i, s)| (i + 1, s.to_record()))
            .collect();
        Self::ingest(records, r, tokenizer)
    }

    pub fn recompress(&self, r: usize) -> Result<Self> {
        if r == self.compression.output_dim {
            return Ok(self.clone());
        }
        Self::rebuild(&self.samples, r, self.tokenizer)
    }

    pub fn compression_dim(&self) -> usize {
        self.compression.output_dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, id: &str) -> Option<&SrrSample> {
        self.samples
            .binary_search_by(|s| s.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.samples[i])
    }

    pub fn samples_of_style<'a>(&'a self, style: &'a str) -> impl Iterator<Item = &'a SrrSample> + 'a {
        self.samples.iter().filter(move |s| s.style == style)
    }

    /// Computes conditions for an unseen text with this repository's
    /// tokenizer and compression model.
    pub fn conditions_for(
        &self,
        text: &str,
        embedding: &[f64],
        token_logprobs: &[f64],
    ) -> Result<ConditionVector> {
        let seq = tokenize(text, self.tokenizer)?;
        let semantic = self.compression.compress(embedding)?;
        ConditionVector::from_parts(&seq.tokens, token_logprobs, semantic)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SnapshotRef {
            schema_version: SCHEMA_VERSION,
            repo: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        check_version(&value)?;
        let snap: SnapshotOwned = serde_json::from_value(value)?;
        debug_assert_eq!(snap.schema_version, SCHEMA_VERSION);
        Ok(snap.repo)
    }

    pub fn snapshot(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn check_version(value: &serde_json::Value) -> Result<()> {
    match value.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(SCHEMA_VERSION) => Ok(()),
        Some(found) => Err(Error::Version {
            found,
            expected: SCHEMA_VERSION,
        }),
        None => Err(Error::Parse("missing `schema_version`".into())),
    }
}

/// Writes through a sibling temp file so readers never see a partial snapshot.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn annotate(
    line: usize,
    rec: RawRecord,
    compression: &CompressionModel,
    tokenizer: TokenizerConfig,
) -> Result<SrrSample> {
    let seq = tokenize(&rec.text, tokenizer).map_err(|e| Error::Schema {
        line,
        message: format!("field `text`: {e}"),
    })?;
    let semantic = compression.compress(&rec.embedding)?;
    let conditions =
        ConditionVector::from_parts(&seq.tokens, &rec.token_logprobs, semantic).map_err(|e| {
            Error::Schema {
                line,
                message: format!("field `token_logprobs`: {e}"),
            }
        })?;
    if let Some(field) = conditions.first_non_finite() {
        return Err(Error::NonFiniteFeature {
            line,
            id: rec.id,
            field,
        });
    }
    Ok(SrrSample {
        id: rec.id,
        text: rec.text,
        label: rec.label,
        style: rec.style,
        embedding: rec.embedding,
        token_logprobs: rec.token_logprobs,
        score: rec.score,
        conditions,
    })
}
