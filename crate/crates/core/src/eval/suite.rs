//! Evaluation runs over configuration grids and split policies.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, mcnemar, McNemar, Metrics};
use crate::baselines::{nearest_vote, StaticThreshold};
use crate::error::{Error, Result};
use crate::features::TokenizerConfig;
use crate::pipeline::{fit_pipeline, PipelineConfig};
use crate::repository::{Label, RawRecord, Repository};

pub const NEAREST_K: usize = 100;
pub const MIN_TIMED_QUERIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Use the references and test set as supplied.
    Given,
    /// Pool everything and draw a fresh test fraction.
    Random { test_fraction: f64, seed: u64 },
    /// Train without one style and test only on it.
    LeaveStyleOut { style: String },
    /// Keep `per_style` references per style, half of each label.
    LowResource { per_style: usize, seed: u64 },
}

impl std::fmt::Display for SplitPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitPolicy::Given => write!(f, "given"),
            SplitPolicy::Random { test_fraction, seed } => write!(f, "random({test_fraction},{seed})"),
            SplitPolicy::LeaveStyleOut { style } => write!(f, "leave_style_out({style})"),
            SplitPolicy::LowResource { per_style, seed } => write!(f, "low_resource({per_style},{seed})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub references: Vec<RawRecord>,
    pub test: Vec<RawRecord>,
}

impl SplitPolicy {
    pub fn apply(&self, data: &Dataset) -> Result<(Vec<RawRecord>, Vec<RawRecord>)> {
        let (refs, test) = match self {
            SplitPolicy::Given => (data.references.clone(), data.test.clone()),
            SplitPolicy::Random { test_fraction, seed } => {
                if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                    return Err(Error::invalid("test_fraction must lie in (0, 1)"));
                }
                let mut pool: Vec<RawRecord> = data.references.iter().chain(&data.test).cloned().collect();
                pool.sort_by(|a, b| a.id.cmp(&b.id));
                pool.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
                let n_test = ((pool.len() as f64) * test_fraction).round() as usize;
                let refs = pool.split_off(n_test);
                (refs, pool)
            }
            SplitPolicy::LeaveStyleOut { style } => {
                if !data.references.iter().chain(&data.test).any(|r| &r.style == style) {
                    return Err(Error::UnknownStyle(style.clone()));
                }
                let refs = data.references.iter().filter(|r| &r.style != style).cloned().collect();
                let test = data.test.iter().filter(|r| &r.style == style).cloned().collect();
                (refs, test)
            }
            SplitPolicy::LowResource { per_style, seed } => {
                if *per_style < 2 || per_style % 2 != 0 {
                    return Err(Error::invalid("per_style must be an even number of at least 2"));
                }
                let mut cells: BTreeMap<(&str, u8), Vec<&RawRecord>> = BTreeMap::new();
                for r in &data.references {
                    cells.entry((r.style.as_str(), r.label.bit())).or_default().push(r);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut refs = Vec::new();
                for ((style, _), mut cell) in cells {
                    let want = per_style / 2;
                    if cell.len() < want {
                        return Err(Error::TooFewSamples {
                            style: style.to_owned(),
                            available: cell.len(),
                            required: want,
                        });
                    }
                    cell.sort_by(|a, b| a.id.cmp(&b.id));
                    cell.shuffle(&mut rng);
                    refs.extend(cell.into_iter().take(want).cloned());
                }
                (refs, data.test.clone())
            }
        };
        if refs.is_empty() || test.is_empty() {
            return Err(Error::invalid(format!("split {self} leaves an empty side")));
        }
        Ok((refs, test))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub name: String,
    pub config: PipelineConfig,
    pub split: SplitPolicy,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub timing: bool,
    pub mcnemar_corrected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    #[serde(flatten)]
    pub metrics: Metrics,
    pub per_style_accuracy: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub fit_seconds: f64,
    /// Median over repeated single-query detections on a warm cache.
    pub query_ms: f64,
    pub queries_timed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub split: SplitPolicy,
    pub config: PipelineConfig,
    pub n_references: usize,
    pub n_test: usize,
    pub methods: BTreeMap<String, MethodResult>,
    /// The pipeline against the static threshold.
    pub mcnemar: McNemar,
    pub timing: Option<Timing>,
}

pub const METHOD_MOSES: &str = "moses";
pub const METHOD_STATIC: &str = "static";
pub const METHOD_NEAREST: &str = "nearest_vote";

impl EvalReport {
    pub fn accuracy(&self, method: &str) -> f64 {
        self.methods[method].metrics.accuracy
    }
}

fn method_result(preds: &[Label], labels: &[Label], styles: &[&str]) -> Result<MethodResult> {
    let metrics = evaluate(preds, labels)?;
    let mut per_style: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for ((p, y), s) in preds.iter().zip(labels).zip(styles) {
        let e = per_style.entry((*s).to_owned()).or_default();
        e.0 += usize::from(p == y);
        e.1 += 1;
    }
    Ok(MethodResult {
        metrics,
        per_style_accuracy: per_style
            .into_iter()
            .map(|(s, (hit, n))| (s, hit as f64 / n as f64))
            .collect(),
    })
}

pub fn run_point(data: &Dataset, point: &GridPoint, options: &SuiteOptions) -> Result<EvalReport> {
    let (refs, test) = point.split.apply(data)?;
    let n_references = refs.len();
    let records = refs.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect();
    let repo = Repository::ingest(records, point.config.r, TokenizerConfig::default())?;

    let started = Instant::now();
    let model = fit_pipeline(&repo, &point.config)?;
    let fit_seconds = started.elapsed().as_secs_f64();

    let conditions = test
        .iter()
        .map(|r| model.conditions(&r.text, &r.embedding, &r.token_logprobs))
        .collect::<Result<Vec<_>>>()?;
    let moses = conditions
        .iter()
        .zip(&test)
        .map(|(c, r)| model.detect_conditions(c, r.score).map(|v| v.label))
        .collect::<Result<Vec<_>>>()?;

    let ref_scores: Vec<f64> = model.repository.samples.iter().map(|s| s.score).collect();
    let ref_labels: Vec<Label> = model.repository.samples.iter().map(|s| s.label).collect();
    let fixed = StaticThreshold::fit(&ref_scores, &ref_labels)?;
    let fixed_preds: Vec<Label> = test.iter().map(|r| fixed.predict(r.score)).collect();
    let pairs: Vec<(f64, Label)> = ref_scores.iter().copied().zip(ref_labels.iter().copied()).collect();
    let k = NEAREST_K.min(pairs.len());
    let nearest = test
        .iter()
        .map(|r| nearest_vote(&pairs, r.score, k))
        .collect::<Result<Vec<_>>>()?;

    let labels: Vec<Label> = test.iter().map(|r| r.label).collect();
    let styles: Vec<&str> = test.iter().map(|r| r.style.as_str()).collect();
    let mut methods = BTreeMap::new();
    methods.insert(METHOD_MOSES.to_owned(), method_result(&moses, &labels, &styles)?);
    methods.insert(METHOD_STATIC.to_owned(), method_result(&fixed_preds, &labels, &styles)?);
    methods.insert(METHOD_NEAREST.to_owned(), method_result(&nearest, &labels, &styles)?);
    let test_result = mcnemar(&moses, &fixed_preds, &labels, options.mcnemar_corrected)?;

    let timing = if options.timing {
        let reps = MIN_TIMED_QUERIES.max(test.len());
        let mut samples = Vec::with_capacity(reps);
        for i in 0..reps {
            let r = &test[i % test.len()];
            let t0 = Instant::now();
            model.detect(&r.text, &r.embedding, &r.token_logprobs, r.score)?;
            samples.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        samples.sort_by(f64::total_cmp);
        let mid = samples.len() / 2;
        let median = if samples.len() % 2 == 0 {
            (samples[mid - 1] + samples[mid]) / 2.0
        } else {
            samples[mid]
        };
        Some(Timing {
            fit_seconds,
            query_ms: median,
            queries_timed: reps,
        })
    } else {
        None
    };

    Ok(EvalReport {
        name: point.name.clone(),
        split: point.split.clone(),
        config: point.config.clone(),
        n_references,
        n_test: test.len(),
        methods,
        mcnemar: test_result,
        timing,
    })
}

/// Runs every grid point in order; reports come back in grid order.
pub fn run_suite(data: &Dataset, grid: &[GridPoint], options: &SuiteOptions) -> Result<Vec<EvalReport>> {
    grid.iter().map(|p| run_point(data, p, options)).collect()
}

pub fn reports_csv(reports: &[EvalReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record([
        "name", "split", "method", "accuracy", "f1", "tp", "fp", "fn", "tn", "styles",
    ])
    .map_err(err)?;
    for r in reports {
        for (method, m) in &r.methods {
            let c = m.metrics.confusion;
            let styles = m
                .per_style_accuracy
                .iter()
                .map(|(s, a)| format!("{s}={a:.4}"))
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                r.name.clone(),
                r.split.to_string(),
                method.clone(),
                format!("{:.6}", m.metrics.accuracy),
                format!("{:.6}", m.metrics.f1),
                c.tp.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                c.tn.to_string(),
                styles,
            ])
            .map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn reports_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:<26} {:<13} {:>8} {:>8}",
        "name", "split", "method", "acc", "f1"
    );
    for r in reports {
        for (method, m) in &r.methods {
            let _ = writeln!(
                out,
                "{:<24} {:<26} {:<13} {:>8.4} {:>8.4}",
                r.name,
                r.split.to_string(),
                method,
                m.metrics.accuracy,
                m.metrics.f1
            );
        }
        let _ = writeln!(
            out,
            "{:<24} mcnemar chi2={:.3} p={:.3e} (b={}, c={})",
            "", r.mcnemar.chi2, r.mcnemar.p_value, r.mcnemar.b, r.mcnemar.c
        );
        if let Some(t) = r.timing {
            let _ = writeln!(
                out,
                "{:<24} fit {:.3} s, {:.4} ms/query (median of {})",
                "", t.fit_seconds, t.query_ms, t.queries_timed
            );
        }
    }
    out
}
