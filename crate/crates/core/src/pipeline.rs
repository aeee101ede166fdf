//! Fit and detect: compression, routing, then a cached conditional
//! threshold estimator per activated reference set.

use std::fs;
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::{Arc, Mutex};

use lru::LruCache;
use serde::{Deserialize, Serialize};

use crate::cte::{BoostedParams, CteKind, CteModel, FeatureLayout, FeatureMatrix, LogisticParams};
use crate::error::{Error, Result};
use crate::features::{ConditionVector, FeatureMask};
use crate::repository::{check_version, write_atomic, Label, Repository, SCHEMA_VERSION};
use crate::router::{
    fit_repository, route, route_by_classification, Activation, PrototypeConfig, PrototypeId, StyleIndex,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouterMode {
    MNearest,
    /// Activate every prototype of the nearest prototype's style.
    Classification,
    /// One pooled reference set for every query.
    Disabled,
}

impl std::str::FromStr for RouterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m_nearest" | "m-nearest" => Ok(RouterMode::MNearest),
            "classification" => Ok(RouterMode::Classification),
            "disabled" => Ok(RouterMode::Disabled),
            other => Err(Error::invalid(format!("unknown router mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for RouterMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RouterMode::MNearest => "m_nearest",
            RouterMode::Classification => "classification",
            RouterMode::Disabled => "disabled",
        })
    }
}

pub const DEFAULT_CACHE_SIZE: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub prototypes: PrototypeConfig,
    pub m: usize,
    pub cte: CteKind,
    pub router: RouterMode,
    pub mask: FeatureMask,
    pub r: usize,
    pub seed: u64,
    pub logistic: LogisticParams,
    pub boosted: BoostedParams,
    pub cache_size: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            prototypes: PrototypeConfig::default(),
            m: 3,
            cte: CteKind::Logistic,
            router: RouterMode::MNearest,
            mask: FeatureMask::all(),
            r: crate::compression::DEFAULT_DIM,
            seed: 0,
            logistic: LogisticParams::default(),
            boosted: BoostedParams::default(),
            cache_size: DEFAULT_CACHE_SIZE,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.prototypes.validate()?;
        self.boosted.validate()?;
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if self.r == 0 {
            return Err(Error::invalid("r must be at least 1"));
        }
        if self.cache_size == 0 {
            return Err(Error::invalid("cache_size must be at least 1"));
        }
        if !(self.logistic.l2 >= 0.0) {
            return Err(Error::invalid("l2 must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    /// Probability that the text is human-written.
    pub probability: f64,
    pub confidence: f64,
    pub threshold_estimate: f64,
    pub threshold_variance: Option<f64>,
    pub activation: Activation,
}

impl Verdict {
    fn new(probability: f64, threshold_estimate: f64, threshold_variance: Option<f64>, activation: Activation) -> Self {
        // exactly one half counts as AI
        let label = if probability > 0.5 { Label::Human } else { Label::Ai };
        Self {
            label,
            probability,
            confidence: probability.max(1.0 - probability),
            threshold_estimate,
            threshold_variance,
            activation,
        }
    }
}

type CacheKey = (Vec<PrototypeId>, FeatureMask, CteKind);
type Slot = Arc<Mutex<Option<Arc<CteModel>>>>;

/// Estimators keyed by activated reference set. Fills for one key are
/// serialized; other keys proceed concurrently.
struct CteCache {
    slots: Mutex<LruCache<CacheKey, Slot>>,
}

impl CteCache {
    fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("capacity is positive");
        Self {
            slots: Mutex::new(LruCache::new(cap)),
        }
    }

    fn get_or_fit(&self, key: CacheKey, fit: impl FnOnce() -> Result<CteModel>) -> Result<Arc<CteModel>> {
        let slot = {
            let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
            slots.get_or_insert(key, Slot::default).clone()
        };
        let mut guard = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(model) = guard.as_ref() {
            return Ok(model.clone());
        }
        let model = Arc::new(fit()?);
        *guard = Some(model.clone());
        Ok(model)
    }

    fn len(&self) -> usize {
        self.slots.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

pub struct PipelineModel {
    pub config: PipelineConfig,
    pub repository: Repository,
    pub indexes: Vec<StyleIndex>,
    cache: CteCache,
}

impl std::fmt::Debug for PipelineModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PipelineModel")
            .field("config", &self.config)
            .field("samples", &self.repository.len())
            .field("indexes", &self.indexes.len())
            .finish()
    }
}

#[derive(Serialize)]
struct SnapshotRef<'a> {
    schema_version: u64,
    config: &'a PipelineConfig,
    repository: &'a Repository,
    indexes: &'a [StyleIndex],
}

#[derive(Deserialize)]
struct SnapshotOwned {
    #[allow(dead_code)]
    schema_version: u64,
    config: PipelineConfig,
    repository: Repository,
    indexes: Vec<StyleIndex>,
}

/// Label used for the single index when routing is disabled.
pub const POOLED_STYLE: &str = "*";

pub fn fit_pipeline(repo: &Repository, config: &PipelineConfig) -> Result<PipelineModel> {
    config.validate()?;
    let repository = if repo.compression_dim() == config.r {
        repo.clone()
    } else {
        repo.recompress(config.r)?
    };
    let indexes = match config.router {
        RouterMode::Disabled => {
            let (ids, points): (Vec<String>, Vec<Vec<f64>>) = repository
                .samples
                .iter()
                .map(|s| (s.id.clone(), s.conditions.semantic.clone()))
                .unzip();
            vec![StyleIndex::pooled(POOLED_STYLE, ids, &points)?]
        }
        RouterMode::MNearest | RouterMode::Classification => {
            fit_repository(&repository, &config.prototypes, config.seed)?
        }
    };
    if config.router == RouterMode::MNearest {
        let total: usize = indexes.iter().map(StyleIndex::k).sum();
        if config.m > total {
            return Err(Error::invalid(format!(
                "m = {} exceeds the {total} prototypes available",
                config.m
            )));
        }
    }
    Ok(PipelineModel::assemble(config.clone(), repository, indexes))
}

impl PipelineModel {
    fn assemble(config: PipelineConfig, repository: Repository, indexes: Vec<StyleIndex>) -> Self {
        let cache = CteCache::new(config.cache_size);
        Self {
            config,
            repository,
            indexes,
            cache,
        }
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::new(self.config.mask, self.repository.compression_dim())
    }

    pub fn route(&self, semantic: &[f64]) -> Result<Activation> {
        match self.config.router {
            RouterMode::MNearest => route(&self.indexes, semantic, self.config.m),
            RouterMode::Classification => route_by_classification(&self.indexes, semantic),
            RouterMode::Disabled => route(&self.indexes, semantic, 1),
        }
    }

    /// The estimator for an activation, fitted on first use.
    pub fn estimator(&self, activation: &Activation) -> Result<Arc<CteModel>> {
        let key = (activation.key(), self.config.mask, self.config.cte);
        self.cache.get_or_fit(key, || {
            let samples = activation.sample_ids.iter().map(|id| {
                self.repository
                    .sample(id)
                    .expect("router members come from the repository")
            });
            let data = FeatureMatrix::from_samples(samples, &self.layout())?;
            CteModel::fit(&data, self.config.cte, &self.config.logistic, &self.config.boosted)
        })
    }

    pub fn cached_estimators(&self) -> usize {
        self.cache.len()
    }

    pub fn conditions(&self, text: &str, embedding: &[f64], token_logprobs: &[f64]) -> Result<ConditionVector> {
        if embedding.len() != self.repository.embedding_dim {
            return Err(Error::DimensionMismatch {
                expected: self.repository.embedding_dim,
                actual: embedding.len(),
            });
        }
        self.repository.conditions_for(text, embedding, token_logprobs)
    }

    pub fn detect(&self, text: &str, embedding: &[f64], token_logprobs: &[f64], score: f64) -> Result<Verdict> {
        let conditions = self.conditions(text, embedding, token_logprobs)?;
        self.detect_conditions(&conditions, score)
    }

    /// Detection for a precomputed condition vector whose semantic block is
    /// already compressed with this model's repository.
    pub fn detect_conditions(&self, conditions: &ConditionVector, score: f64) -> Result<Verdict> {
        if !score.is_finite() {
            return Err(Error::invalid("score must be finite"));
        }
        if let Some(field) = conditions.first_non_finite() {
            return Err(Error::invalid(format!("condition `{field}` is not finite")));
        }
        let activation = self.route(&conditions.semantic)?;
        let model = self.estimator(&activation)?;
        let row = self.layout().row(conditions)?;
        let (p, threshold) = model.predict(&row, score)?;
        let variance = model.threshold_variance(&row)?;
        Ok(Verdict::new(p, threshold, variance, activation))
    }

    /// Per-column attribution `∂P/∂c` in raw units; `None` for boosted models.
    pub fn attribute(&self, conditions: &ConditionVector, score: f64) -> Result<Option<Vec<(String, f64)>>> {
        let activation = self.route(&conditions.semantic)?;
        let model = self.estimator(&activation)?;
        let CteModel::Logistic(logistic) = model.as_ref() else {
            return Ok(None);
        };
        let row = self.layout().row(conditions)?;
        let grads = logistic.attribute(&row, score)?;
        Ok(Some(
            logistic
                .columns
                .iter()
                .map(|c| c.name.clone())
                .zip(grads)
                .collect(),
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SnapshotRef {
            schema_version: SCHEMA_VERSION,
            config: &self.config,
            repository: &self.repository,
            indexes: &self.indexes,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        check_version(&value)?;
        let snap: SnapshotOwned = serde_json::from_value(value)?;
        snap.config.validate()?;
        Ok(Self::assemble(snap.config, snap.repository, snap.indexes))
    }

    pub fn snapshot(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::TokenizerConfig;
    use crate::repository::RawRecord;

    /// Conditions other than the semantic block carry no label signal.
    fn record(id: &str, style: &str, label: u8, embedding: Vec<f64>, score: f64, words: usize) -> RawRecord {
        let text: Vec<String> = (0..words).map(|i| format!("w{}", i % 7)).collect();
        RawRecord {
            id: id.into(),
            text: text.join(" "),
            label: Label::from_bit(label).unwrap(),
            style: style.into(),
            embedding,
            token_logprobs: (0..words).map(|i| -1.0 - 0.1 * (i % 3) as f64).collect(),
            score,
        }
    }

    /// Style A sits near (+1, 0), style B near (-1, 0); each has its own
    /// score scale.
    fn two_style_repo() -> Repository {
        let mut recs = Vec::new();
        for i in 0..12 {
            let jitter = (i as f64 * 0.37).sin() * 0.05;
            let label = (i % 2) as u8;
            let a_score = if label == 1 { -1.0 + jitter } else { 0.5 + jitter };
            let b_score = if label == 1 { 2.0 + jitter } else { 3.5 + jitter };
            recs.push(record(&format!("a{i:02}"), "a", label, vec![1.0 + jitter, jitter, 0.1], a_score, 5 + i / 2));
            recs.push(record(&format!("b{i:02}"), "b", label, vec![-1.0 + jitter, -jitter, 0.0], b_score, 5 + i / 2));
        }
        let recs = recs.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect();
        Repository::ingest(recs, 2, TokenizerConfig::default()).unwrap()
    }

    fn config(k: usize, m: usize) -> PipelineConfig {
        PipelineConfig {
            prototypes: PrototypeConfig {
                k,
                ..PrototypeConfig::default()
            },
            m,
            r: 2,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn routing_restricts_training_to_the_nearest_style() {
        let repo = two_style_repo();
        let model = fit_pipeline(&repo, &config(1, 1)).unwrap();
        let v = model.detect("w1 w2 w3", &[1.0, 0.0, 0.1], &[-1.0; 3], 0.0).unwrap();
        assert_eq!(v.activation.prototypes.len(), 1);
        assert_eq!(v.activation.prototypes[0].style, "a");
        assert!(v.activation.sample_ids.iter().all(|id| id.starts_with('a')));
        assert_eq!(v.activation.sample_ids.len(), 12);
    }

    #[test]
    fn per_style_thresholds_differ() {
        let repo = two_style_repo();
        let model = fit_pipeline(&repo, &config(1, 1)).unwrap();
        // a score of 1.5 is AI-like for style a but human-like for style b
        let a = model.detect("w1 w2 w3 w4 w5", &[1.0, 0.0, 0.1], &[-1.0; 5], 1.5).unwrap();
        let b = model.detect("w1 w2 w3 w4 w5", &[-1.0, 0.0, 0.0], &[-1.0; 5], 1.5).unwrap();
        assert_eq!(a.label, Label::Ai);
        assert_eq!(b.label, Label::Human);
        assert!(b.threshold_estimate > a.threshold_estimate);
        assert!(a.threshold_variance.unwrap() >= 0.0);
    }

    #[test]
    fn disabled_routing_matches_full_activation() {
        let repo = two_style_repo();
        let disabled = fit_pipeline(
            &repo,
            &PipelineConfig {
                router: RouterMode::Disabled,
                ..config(1, 1)
            },
        )
        .unwrap();
        let full = fit_pipeline(&repo, &config(1, 2)).unwrap();
        for (emb, score) in [([1.0, 0.0, 0.1], 0.2), ([-1.0, 0.0, 0.0], 2.9), ([0.1, 0.3, 0.0], 1.0)] {
            let a = disabled.detect("w1 w2 w3", &emb, &[-1.2; 3], score).unwrap();
            let b = full.detect("w1 w2 w3", &emb, &[-1.2; 3], score).unwrap();
            assert_eq!(a.activation.sample_ids, b.activation.sample_ids);
            assert_eq!(a.probability, b.probability);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn estimators_are_cached_per_activation() {
        let repo = two_style_repo();
        let model = fit_pipeline(&repo, &config(1, 1)).unwrap();
        for _ in 0..3 {
            model.detect("w1", &[1.0, 0.0, 0.1], &[-1.0], 0.0).unwrap();
        }
        assert_eq!(model.cached_estimators(), 1);
        model.detect("w1", &[-1.0, 0.0, 0.0], &[-1.0], 0.0).unwrap();
        assert_eq!(model.cached_estimators(), 2);
    }

    #[test]
    fn cache_evicts_least_recent() {
        let repo = two_style_repo();
        let model = fit_pipeline(
            &repo,
            &PipelineConfig {
                cache_size: 1,
                ..config(1, 1)
            },
        )
        .unwrap();
        model.detect("w1", &[1.0, 0.0, 0.1], &[-1.0], 0.0).unwrap();
        model.detect("w1", &[-1.0, 0.0, 0.0], &[-1.0], 0.0).unwrap();
        assert_eq!(model.cached_estimators(), 1);
    }

    #[test]
    fn raising_the_score_never_turns_ai_into_human() {
        let repo = two_style_repo();
        let model = fit_pipeline(&repo, &config(2, 2)).unwrap();
        let mut was_ai = false;
        for k in 0..60 {
            let v = model.detect("w1 w2", &[0.9, 0.1, 0.1], &[-1.0; 2], -3.0 + 0.1 * k as f64).unwrap();
            if was_ai {
                assert_eq!(v.label, Label::Ai);
            }
            was_ai |= v.label == Label::Ai;
            assert!(v.confidence >= 0.5 && v.confidence < 1.0);
        }
        assert!(was_ai);
    }

    #[test]
    fn exact_half_is_ai() {
        let v = Verdict::new(0.5, 0.0, None, Activation {
            prototypes: vec![],
            sample_ids: vec![],
            distance_evaluations: 0,
        });
        assert_eq!(v.label, Label::Ai);
        assert_eq!(v.confidence, 0.5);
    }

    #[test]
    fn snapshot_round_trip_is_byte_identical() {
        let repo = two_style_repo();
        let a = fit_pipeline(&repo, &config(2, 2)).unwrap();
        let b = fit_pipeline(&repo, &config(2, 2)).unwrap();
        let json = a.to_json().unwrap();
        assert_eq!(json, b.to_json().unwrap());
        let back = PipelineModel::from_json(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
        let q = ("w1 w2", [0.2, 0.0, 0.1], [-1.0; 2], 1.0);
        assert_eq!(a.detect(q.0, &q.1, &q.2, q.3).unwrap(), back.detect(q.0, &q.1, &q.2, q.3).unwrap());
    }

    #[test]
    fn recompresses_when_dimension_differs() {
        let repo = two_style_repo();
        let model = fit_pipeline(
            &repo,
            &PipelineConfig {
                r: 1,
                ..config(1, 1)
            },
        )
        .unwrap();
        assert_eq!(model.repository.compression_dim(), 1);
        assert_eq!(model.indexes[0].prototypes[0].len(), 1);
    }

    #[test]
    fn invalid_configs_are_usage_errors() {
        let repo = two_style_repo();
        for cfg in [config(0, 1), config(1, 0), config(1, 3)] {
            let err = fit_pipeline(&repo, &cfg).unwrap_err();
            assert!(err.is_usage(), "{err}");
        }
    }

    #[test]
    fn wrong_embedding_length_rejected() {
        let model = fit_pipeline(&two_style_repo(), &config(1, 1)).unwrap();
        assert!(matches!(
            model.detect("w1", &[1.0, 0.0], &[-1.0], 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
