//! Synthetic two-style benchmark.
//!
//! Each style has its own score distribution, so one global threshold is
//! necessarily a compromise. Within a style, standard-normal latents drive
//! text length, log-probabilities, lexical diversity, and repetition, and
//! the same latents shift the score of human and AI texts alike: the
//! observable conditions move the best threshold. Label-dependent offsets on
//! the conditions are kept small. Embeddings depend on style and topic only.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Zipf};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::compression::DEFAULT_DIM;
use crate::cte::CteKind;
use crate::error::{Error, Result};
use crate::features::TokenizerConfig;
use crate::pipeline::PipelineConfig;
use crate::repository::{Label, RawRecord, Repository};

pub const EMBEDDING_DIM: usize = 64;
pub const VOCAB: usize = 5000;
/// Within-style embedding directions that also move the score.
const TOPIC_DIMS: usize = 3;
const TOPIC_SCALE: f64 = 0.3;
/// AI scores sit this far above the human mean of the same style.
pub const AI_SHIFT: f64 = 1.7;
pub const MIN_PER_CELL: usize = 25;

/// `value = mean(label) + sd · u` for a latent `u ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    pub human: f64,
    pub ai: f64,
    pub sd: f64,
    /// Weight of `u` in the score shift, before normalization.
    pub loading: f64,
}

impl Latent {
    const fn new(human: f64, ai: f64, sd: f64, loading: f64) -> Self {
        Self { human, ai, sd, loading }
    }

    fn mean(&self, label: Label) -> f64 {
        if label.is_human() {
            self.human
        } else {
            self.ai
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSpec {
    pub name: String,
    pub human_score: f64,
    /// Per-class marginal standard deviation of the score.
    pub score_sd: f64,
    /// Standard deviation of the condition-driven part of the score.
    pub shift_sd: f64,
    /// Standard deviation of the embedding-driven part of the score.
    pub topic_sd: f64,
    pub length: Latent,
    pub logprob_center: Latent,
    pub logprob_spread: Latent,
    /// Zipf exponent of the token distribution; larger is less diverse.
    pub zipf: Latent,
    /// Per-position probability of copying an earlier trigram.
    pub repeat: Latent,
}

impl StyleSpec {
    fn latents(&self) -> [Latent; 5] {
        [self.length, self.logprob_center, self.logprob_spread, self.zipf, self.repeat]
    }

    fn loadings(&self) -> [f64; 5] {
        let raw = self.latents().map(|l| l.loading);
        let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
        raw.map(|w| self.shift_sd * w / norm)
    }

    fn residual_sd(&self) -> f64 {
        (self.score_sd.powi(2) - self.shift_sd.powi(2) - self.topic_sd.powi(2)).sqrt()
    }

    /// Accuracy of the optimal rule on the latent variables and the score,
    /// which upper-bounds any rule on the observed conditions. Both classes
    /// share one covariance, so this is `Φ(Δ/2)` with `Δ` the Mahalanobis
    /// distance between the class means.
    pub fn bayes_accuracy(&self) -> f64 {
        let latents = self.latents();
        let loadings = self.loadings();
        let p = latents.len() + TOPIC_DIMS;
        let q = p + 1;
        // v = (latent values, topic coordinates, score); latent j =
        // mean_j + sd_j u_j, topic g_k ~ N(0, 1), score = mean +
        // Σ loading_j u_j + topic_sd Σ g_k / √dims + residual.
        let topic_loading = self.topic_sd / (TOPIC_DIMS as f64).sqrt();
        let mut cov = DMatrix::<f64>::zeros(q, q);
        for j in 0..p {
            let (var, cross) = match latents.get(j) {
                Some(l) => (l.sd * l.sd, l.sd * loadings[j]),
                None => (1.0, topic_loading),
            };
            cov[(j, j)] = var;
            cov[(j, q - 1)] = cross;
            cov[(q - 1, j)] = cross;
        }
        cov[(q - 1, q - 1)] = self.score_sd * self.score_sd;
        let mut delta: Vec<f64> = latents.iter().map(|l| l.human - l.ai).collect();
        delta.extend([0.0; TOPIC_DIMS]);
        delta.push(-AI_SHIFT);
        let delta = DVector::from_vec(delta);
        let inv = cov.try_inverse().expect("latent covariance is positive definite");
        let d2 = (delta.transpose() * inv * &delta)[(0, 0)];
        StatNormal::new(0.0, 1.0).expect("standard normal").cdf(d2.sqrt() / 2.0)
    }
}

pub fn default_styles() -> Vec<StyleSpec> {
    let style = |name: &str, human_score: f64, score_sd: f64, shift_sd: f64, topic_sd: f64, len_shift: f64, lp_shift: f64| StyleSpec {
        name: name.to_owned(),
        human_score,
        score_sd,
        shift_sd,
        topic_sd,
        length: Latent::new(110.0 + len_shift, 115.0 + len_shift, 25.0, 0.45),
        logprob_center: Latent::new(-2.35 + lp_shift, -2.45 + lp_shift, 0.5, 0.55),
        logprob_spread: Latent::new(1.05, 1.0, 0.25, 0.4),
        zipf: Latent::new(1.08, 1.12, 0.2, 0.4),
        repeat: Latent::new(0.08, 0.09, 0.05, 0.4),
    };
    vec![
        style("a", -0.2, 0.7, 0.45, 0.3, 0.0, 0.0),
        style("b", 1.0, 0.6, 0.38, 0.25, 40.0, -0.3),
    ]
}

#[derive(Debug, Clone)]
pub struct SynthBenchmark {
    pub styles: Vec<StyleSpec>,
    pub references: Vec<RawRecord>,
    pub test: Vec<RawRecord>,
}

impl SynthBenchmark {
    pub fn repository(&self) -> Result<Repository> {
        let records = self.references.iter().cloned().enumerate().map(|(i, r)| (i + 1, r)).collect();
        Repository::ingest(records, DEFAULT_DIM, TokenizerConfig::default())
    }

    /// Per-style bound averaged with equal weight, matching the balanced cells.
    pub fn bayes_accuracy(&self) -> f64 {
        self.styles.iter().map(StyleSpec::bayes_accuracy).sum::<f64>() / self.styles.len() as f64
    }

    pub fn bayes_by_style(&self) -> BTreeMap<String, f64> {
        self.styles.iter().map(|s| (s.name.clone(), s.bayes_accuracy())).collect()
    }
}

struct Geometry {
    centers: Vec<Vec<f64>>,
    /// Per style, `TOPIC_DIMS` unit directions.
    topics: Vec<Vec<Vec<f64>>>,
}

fn gaussian_vector(rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    (0..EMBEDDING_DIM)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

impl Geometry {
    fn new(n_styles: usize, rng: &mut ChaCha8Rng) -> Self {
        let centers: Vec<Vec<f64>> = (0..n_styles).map(|_| unit(gaussian_vector(rng, 1.0))).collect();
        let topics = (0..n_styles)
            .map(|_| (0..TOPIC_DIMS).map(|_| unit(gaussian_vector(rng, 1.0))).collect())
            .collect();
        Self { centers, topics }
    }

    fn embed(&self, style: usize, topic: &[f64; TOPIC_DIMS], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v = self.centers[style].clone();
        for (dir, g) in self.topics[style].iter().zip(topic) {
            for (x, d) in v.iter_mut().zip(dir) {
                *x += TOPIC_SCALE * g * d;
            }
        }
        for (x, e) in v.iter_mut().zip(gaussian_vector(rng, 0.0625)) {
            *x += e;
        }
        unit(v)
    }
}

/// Returns the text, its token log-probabilities, and its score.
fn sample_text(
    spec: &StyleSpec,
    label: Label,
    topic: &[f64; TOPIC_DIMS],
    rng: &mut ChaCha8Rng,
) -> (String, Vec<f64>, f64) {
    let u: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let [length, center, spread, zipf, repeat] = spec.latents();
    let value = |l: Latent, u: f64| l.mean(label) + l.sd * u;

    let len = value(length, u[0]).round().max(20.0) as usize;
    let center = value(center, u[1]);
    let spread = value(spread, u[2]).clamp(0.1, 3.0);
    let exponent = value(zipf, u[3]).clamp(0.6, 2.0);
    let repeat = value(repeat, u[4]).clamp(0.0, 0.5);

    let shift: f64 = spec.loadings().iter().zip(&u).map(|(w, u)| w * u).sum::<f64>()
        + spec.topic_sd * topic.iter().sum::<f64>() / (TOPIC_DIMS as f64).sqrt();
    let base = if label.is_human() {
        spec.human_score
    } else {
        spec.human_score + AI_SHIFT
    };
    let score = base + shift + spec.residual_sd() * rng.sample::<f64, _>(StandardNormal);

    let zipf = Zipf::new(VOCAB as f64, exponent).expect("valid zipf parameters");
    let mut tokens: Vec<usize> = Vec::with_capacity(len + 2);
    while tokens.len() < len {
        if tokens.len() >= 3 && rng.random_bool(repeat) {
            let start = rng.random_range(0..tokens.len() - 2);
            for k in 0..3 {
                tokens.push(tokens[start + k]);
            }
        } else {
            tokens.push(zipf.sample(rng) as usize);
        }
    }
    tokens.truncate(len);
    let text = tokens.iter().map(|t| format!("w{t}")).collect::<Vec<_>>().join(" ");
    let logprobs = (0..len)
        .map(|_| (center + spread * rng.sample::<f64, _>(StandardNormal)).min(-1e-3))
        .collect();
    (text, logprobs, score)
}

fn sample_split(
    split: &str,
    styles: &[StyleSpec],
    geometry: &Geometry,
    n_per_cell: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<RawRecord> {
    let mut out = Vec::with_capacity(styles.len() * 2 * n_per_cell);
    for (s, spec) in styles.iter().enumerate() {
        for label in [Label::Human, Label::Ai] {
            for i in 0..n_per_cell {
                let topic: [f64; TOPIC_DIMS] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let (text, token_logprobs, score) = sample_text(spec, label, &topic, rng);
                let embedding = geometry.embed(s, &topic, rng);
                out.push(RawRecord {
                    id: format!("{split}-{}-{}-{i:04}", spec.name, label.bit()),
                    text,
                    label,
                    style: spec.name.clone(),
                    embedding,
                    token_logprobs,
                    score,
                });
            }
        }
    }
    out
}

/// Settings tuned for this benchmark. The estimator fixes the score slope at
/// one while the generated scores call for a steeper one, so the feature
/// coefficients need heavy shrinkage and the trees need the score as an input.
pub fn benchmark_config(kind: CteKind, seed: u64) -> PipelineConfig {
    let mut config = PipelineConfig { r: 8, m: 3, seed, cte: kind, ..PipelineConfig::default() };
    config.prototypes.k = 8;
    config.logistic.l2 = 10.0;
    config.boosted.score_as_feature = true;
    config.boosted.min_child_weight = 2.0;
    config
}

/// `n_per_cell` references and as many test samples for every (style, label).
pub fn synth_benchmark(seed: u64, n_per_cell: usize) -> Result<SynthBenchmark> {
    synth_benchmark_with(seed, n_per_cell, default_styles())
}

pub fn synth_benchmark_with(seed: u64, n_per_cell: usize, styles: Vec<StyleSpec>) -> Result<SynthBenchmark> {
    if n_per_cell < MIN_PER_CELL {
        return Err(Error::invalid(format!(
            "n_per_cell must be at least {MIN_PER_CELL}, got {n_per_cell}"
        )));
    }
    if styles.is_empty() {
        return Err(Error::invalid("at least one style is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geometry = Geometry::new(styles.len(), &mut rng);
    let references = sample_split("ref", &styles, &geometry, n_per_cell, &mut rng);
    let test = sample_split("test", &styles, &geometry, n_per_cell, &mut rng);
    Ok(SynthBenchmark {
        styles,
        references,
        test,
    })
}
