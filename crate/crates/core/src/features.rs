//! Linguistic conditions computed from a token sequence.
//!
//! Length, log-probability mean and variance, 2-/3-gram repetition and the
//! length-corrected type-token ratio. Token log-probabilities come from an
//! external proxy model; nothing here runs a model.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub case_fold: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self { case_fold: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub logprobs: Option<Vec<f64>>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>, logprobs: Option<Vec<f64>>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        if let Some(lp) = &logprobs {
            if lp.len() != tokens.len() {
                return Err(Error::LogprobLengthMismatch {
                    tokens: tokens.len(),
                    logprobs: lp.len(),
                });
            }
            validate_logprobs(lp)?;
        }
        Ok(Self { tokens, logprobs })
    }

    pub fn with_logprobs(self, logprobs: Vec<f64>) -> Result<Self> {
        Self::new(self.tokens, Some(logprobs))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Splits on Unicode whitespace, optionally lower-casing every token.
pub fn tokenize(text: &str, config: TokenizerConfig) -> Result<TokenSequence> {
    let tokens: Vec<String> = text
        .split_whitespace()
        .map(|t| if config.case_fold { t.to_lowercase() } else { t.to_owned() })
        .collect();
    TokenSequence::new(tokens, None)
}

fn validate_logprobs(logprobs: &[f64]) -> Result<()> {
    for (index, &value) in logprobs.iter().enumerate() {
        if !value.is_finite() || value > 0.0 {
            return Err(Error::InvalidLogprob { index, value });
        }
    }
    Ok(())
}

/// Fraction of distinct n-grams that occur more than once. Zero when the
/// sequence is shorter than `n`.
pub fn ngram_repetition<S: AsRef<str>>(tokens: &[S], n: usize) -> f64 {
    assert!(n >= 1, "n-gram order must be at least 1");
    if tokens.len() < n {
        return 0.0;
    }
    let mut counts: HashMap<Vec<&str>, usize> = HashMap::new();
    for window in tokens.windows(n) {
        let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    let repeated = counts.values().filter(|&&c| c > 1).count();
    repeated as f64 / counts.len() as f64
}

/// Distinct tokens divided by the square root of the token count.
pub fn type_token_ratio<S: AsRef<str>>(tokens: &[S]) -> f64 {
    let distinct: HashSet<&str> = tokens.iter().map(AsRef::as_ref).collect();
    distinct.len() as f64 / (tokens.len() as f64).sqrt()
}

/// Population mean and variance.
pub fn logprob_moments(logprobs: &[f64]) -> Result<(f64, f64)> {
    if logprobs.is_empty() {
        return Err(Error::MissingLogprobs);
    }
    validate_logprobs(logprobs)?;
    // summing n copies of v and dividing by n does not always round back to v
    if logprobs.iter().all(|&p| p == logprobs[0]) {
        return Ok((logprobs[0], 0.0));
    }
    let n = logprobs.len() as f64;
    let mean = logprobs.iter().sum::<f64>() / n;
    let var = logprobs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var))
}

/// The six scalar linguistic conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Length,
    LogprobMean,
    LogprobVar,
    Rep2,
    Rep3,
    Ttr,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::Length,
        Condition::LogprobMean,
        Condition::LogprobVar,
        Condition::Rep2,
        Condition::Rep3,
        Condition::Ttr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Length => "length",
            Condition::LogprobMean => "logprob_mean",
            Condition::LogprobVar => "logprob_var",
            Condition::Rep2 => "rep2",
            Condition::Rep3 => "rep3",
            Condition::Ttr => "ttr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVector {
    pub text_length: usize,
    pub logprob_mean: f64,
    pub logprob_var: f64,
    pub rep2: f64,
    pub rep3: f64,
    pub ttr: f64,
    pub semantic: Vec<f64>,
}

impl ConditionVector {
    /// Builds conditions from the primary tokenizer's tokens and an
    /// independently produced log-probability list. The two lengths may
    /// differ when the log-probabilities come from a different tokenizer.
    pub fn from_parts<S: AsRef<str>>(
        tokens: &[S],
        logprobs: &[f64],
        semantic: Vec<f64>,
    ) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let (logprob_mean, logprob_var) = logprob_moments(logprobs)?;
        Ok(Self {
            text_length: tokens.len(),
            logprob_mean,
            logprob_var,
            rep2: ngram_repetition(tokens, 2),
            rep3: ngram_repetition(tokens, 3),
            ttr: type_token_ratio(tokens),
            semantic,
        })
    }

    pub fn scalar(&self, condition: Condition) -> f64 {
        match condition {
            Condition::Length => self.text_length as f64,
            Condition::LogprobMean => self.logprob_mean,
            Condition::LogprobVar => self.logprob_var,
            Condition::Rep2 => self.rep2,
            Condition::Rep3 => self.rep3,
            Condition::Ttr => self.ttr,
        }
    }

    /// First condition (in canonical order, semantic last) that is not finite.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        Condition::ALL
            .iter()
            .find(|&&c| !self.scalar(c).is_finite())
            .map(|c| c.name())
            .or_else(|| {
                self.semantic
                    .iter()
                    .any(|v| !v.is_finite())
                    .then_some("semantic")
            })
    }
}

/// Computes all conditions for a sequence that carries its own log-probabilities.
pub fn extract_conditions(seq: &TokenSequence, semantic: Vec<f64>) -> Result<ConditionVector> {
    let logprobs = seq.logprobs.as_deref().ok_or(Error::MissingLogprobs)?;
    ConditionVector::from_parts(&seq.tokens, logprobs, semantic)
}

/// Which of the seven condition groups feed the threshold estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureMask {
    scalars: [bool; 6],
    pub semantic: bool,
}

impl FeatureMask {
    pub const fn all() -> Self {
        Self {
            scalars: [true; 6],
            semantic: true,
        }
    }

    /// Intercept only.
    pub const fn none() -> Self {
        Self {
            scalars: [false; 6],
            semantic: false,
        }
    }

    pub fn includes(&self, condition: Condition) -> bool {
        self.scalars[condition as usize]
    }

    pub fn with(mut self, condition: Condition, on: bool) -> Self {
        self.scalars[condition as usize] = on;
        self
    }

    pub fn with_semantic(mut self, on: bool) -> Self {
        self.semantic = on;
        self
    }

    pub fn scalars(&self) -> impl Iterator<Item = Condition> + '_ {
        Condition::ALL.into_iter().filter(|c| self.includes(*c))
    }

    /// The default mask plus every leave-one-out variant, default last.
    pub fn leave_one_out_grid() -> Vec<(String, FeatureMask)> {
        let mut grid: Vec<(String, FeatureMask)> = Condition::ALL
            .iter()
            .map(|&c| (format!("without_{}", c.name()), Self::all().with(c, false)))
            .collect();
        grid.push(("without_semantic".into(), Self::all().with_semantic(false)));
        grid.push(("default".into(), Self::all()));
        grid
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::all()
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<&str> = self.scalars().map(Condition::name).collect();
        if self.semantic {
            names.push("semantic");
        }
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

impl FromStr for FeatureMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "all" | "default" => return Ok(Self::all()),
            "none" | "" => return Ok(Self::none()),
            _ => {}
        }
        let mut mask = Self::none();
        for part in s.split(',').map(str::trim) {
            if part == "semantic" {
                mask.semantic = true;
                continue;
            }
            let condition = Condition::ALL
                .into_iter()
                .find(|c| c.name() == part)
                .ok_or_else(|| Error::invalid(format!("unknown feature `{part}`")))?;
            mask = mask.with(condition, true);
        }
        Ok(mask)
    }
}

impl Serialize for FeatureMask {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureMask {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
