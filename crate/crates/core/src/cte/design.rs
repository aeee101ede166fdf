use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ConditionVector, FeatureMask};
use crate::repository::{Label, SrrSample};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// Scaled to zero mean and unit variance before logistic fitting.
    pub standardize: bool,
}

impl Column {
    fn new(name: impl Into<String>, standardize: bool) -> Self {
        Self {
            name: name.into(),
            standardize,
        }
    }

    pub fn is_intercept(&self) -> bool {
        self.name == INTERCEPT
    }
}

pub const INTERCEPT: &str = "intercept";

/// Maps a condition vector to a design row: masked scalars, then masked
/// semantic coordinates, then a constant 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub mask: FeatureMask,
    pub semantic_dim: usize,
}

impl FeatureLayout {
    pub fn new(mask: FeatureMask, semantic_dim: usize) -> Self {
        Self { mask, semantic_dim }
    }

    pub fn columns(&self) -> Vec<Column> {
        let mut cols: Vec<Column> = self.mask.scalars().map(|c| Column::new(c.name(), true)).collect();
        if self.mask.semantic {
            cols.extend((0..self.semantic_dim).map(|j| Column::new(format!("semantic_{j}"), false)));
        }
        cols.push(Column::new(INTERCEPT, false));
        cols
    }

    pub fn width(&self) -> usize {
        self.mask.scalars().count() + if self.mask.semantic { self.semantic_dim } else { 0 } + 1
    }

    pub fn row(&self, c: &ConditionVector) -> Result<Vec<f64>> {
        if self.mask.semantic && c.semantic.len() != self.semantic_dim {
            return Err(Error::DimensionMismatch {
                expected: self.semantic_dim,
                actual: c.semantic.len(),
            });
        }
        let mut row: Vec<f64> = self.mask.scalars().map(|k| c.scalar(k)).collect();
        if self.mask.semantic {
            row.extend_from_slice(&c.semantic);
        }
        row.push(1.0);
        Ok(row)
    }
}

/// Training data for a threshold estimator. The last column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub scores: Vec<f64>,
    /// Balanced: each class carries half of the total weight `n`.
    pub weights: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        columns: Vec<Column>,
        rows: Vec<Vec<f64>>,
        labels: Vec<Label>,
        scores: Vec<f64>,
    ) -> Result<Self> {
        let n = rows.len();
        if labels.len() != n {
            return Err(Error::LengthMismatch { left: n, right: labels.len() });
        }
        if scores.len() != n {
            return Err(Error::LengthMismatch { left: n, right: scores.len() });
        }
        if !columns.last().is_some_and(Column::is_intercept) {
            return Err(Error::invalid("last design column must be the intercept"));
        }
        for row in &rows {
            if row.len() != columns.len() {
                return Err(Error::DimensionMismatch {
                    expected: columns.len(),
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("design rows must be finite"));
            }
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("scores must be finite"));
        }
        let positives = labels.iter().filter(|l| l.is_human()).count();
        let negatives = n - positives;
        if positives == 0 || negatives == 0 {
            return Err(Error::SingleClass { positives, negatives });
        }
        let weights = labels
            .iter()
            .map(|l| {
                let class = if l.is_human() { positives } else { negatives };
                n as f64 / (2.0 * class as f64)
            })
            .collect();
        Ok(Self {
            columns,
            rows,
            labels,
            scores,
            weights,
        })
    }

    /// Appends the intercept to generic feature rows named `x0, x1, ...`.
    pub fn with_intercept(
        rows: Vec<Vec<f64>>,
        labels: Vec<Label>,
        scores: Vec<f64>,
        standardize: bool,
    ) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let mut columns: Vec<Column> = (0..width).map(|j| Column::new(format!("x{j}"), standardize)).collect();
        columns.push(Column::new(INTERCEPT, false));
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.push(1.0);
                r
            })
            .collect();
        Self::new(columns, rows, labels, scores)
    }

    pub fn from_samples<'a, I>(samples: I, layout: &FeatureLayout) -> Result<Self>
    where
        I: IntoIterator<Item = &'a SrrSample>,
    {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut scores = Vec::new();
        for s in samples {
            rows.push(layout.row(&s.conditions)?);
            labels.push(s.label);
            scores.push(s.score);
        }
        Self::new(layout.columns(), rows, labels, scores)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn intercept(&self) -> usize {
        self.columns.len() - 1
    }

    /// Stacks the matrix on top of itself.
    pub fn duplicated(&self) -> Self {
        Self::new(
            self.columns.clone(),
            twice(&self.rows),
            twice(&self.labels),
            twice(&self.scores),
        )
        .expect("duplicating valid data stays valid")
    }

    pub fn y(&self, i: usize) -> f64 {
        f64::from(self.labels[i].bit())
    }
}

fn twice<T: Clone>(v: &[T]) -> Vec<T> {
    v.iter().chain(v).cloned().collect()
}
