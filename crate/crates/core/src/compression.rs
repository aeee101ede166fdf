//! PCA compression of semantic embeddings.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of retained principal components.
pub const DEFAULT_DIM: usize = 32;

/// A fitted principal-component projection.
///
/// `basis` is stored row-major as `output_dim` rows of length `input_dim`;
/// row `j` is the `j`-th principal direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionModel {
    pub input_dim: usize,
    pub output_dim: usize,
    pub mean: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    /// Set when the covariance has fewer than `output_dim` strictly positive
    /// eigenvalues. The trailing components then carry no variance.
    pub rank_deficient: bool,
}

/// Relative eigenvalue threshold below which a component counts as degenerate.
const RANK_TOL: f64 = 1e-12;

impl CompressionModel {
    pub fn fit(embeddings: &[Vec<f64>], r: usize) -> Result<Self> {
        let n = embeddings.len();
        if n < 2 {
            return Err(Error::invalid("PCA needs at least two embeddings"));
        }
        let d = embeddings[0].len();
        if let Some(bad) = embeddings.iter().find(|e| e.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.len(),
            });
        }
        if r == 0 || r > d.min(n - 1) {
            return Err(Error::invalid(format!(
                "compression dimension must be in 1..={} (d={d}, n={n}), got {r}",
                d.min(n - 1)
            )));
        }

        let mut mean = vec![0.0; d];
        for e in embeddings {
            for (m, v) in mean.iter_mut().zip(e) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let centered = DMatrix::from_fn(n, d, |i, j| embeddings[i][j] - mean[j]);
        let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });

        let top = eig.eigenvalues[order[0]].max(0.0);
        let positive = order
            .iter()
            .filter(|&&k| eig.eigenvalues[k] > RANK_TOL * top.max(1.0))
            .count();

        let mut basis = Vec::with_capacity(r);
        let mut explained_variance = Vec::with_capacity(r);
        for &k in order.iter().take(r) {
            let mut column: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            orient(&mut column);
            basis.push(column);
            explained_variance.push(eig.eigenvalues[k].max(0.0));
        }

        Ok(Self {
            input_dim: d,
            output_dim: r,
            mean,
            basis,
            explained_variance,
            rank_deficient: positive < r,
        })
    }

    pub fn compress(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: v.len(),
            });
        }
        Ok(self
            .basis
            .iter()
            .map(|dir| {
                dir.iter()
                    .zip(v.iter().zip(&self.mean))
                    .map(|(b, (x, m))| b * (x - m))
                    .sum()
            })
            .collect())
    }

    /// Maps a compressed vector back to the input space.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.output_dim {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim,
                actual: z.len(),
            });
        }
        let mut out = DVector::from_column_slice(&self.mean);
        for (dir, &coef) in self.basis.iter().zip(z) {
            for (o, b) in out.iter_mut().zip(dir) {
                *o += coef * b;
            }
        }
        Ok(out.iter().copied().collect())
    }
}

/// Flip so the largest-magnitude coordinate is positive (first one on ties).
fn orient(column: &mut [f64]) {
    let mut best = 0;
    for (i, v) in column.iter().enumerate() {
        if v.abs() > column[best].abs() {
            best = i;
        }
    }
    if column[best] < 0.0 {
        column.iter_mut().for_each(|v| *v = -*v);
    }
}
