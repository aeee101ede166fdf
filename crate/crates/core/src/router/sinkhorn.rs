//! Entropic optimal-transport assignment of points to prototypes.
//!
//! The plan is `Q = diag(a) · exp(PᵀX / ε) · diag(b)` with uniform marginals:
//! every column (point) carries mass `1/N`, every row (prototype) `1/K`.
//! Iterations run on `log a` and `log b` so `exp(PᵀX / ε)` is never formed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `K` rows of `N` entries.
    pub plan: Vec<Vec<f64>>,
    pub converged: bool,
    /// Largest absolute deviation of any row or column sum from its target.
    pub violation: f64,
    pub iterations: usize,
}

impl TransportPlan {
    pub fn n_prototypes(&self) -> usize {
        self.plan.len()
    }

    pub fn n_points(&self) -> usize {
        self.plan.first().map_or(0, Vec::len)
    }

    /// Per point, the prototype holding the largest share of its mass
    /// (lowest index on ties).
    pub fn harden(&self) -> Vec<usize> {
        (0..self.n_points())
            .map(|n| {
                let mut best = 0;
                for k in 1..self.n_prototypes() {
                    if self.plan[k][n] > self.plan[best][n] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n_points())
            .map(|n| self.plan.iter().map(|row| row[n]).sum())
            .collect()
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Solves for the balanced plan between `points` (N vectors) and
/// `prototypes` (K vectors) of the same dimension.
pub fn sinkhorn_assign(
    points: &[Vec<f64>],
    prototypes: &[Vec<f64>],
    config: &SinkhornConfig,
) -> Result<TransportPlan> {
    let n = points.len();
    let k = prototypes.len();
    if k == 0 || n < k {
        return Err(Error::invalid(format!(
            "sinkhorn needs N >= K >= 1, got N={n}, K={k}"
        )));
    }
    if !(config.epsilon > 0.0) {
        return Err(Error::invalid("sinkhorn epsilon must be positive"));
    }
    let dim = prototypes[0].len();
    for v in points.iter().chain(prototypes) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
    }

    let kernel: Vec<Vec<f64>> = prototypes
        .iter()
        .map(|p| {
            points
                .iter()
                .map(|x| p.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / config.epsilon)
                .collect()
        })
        .collect();

    let log_row = -(k as f64).ln();
    let log_col = -(n as f64).ln();
    let mut log_a = vec![0.0; k];
    let mut log_b = vec![0.0; n];
    let mut converged = false;
    let mut violation = f64::INFINITY;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        for (i, a) in log_a.iter_mut().enumerate() {
            let row = &kernel[i];
            *a = log_row - log_sum_exp(row.iter().zip(&log_b).map(|(s, b)| s + b));
        }
        for (j, b) in log_b.iter_mut().enumerate() {
            *b = log_col - log_sum_exp(kernel.iter().zip(&log_a).map(|(row, a)| row[j] + a));
        }
        violation = marginal_violation(&kernel, &log_a, &log_b);
        if violation < config.tol {
            converged = true;
            break;
        }
    }

    let plan = kernel
        .iter()
        .zip(&log_a)
        .map(|(row, a)| row.iter().zip(&log_b).map(|(s, b)| (s + a + b).exp()).collect())
        .collect();

    Ok(TransportPlan {
        plan,
        converged,
        violation,
        iterations,
    })
}

fn marginal_violation(kernel: &[Vec<f64>], log_a: &[f64], log_b: &[f64]) -> f64 {
    let k = kernel.len() as f64;
    let n = log_b.len() as f64;
    let mut cols = vec![0.0; log_b.len()];
    let mut worst: f64 = 0.0;
    for (row, a) in kernel.iter().zip(log_a) {
        let mut sum = 0.0;
        for ((s, b), c) in row.iter().zip(log_b).zip(cols.iter_mut()) {
            let q = (s + a + b).exp();
            sum += q;
            *c += q;
        }
        worst = worst.max((sum - 1.0 / k).abs());
    }
    cols.iter().fold(worst, |w, c| w.max((c - 1.0 / n).abs()))
}
