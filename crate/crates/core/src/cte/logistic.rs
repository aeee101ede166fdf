//! Weighted logistic threshold estimator.
//!
//! `P(human | C, τ) = σ(Cβ − τ)`: the score enters with a fixed unit
//! coefficient, so `Cβ` is the input-specific threshold. `β` is fitted by
//! damped Newton on the class-balanced negative log-likelihood with a small
//! ridge on every coefficient except the intercept.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::{Column, FeatureMatrix};
use super::sigmoid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// The penalized weighted NLL over a design matrix, exactly as given (no
/// standardization).
pub struct LogisticObjective<'a> {
    data: &'a FeatureMatrix,
    l2: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(data: &'a FeatureMatrix, l2: f64) -> Self {
        Self { data, l2 }
    }

    fn margin(&self, beta: &[f64], i: usize) -> f64 {
        self.data.rows[i].iter().zip(beta).map(|(x, b)| x * b).sum::<f64>() - self.data.scores[i]
    }

    fn penalty_mask(&self, j: usize) -> f64 {
        if j == self.data.intercept() {
            0.0
        } else {
            1.0
        }
    }

    pub fn loss(&self, beta: &[f64]) -> f64 {
        let nll: f64 = (0..self.data.n())
            .map(|i| {
                let z = self.margin(beta, i);
                self.data.weights[i] * (softplus(z) - self.data.y(i) * z)
            })
            .sum();
        let ridge: f64 = beta
            .iter()
            .enumerate()
            .map(|(j, b)| self.penalty_mask(j) * b * b)
            .sum();
        nll + 0.5 * self.l2 * ridge
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = beta
            .iter()
            .enumerate()
            .map(|(j, b)| self.l2 * self.penalty_mask(j) * b)
            .collect();
        for i in 0..self.data.n() {
            let r = self.data.weights[i] * (logistic(self.margin(beta, i)) - self.data.y(i));
            for (gj, x) in g.iter_mut().zip(&self.data.rows[i]) {
                *gj += r * x;
            }
        }
        g
    }

    /// `Σ w_i μ_i (1 − μ_i) x_i x_iᵀ`, without the ridge.
    pub fn fisher(&self, beta: &[f64]) -> DMatrix<f64> {
        let q = self.data.width();
        let mut h = DMatrix::zeros(q, q);
        for i in 0..self.data.n() {
            let mu = logistic(self.margin(beta, i));
            let w = self.data.weights[i] * mu * (1.0 - mu);
            let x = DVector::from_column_slice(&self.data.rows[i]);
            h.ger(w, &x, &x, 1.0);
        }
        h
    }

    pub fn hessian(&self, beta: &[f64]) -> DMatrix<f64> {
        let mut h = self.fisher(beta);
        for j in 0..h.nrows() {
            h[(j, j)] += self.l2 * self.penalty_mask(j);
        }
        h
    }
}

/// Affine column scaling expressed as a linear map on the full design row:
/// `x'_j = (x_j − mean_j · x_intercept) / scale_j`. A zero row maps to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    fn fit(data: &FeatureMatrix) -> Self {
        let n = data.n() as f64;
        let (mean, scale) = data
            .columns
            .iter()
            .enumerate()
            .map(|(j, col)| {
                if !col.standardize {
                    return (0.0, 1.0);
                }
                let mean = data.rows.iter().map(|r| r[j]).sum::<f64>() / n;
                let var = data.rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 1e-12 * mean.abs().max(1.0) {
                    (mean, sd)
                } else {
                    (mean, 1.0)
                }
            })
            .unzip();
        Self { mean, scale }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        let icpt = row[row.len() - 1];
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m * icpt) / s)
            .collect()
    }

    fn apply_matrix(&self, data: &FeatureMatrix) -> FeatureMatrix {
        FeatureMatrix {
            rows: data.rows.iter().map(|r| self.apply(r)).collect(),
            ..data.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticCte {
    pub columns: Vec<Column>,
    pub standardizer: Standardizer,
    /// Coefficients in standardized space.
    pub beta: Vec<f64>,
    /// Empirical weighted Fisher information at `beta`, standardized space.
    pub fisher: Vec<Vec<f64>>,
    pub n_train: usize,
    pub converged: bool,
    pub iterations: usize,
    pub final_nll: f64,
    pub gradient_norm: f64,
    /// Every training row falls strictly on its own side of the fitted threshold.
    pub perfect_separation: bool,
    #[serde(skip)]
    fisher_inverse: OnceLock<(DMatrix<f64>, bool)>,
}

impl PartialEq for LogisticCte {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
            && self.standardizer == other.standardizer
            && self.beta == other.beta
            && self.fisher == other.fisher
            && self.n_train == other.n_train
            && self.converged == other.converged
            && self.iterations == other.iterations
            && self.final_nll == other.final_nll
            && self.gradient_norm == other.gradient_norm
            && self.perfect_separation == other.perfect_separation
    }
}

const ARMIJO: f64 = 1e-4;

impl LogisticCte {
    pub fn fit(data: &FeatureMatrix, params: &LogisticParams) -> Result<Self> {
        if params.l2 < 0.0 || !params.l2.is_finite() {
            return Err(Error::invalid("l2 must be a finite non-negative number"));
        }
        let standardizer = Standardizer::fit(data);
        let design = standardizer.apply_matrix(data);
        let objective = LogisticObjective::new(&design, params.l2);

        let q = design.width();
        let mut beta = vec![0.0; q];
        let mut loss = objective.loss(&beta);
        let mut converged = false;
        let mut iterations = 0;
        let mut grad = objective.gradient(&beta);

        while iterations < params.max_iter {
            if max_abs(&grad) < params.tol {
                converged = true;
                break;
            }
            iterations += 1;
            let g = DVector::from_column_slice(&grad);
            let direction = match objective.hessian(&beta).cholesky() {
                Some(chol) => -chol.solve(&g),
                None => -g.clone(),
            };
            let slope = g.dot(&direction);
            let direction = if slope < 0.0 { direction } else { -g.clone() };
            let slope = g.dot(&direction);

            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = beta.iter().zip(direction.iter()).map(|(b, d)| b + step * d).collect();
                let trial_loss = objective.loss(&trial);
                if trial_loss <= loss + ARMIJO * step * slope {
                    accepted = Some((trial, trial_loss));
                    break;
                }
                step *= 0.5;
            }
            let Some((next, next_loss)) = accepted else {
                // no representable decrease left along the descent direction
                break;
            };
            beta = next;
            loss = next_loss;
            grad = objective.gradient(&beta);
        }
        if !converged && max_abs(&grad) < params.tol {
            converged = true;
        }

        let fisher = objective.fisher(&beta);
        let perfect_separation = (0..design.n()).all(|i| {
            let z = objective.margin(&beta, i);
            if design.labels[i].is_human() {
                z > 0.0
            } else {
                z < 0.0
            }
        });

        Ok(Self {
            columns: data.columns.clone(),
            standardizer,
            beta,
            fisher: (0..q).map(|r| fisher.row(r).iter().copied().collect()).collect(),
            n_train: data.n(),
            converged,
            iterations,
            final_nll: loss,
            gradient_norm: max_abs(&grad),
            perfect_separation,
            fisher_inverse: OnceLock::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    fn check(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.width() {
            return Err(Error::DimensionMismatch {
                expected: self.width(),
                actual: row.len(),
            });
        }
        Ok(())
    }

    /// `Cβ` for a raw design row (intercept entry included).
    pub fn threshold(&self, row: &[f64]) -> Result<f64> {
        self.check(row)?;
        Ok(dot(&self.standardizer.apply(row), &self.beta))
    }

    /// Returns `(P(human), threshold)`.
    pub fn predict(&self, row: &[f64], score: f64) -> Result<(f64, f64)> {
        let t = self.threshold(row)?;
        Ok((sigmoid(t - score), t))
    }

    /// Coefficients acting on raw (unstandardized) design rows.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        let icpt = self.width() - 1;
        let mut raw: Vec<f64> = self
            .beta
            .iter()
            .zip(&self.standardizer.scale)
            .map(|(b, s)| b / s)
            .collect();
        raw[icpt] = self.beta[icpt]
            - (0..icpt).map(|j| raw[j] * self.standardizer.mean[j]).sum::<f64>();
        raw
    }

    /// `∂P/∂c_j = σ(z)(1 − σ(z)) β_j` in raw feature units, `z = Cβ − τ`.
    pub fn attribute(&self, row: &[f64], score: f64) -> Result<Vec<f64>> {
        let z = self.threshold(row)? - score;
        let p = sigmoid(z);
        let slope = p * (1.0 - p);
        Ok(self.raw_coefficients().into_iter().map(|b| slope * b).collect())
    }

    /// Inverse Fisher information; falls back to the pseudo-inverse and
    /// reports `true` when the matrix is singular.
    pub fn fisher_inverse(&self) -> &(DMatrix<f64>, bool) {
        self.fisher_inverse.get_or_init(|| {
            let q = self.width();
            let m = DMatrix::from_fn(q, q, |i, j| self.fisher[i][j]);
            let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
            let invertible = m.clone().cholesky().filter(|c| {
                let d = c.l_dirty().diagonal();
                d.iter().all(|&v| v * v > 1e-12 * scale)
            });
            match invertible {
                Some(chol) => (chol.inverse(), false),
                None => {
                    let pinv = m.pseudo_inverse(1e-12 * scale).expect("eps is non-negative");
                    (pinv, true)
                }
            }
        })
    }

    pub fn fisher_singular(&self) -> bool {
        self.fisher_inverse().1
    }

    /// Estimated variance of the threshold `Cβ̂`: `C Î⁻¹ Cᵀ / n`.
    pub fn threshold_variance(&self, row: &[f64]) -> Result<f64> {
        self.check(row)?;
        let c = DVector::from_vec(self.standardizer.apply(row));
        let inv = &self.fisher_inverse().0;
        let quad = c.dot(&(inv * &c));
        Ok(quad.max(0.0) / self.n_train as f64)
    }

    /// `n⁻² Σ_i C_i Î⁻¹ C_iᵀ` over the given rows (normally the training rows).
    pub fn mean_threshold_variance(&self, rows: &[Vec<f64>]) -> Result<f64> {
        let n = self.n_train as f64;
        let mut total = 0.0;
        for r in rows {
            total += self.threshold_variance(r)? * n;
        }
        Ok(total / (n * n))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}
