//! Gradient-boosted tree threshold estimator.
//!
//! `P(human | C, τ) = σ(τ̂(C) − τ)` with `τ̂(C) = base + Σ_k f_k(C)`. Trees are
//! grown greedily on second-order statistics of the class-weighted logistic
//! loss, treating each sample's score as a fixed margin offset.

use serde::{Deserialize, Serialize};

use super::design::{Column, FeatureMatrix};
use super::sigmoid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostedParams {
    pub max_depth: usize,
    pub n_trees: usize,
    pub learning_rate: f64,
    pub reg_lambda: f64,
    pub reg_gamma: f64,
    /// Minimum hessian mass per child.
    pub min_child_weight: f64,
    /// Also offer the score itself as a split feature.
    pub score_as_feature: bool,
}

impl Default for BoostedParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            n_trees: 100,
            learning_rate: 0.1,
            reg_lambda: 1.0,
            reg_gamma: 0.0,
            min_child_weight: 1.0,
            score_as_feature: false,
        }
    }
}

impl BoostedParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate must lie in (0, 1]"));
        }
        if !(self.reg_lambda >= 0.0) || !(self.reg_gamma >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(Error::invalid("boosting regularizers must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] < threshold` go left.
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] < *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<f64> {
        match self {
            TreeNode::Leaf { weight } => vec![*weight],
            TreeNode::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }

    /// `γT + ½λ‖w‖²`.
    pub fn complexity(&self, gamma: f64, lambda: f64) -> f64 {
        let leaves = self.leaves();
        gamma * leaves.len() as f64 + 0.5 * lambda * leaves.iter().map(|w| w * w).sum::<f64>()
    }

    fn scale(&mut self, factor: f64) {
        match self {
            TreeNode::Leaf { weight } => *weight *= factor,
            TreeNode::Split { left, right, .. } => {
                left.scale(factor);
                right.scale(factor);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedCte {
    pub columns: Vec<Column>,
    pub params: BoostedParams,
    pub base_margin: f64,
    pub trees: Vec<TreeNode>,
    /// Weighted NLL on the training set after the base margin and after each tree.
    pub round_loss: Vec<f64>,
}

fn loss_term(margin: f64, y: f64) -> f64 {
    let z = margin;
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    softplus - y * z
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Grower<'a> {
    features: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a BoostedParams,
}

impl Grower<'_> {
    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.params.reg_lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.params.reg_lambda;
        if denom > 0.0 {
            g * g / denom
        } else {
            0.0
        }
    }

    fn grow(&self, rows: &mut [usize], depth: usize) -> TreeNode {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let leaf = TreeNode::Leaf {
            weight: self.params.learning_rate * self.leaf_weight(g, h),
        };
        if depth >= self.params.max_depth || rows.len() < 2 {
            return leaf;
        }
        let parent = self.score(g, h);
        let width = self.features.first().map_or(0, Vec::len);

        // (gain, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..width {
            rows.sort_by(|&a, &b| self.features[a][f].total_cmp(&self.features[b][f]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for w in 0..rows.len() - 1 {
                let i = rows[w];
                gl += self.grad[i];
                hl += self.hess[i];
                let lo = self.features[i][f];
                let hi = self.features[rows[w + 1]][f];
                if lo == hi {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent);
                if gain > self.params.reg_gamma && best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return leaf;
        };
        let (mut left, mut right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.features[i][feature] < threshold);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(self.grow(&mut left, depth + 1)),
            right: Box::new(self.grow(&mut right, depth + 1)),
        }
    }
}

impl BoostedCte {
    pub fn fit(data: &FeatureMatrix, params: &BoostedParams) -> Result<Self> {
        params.validate()?;
        let n = data.n();
        let y: Vec<f64> = (0..n).map(|i| data.y(i)).collect();
        let features: Vec<Vec<f64>> = (0..n).map(|i| feature_vector(&data.rows[i], data.scores[i], params)).collect();
        let weighted_loss = |margins: &[f64]| -> f64 {
            (0..n)
                .map(|i| data.weights[i] * loss_term(margins[i] - data.scores[i], y[i]))
                .sum()
        };

        let base_margin = optimal_constant(data, &y);
        let mut margins = vec![base_margin; n];
        let mut loss = weighted_loss(&margins);
        let mut round_loss = vec![loss];
        let mut trees = Vec::with_capacity(params.n_trees);

        for _ in 0..params.n_trees {
            let (grad, hess): (Vec<f64>, Vec<f64>) = (0..n)
                .map(|i| {
                    let p = logistic(margins[i] - data.scores[i]);
                    let w = data.weights[i];
                    (w * (p - y[i]), w * p * (1.0 - p))
                })
                .unzip();
            let grower = Grower {
                features: &features,
                grad: &grad,
                hess: &hess,
                params,
            };
            let mut rows: Vec<usize> = (0..n).collect();
            let mut tree = grower.grow(&mut rows, 0);

            // Newton leaves can overshoot the true loss; halve the tree until
            // loss plus its complexity does not exceed the previous loss.
            let mut accepted = None;
            for _ in 0..30 {
                let trial: Vec<f64> = (0..n).map(|i| margins[i] + tree.predict(&features[i])).collect();
                let trial_loss = weighted_loss(&trial);
                let omega = tree.complexity(params.reg_gamma, params.reg_lambda);
                if trial_loss + omega <= loss {
                    accepted = Some((trial, trial_loss));
                    break;
                }
                tree.scale(0.5);
            }
            let Some((next, next_loss)) = accepted else {
                break;
            };
            margins = next;
            loss = next_loss;
            round_loss.push(loss);
            trees.push(tree);
        }

        Ok(Self {
            columns: data.columns.clone(),
            params: *params,
            base_margin,
            trees,
            round_loss,
        })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn threshold(&self, row: &[f64], score: f64) -> Result<f64> {
        if row.len() != self.width() {
            return Err(Error::DimensionMismatch {
                expected: self.width(),
                actual: row.len(),
            });
        }
        let x = feature_vector(row, score, &self.params);
        Ok(self.base_margin + self.trees.iter().map(|t| t.predict(&x)).sum::<f64>())
    }

    /// Returns `(P(human), threshold)`.
    pub fn predict(&self, row: &[f64], score: f64) -> Result<(f64, f64)> {
        let t = self.threshold(row, score)?;
        Ok((sigmoid(t - score), t))
    }

    pub fn total_complexity(&self) -> f64 {
        self.trees
            .iter()
            .map(|t| t.complexity(self.params.reg_gamma, self.params.reg_lambda))
            .sum()
    }
}

/// The design row minus its intercept, plus the score when configured.
fn feature_vector(row: &[f64], score: f64, params: &BoostedParams) -> Vec<f64> {
    let mut x = row[..row.len() - 1].to_vec();
    if params.score_as_feature {
        x.push(score);
    }
    x
}

/// Constant margin minimizing the weighted loss, by bisection on its
/// monotone derivative.
fn optimal_constant(data: &FeatureMatrix, y: &[f64]) -> f64 {
    let derivative = |c: f64| -> f64 {
        (0..data.n())
            .map(|i| data.weights[i] * (logistic(c - data.scores[i]) - y[i]))
            .sum()
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while derivative(lo) > 0.0 && lo > -1e6 {
        lo *= 2.0;
    }
    while derivative(hi) < 0.0 && hi < 1e6 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if derivative(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo + (hi - lo) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repository::Label;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|&b| Label::from_bit(b).unwrap()).collect()
    }

    #[test]
    fn uninformative_features_give_half() {
        let rows = vec![vec![1.0]; 6];
        let data = FeatureMatrix::with_intercept(rows, labels(&[0, 1, 1, 0, 1, 0]), vec![0.0; 6], false).unwrap();
        let model = BoostedCte::fit(&data, &BoostedParams::default()).unwrap();
        for i in 0..6 {
            let (p, _) = model.predict(&data.rows[i], 0.0).unwrap();
            assert!((p - 0.5).abs() < 1e-6);
        }
        assert!(model.trees.iter().all(|t| t.depth() == 0));
    }

    #[test]
    fn single_stump_splits_at_the_gap() {
        let xs = [0.1, 0.4, 0.7, 1.0, 3.0, 3.2, 3.9, 4.4];
        let bits = [1, 1, 1, 1, 0, 0, 0, 0];
        let rows = xs.iter().map(|&x| vec![x]).collect();
        let data = FeatureMatrix::with_intercept(rows, labels(&bits), vec![0.0; 8], false).unwrap();
        let params = BoostedParams {
            max_depth: 1,
            n_trees: 1,
            min_child_weight: 0.0,
            ..BoostedParams::default()
        };
        let model = BoostedCte::fit(&data, &params).unwrap();

        // exhaustive oracle over all split points: the best-gain stump
        // (equal class sizes) separates at the 1.0 | 3.0 gap
        assert_eq!(model.trees.len(), 1);
        match &model.trees[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert!(*threshold > 1.0 && *threshold < 3.0);
                assert_eq!(*threshold, 2.0);
            }
            other => panic!("expected stump, got {other:?}"),
        }
        let correct = (0..8)
            .filter(|&i| (model.predict(&data.rows[i], 0.0).unwrap().0 > 0.5) == (bits[i] == 1))
            .count();
        assert_eq!(correct, 8);
    }

    #[test]
    fn depth_limit_respected_and_complexity_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 80;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let bits: Vec<u8> = rows.iter().map(|r| u8::from(r[0] * r[1] > 0.0)).collect();
        let data = FeatureMatrix::with_intercept(rows, labels(&bits), vec![0.0; n], false).unwrap();
        let params = BoostedParams {
            max_depth: 3,
            n_trees: 20,
            ..BoostedParams::default()
        };
        let model = BoostedCte::fit(&data, &params).unwrap();
        assert!(model.trees.iter().all(|t| t.depth() <= 3));
        assert!(model.trees.iter().all(|t| t.complexity(0.0, 1.0) >= 0.0));
        assert!(model.round_loss.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn probability_decreasing_in_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 40;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let bits: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = FeatureMatrix::with_intercept(rows, labels(&bits), scores, false).unwrap();
        let model = BoostedCte::fit(&data, &BoostedParams::default()).unwrap();
        let row = [0.5, 1.0];
        let mut prev = 1.0;
        for k in 0..20 {
            let (p, _) = model.predict(&row, -2.0 + 0.2 * k as f64).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn rejects_bad_params() {
        let data = FeatureMatrix::with_intercept(vec![vec![0.0], vec![1.0]], labels(&[0, 1]), vec![0.0; 2], false).unwrap();
        let bad = BoostedParams {
            learning_rate: 0.0,
            ..BoostedParams::default()
        };
        assert!(BoostedCte::fit(&data, &bad).is_err());
    }

    #[test]
    fn tree_json_is_nested() {
        let tree = TreeNode::Split {
            feature: 2,
            threshold: 0.5,
            left: Box::new(TreeNode::Leaf { weight: -0.1 }),
            right: Box::new(TreeNode::Leaf { weight: 0.2 }),
        };
        let json = serde_json::to_string(&tree).unwrap();
        assert_eq!(
            json,
            r#"{"node":"split","feature":2,"threshold":0.5,"left":{"node":"leaf","weight":-0.1},"right":{"node":"leaf","weight":0.2}}"#
        );
        let back: TreeNode = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tree);
    }
}
