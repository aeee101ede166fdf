//! Reference-free baselines: one global threshold, and nearest-score voting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repository::Label;

/// A single cut on the score. With `human_below`, scores strictly below
/// `threshold` are labelled human.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticThreshold {
    pub threshold: f64,
    pub human_below: bool,
    /// All training scores were equal, so no cut separates anything.
    pub degenerate: bool,
    pub youden_j: f64,
}

impl StaticThreshold {
    /// Maximizes Youden's J over all cut points and both orientations.
    ///
    /// Candidates are the midpoints between adjacent distinct scores plus
    /// `±∞`. Ties prefer the smaller cut, then `human_below`. When every
    /// score is equal the cut is placed at that score.
    pub fn fit(scores: &[f64], labels: &[Label]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: labels.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("scores must be finite"));
        }
        let positives = labels.iter().filter(|l| l.is_human()).count();
        let negatives = labels.len() - positives;
        if positives == 0 || negatives == 0 {
            return Err(Error::SingleClass { positives, negatives });
        }

        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let mut candidates = vec![f64::NEG_INFINITY];
        for w in order.windows(2) {
            let (lo, hi) = (scores[w[0]], scores[w[1]]);
            if lo < hi {
                candidates.push(lo + (hi - lo) / 2.0);
            }
        }
        candidates.push(f64::INFINITY);
        let degenerate = candidates.len() == 2;

        // sweep: humans and AI strictly below the current cut
        let (mut humans_below, mut ai_below) = (0usize, 0usize);
        let mut cursor = 0;
        let mut best = (f64::NEG_INFINITY, 0.0, true);
        for &t in &candidates {
            while cursor < order.len() && scores[order[cursor]] < t {
                if labels[order[cursor]].is_human() {
                    humans_below += 1;
                } else {
                    ai_below += 1;
                }
                cursor += 1;
            }
            let tpr = humans_below as f64 / positives as f64;
            let fpr = ai_below as f64 / negatives as f64;
            for (human_below, j) in [(true, tpr - fpr), (false, fpr - tpr)] {
                if j > best.0 {
                    best = (j, t, human_below);
                }
            }
        }
        let threshold = if degenerate { scores[0] } else { best.1 };
        Ok(Self {
            threshold,
            human_below: best.2,
            degenerate,
            youden_j: best.0,
        })
    }

    pub fn predict(&self, score: f64) -> Label {
        let below = score < self.threshold;
        if below == self.human_below {
            Label::Human
        } else {
            Label::Ai
        }
    }
}

/// Majority label among the `k` references whose scores are closest to
/// `score`. Distance ties resolve by reference score, then by position in
/// `refs`; an even split votes human.
pub fn nearest_vote(refs: &[(f64, Label)], score: f64, k: usize) -> Result<Label> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > refs.len() {
        return Err(Error::TooFewReferences {
            required: k,
            available: refs.len(),
        });
    }
    let mut order: Vec<usize> = (0..refs.len()).collect();
    order.sort_by(|&a, &b| {
        let da = (refs[a].0 - score).abs();
        let db = (refs[b].0 - score).abs();
        da.total_cmp(&db)
            .then(refs[a].0.total_cmp(&refs[b].0))
            .then(a.cmp(&b))
    });
    let humans = order[..k].iter().filter(|&&i| refs[i].1.is_human()).count();
    Ok(if 2 * humans >= k { Label::Human } else { Label::Ai })
}
