use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::repository::Label;

/// Counts with human as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn n(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.n() as f64
    }

    pub fn f1(&self) -> f64 {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

pub fn evaluate(predictions: &[Label], labels: &[Label]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty prediction set"));
    }
    let mut c = Confusion::default();
    for (p, y) in predictions.iter().zip(labels) {
        match (p.is_human(), y.is_human()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(Metrics {
        accuracy: c.accuracy(),
        f1: c.f1(),
        confusion: c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    /// First classifier right, second wrong.
    pub b: usize,
    /// First classifier wrong, second right.
    pub c: usize,
    pub chi2: f64,
    pub p_value: f64,
    pub corrected: bool,
}

/// Chi-square statistic from discordant counts; `corrected` applies the
/// continuity correction `(|b − c| − 1)²`.
pub fn mcnemar_counts(b: usize, c: usize, corrected: bool) -> McNemar {
    let total = (b + c) as f64;
    let chi2 = if b + c == 0 {
        0.0
    } else {
        let diff = (b as f64 - c as f64).abs();
        let diff = if corrected { (diff - 1.0).max(0.0) } else { diff };
        diff * diff / total
    };
    let p_value = if chi2 == 0.0 {
        1.0
    } else {
        ChiSquared::new(1.0).expect("one degree of freedom").sf(chi2)
    };
    McNemar {
        b,
        c,
        chi2,
        p_value,
        corrected,
    }
}

pub fn mcnemar(pred_a: &[Label], pred_b: &[Label], labels: &[Label], corrected: bool) -> Result<McNemar> {
    if pred_a.len() != labels.len() || pred_b.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: pred_a.len().max(pred_b.len()),
            right: labels.len(),
        });
    }
    let (mut b, mut c) = (0, 0);
    for ((a, bb), y) in pred_a.iter().zip(pred_b).zip(labels) {
        match (a == y, bb == y) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_counts(b, c, corrected))
}
