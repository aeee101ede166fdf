//! Conditional threshold estimators.

pub mod boosted;
pub mod design;
pub mod logistic;

use serde::{Deserialize, Serialize};

pub use boosted::{BoostedCte, BoostedParams, TreeNode};
pub use design::{Column, FeatureLayout, FeatureMatrix, INTERCEPT};
pub use logistic::{LogisticCte, LogisticObjective, LogisticParams, Standardizer};

use crate::error::{Error, Result};

/// Logistic function with its argument clamped to `[-30, 30]`.
pub fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-30.0, 30.0);
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CteKind {
    Logistic,
    Boosted,
}

impl std::fmt::Display for CteKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CteKind::Logistic => "logistic",
            CteKind::Boosted => "boosted",
        })
    }
}

impl std::str::FromStr for CteKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(CteKind::Logistic),
            "boosted" => Ok(CteKind::Boosted),
            other => Err(Error::invalid(format!("unknown estimator kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CteModel {
    Logistic(LogisticCte),
    Boosted(BoostedCte),
}

impl CteModel {
    pub fn fit(
        data: &FeatureMatrix,
        kind: CteKind,
        logistic: &LogisticParams,
        boosted: &BoostedParams,
    ) -> Result<Self> {
        Ok(match kind {
            CteKind::Logistic => CteModel::Logistic(LogisticCte::fit(data, logistic)?),
            CteKind::Boosted => CteModel::Boosted(BoostedCte::fit(data, boosted)?),
        })
    }

    pub fn kind(&self) -> CteKind {
        match self {
            CteModel::Logistic(_) => CteKind::Logistic,
            CteModel::Boosted(_) => CteKind::Boosted,
        }
    }

    /// Returns `(P(human), threshold estimate)`.
    pub fn predict(&self, row: &[f64], score: f64) -> Result<(f64, f64)> {
        match self {
            CteModel::Logistic(m) => m.predict(row, score),
            CteModel::Boosted(m) => m.predict(row, score),
        }
    }

    pub fn threshold_variance(&self, row: &[f64]) -> Result<Option<f64>> {
        match self {
            CteModel::Logistic(m) => m.threshold_variance(row).map(Some),
            CteModel::Boosted(_) => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_clamped_and_symmetric() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1e6), sigmoid(30.0));
        assert!(sigmoid(-1e6) > 0.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kind_round_trips_through_text() {
        for k in [CteKind::Logistic, CteKind::Boosted] {
            assert_eq!(k.to_string().parse::<CteKind>().unwrap(), k);
        }
        assert!("forest".parse::<CteKind>().is_err());
    }
}
