//! Binary probabilistic scorers used as the ordinal bases.

mod gbt;
mod logistic;
mod tree;

pub use gbt::{predict_margin, train_gbt, BoostedClassifier, GbtConfig};
pub use logistic::{train_logistic, LogisticConfig, LogisticModel};
pub use tree::TreeNode;

use serde::{Deserialize, Serialize};

/// Margin of a constant scorer. The logistic link evaluates to exactly 0.0 or
/// 1.0 in f64 at this magnitude.
pub const SATURATED_MARGIN: f64 = 710.0;

pub fn sigmoid(margin: f64) -> f64 {
    1.0 / (1.0 + (-margin).exp())
}

/// A fitted binary classifier: margin in log-odds, probability via the
/// logistic link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinaryScorer {
    Gbt(BoostedClassifier),
    Logistic(LogisticModel),
}

impl BinaryScorer {
    /// Margin without input validation.
    pub fn margin(&self, x: &[f64]) -> f64 {
        match self {
            BinaryScorer::Gbt(m) => m.margin(x),
            BinaryScorer::Logistic(m) => m.margin(x),
        }
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    pub fn n_features(&self) -> usize {
        match self {
            BinaryScorer::Gbt(m) => m.n_features,
            BinaryScorer::Logistic(m) => m.weights.len(),
        }
    }

    /// Scorer that always answers `positive`, used for degenerate label
    /// expansions.
    pub fn constant(positive: bool, n_features: usize, logistic: bool) -> Self {
        let margin = if positive { SATURATED_MARGIN } else { -SATURATED_MARGIN };
        if logistic {
            BinaryScorer::Logistic(LogisticModel {
                intercept: margin,
                weights: vec![0.0; n_features],
                mean: vec![0.0; n_features],
                scale: vec![1.0; n_features],
            })
        } else {
            BinaryScorer::Gbt(BoostedClassifier { base_margin: margin, trees: Vec::new(), n_features })
        }
    }
}
