use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A regression tree over margins. `cover` counts the training rows that
/// reached the node; tree attribution uses it to weight unknown branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, cover: f64, left: Box<TreeNode>, right: Box<TreeNode> },
    Leaf { value: f64, cover: f64 },
}

impl TreeNode {
    pub fn cover(&self) -> f64 {
        match self {
            TreeNode::Split { cover, .. } | TreeNode::Leaf { cover, .. } => *cover,
        }
    }

    /// Leaf value reached by `x`; rows go left when `x[feature] < threshold`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    node = if x[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    /// Cover-weighted mean leaf value.
    pub fn expected_value(&self) -> f64 {
        match self {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Split { cover, left, right, .. } => {
                (left.cover() * left.expected_value() + right.cover() * right.expected_value()) / cover
            }
        }
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Calls `f` on every split node, parents first.
    pub fn visit_splits(&self, f: &mut impl FnMut(usize, f64)) {
        if let TreeNode::Split { feature, threshold, left, right, .. } = self {
            f(*feature, *threshold);
            left.visit_splits(f);
            right.visit_splits(f);
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        match self {
            TreeNode::Leaf { value, cover } => {
                if !value.is_finite() {
                    return bad("non-finite leaf value".into());
                }
                if cover.is_nan() || *cover <= 0.0 {
                    return bad(format!("leaf cover must be positive, got {cover}"));
                }
            }
            TreeNode::Split { feature, threshold, cover, left, right } => {
                if *feature >= n_features {
                    return bad(format!("split on feature {feature}, schema has {n_features}"));
                }
                if !threshold.is_finite() {
                    return bad("non-finite split threshold".into());
                }
                if cover.is_nan() || *cover <= 0.0 || *cover != left.cover() + right.cover() {
                    return bad(format!(
                        "split cover {cover} does not equal child covers {} + {}",
                        left.cover(),
                        right.cover()
                    ));
                }
                left.validate(n_features)?;
                right.validate(n_features)?;
            }
        }
        Ok(())
    }
}
