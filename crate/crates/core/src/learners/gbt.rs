//! Newton boosting of regression trees on logistic loss with per-feature
//! monotone constraints enforced by bound propagation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use super::tree::TreeNode;
use crate::data::{FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub l2_lambda: f64,
    pub n_bins: usize,
    pub seed: u64,
    /// Honor the schema's monotone flags. Disabled only for comparisons.
    pub monotone: bool,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 4,
            min_child_weight: 1.0,
            l2_lambda: 1.0,
            n_bins: 256,
            seed: 0,
            monotone: true,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("min_child_weight", self.min_child_weight),
            ("l2_lambda", self.l2_lambda),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be positive".into()));
        }
        if self.n_bins < 2 || self.n_bins > usize::from(u16::MAX) {
            return Err(Error::InvalidConfig(format!("n_bins must lie in [2, 65535], got {}", self.n_bins)));
        }
        Ok(())
    }
}

/// Tree ensemble: margin(x) = base_margin + Σ tree(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostedClassifier {
    pub base_margin: f64,
    pub trees: Vec<TreeNode>,
    #[serde(skip)]
    pub n_features: usize,
}

impl BoostedClassifier {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.base_margin.is_finite() {
            return Err(Error::InvalidModel("non-finite base margin".into()));
        }
        self.trees.iter().try_for_each(|t| t.validate(self.n_features))
    }
}

/// Margin with input validation.
pub fn predict_margin(model: &BoostedClassifier, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features {
        return Err(Error::DimensionMismatch { expected: model.n_features, got: x.len() });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(model.margin(x))
}

/// Split candidates of one feature; `x < thresholds[b]` iff bin(x) ≤ b.
struct FeatureBins {
    thresholds: Vec<f64>,
    bins: Vec<u16>,
}

fn bin_feature(kind: FeatureKind, values: &[f64], n_bins: usize) -> FeatureBins {
    let thresholds = match kind {
        FeatureKind::Binary => vec![0.5],
        FeatureKind::Numeric => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mut unique = sorted.clone();
            unique.dedup();
            if unique.len() <= n_bins {
                unique.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            } else {
                let n = sorted.len();
                let mut cuts: Vec<f64> = (1..n_bins)
                    .map(|b| b * n / n_bins)
                    .filter(|&i| i > 0 && sorted[i - 1] < sorted[i])
                    .map(|i| 0.5 * (sorted[i - 1] + sorted[i]))
                    .collect();
                cuts.dedup();
                cuts
            }
        }
    };
    let bins = values.iter().map(|&v| thresholds.partition_point(|&t| t <= v) as u16).collect();
    FeatureBins { thresholds, bins }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    bin: usize,
    gain: f64,
    left_value: f64,
    right_value: f64,
}

struct Grower<'a> {
    cfg: &'a GbtConfig,
    columns: &'a [FeatureBins],
    monotone: &'a [bool],
    grad: &'a [f64],
    hess: &'a [f64],
}

impl Grower<'_> {
    fn newton_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.cfg.l2_lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.l2_lambda)
    }

    fn best_split_for(&self, feature: usize, rows: &[usize], g: f64, h: f64, lo: f64, hi: f64) -> Option<Candidate> {
        let column = &self.columns[feature];
        let n_bins = column.thresholds.len() + 1;
        let mut hist = vec![(0.0f64, 0.0f64, 0usize); n_bins];
        for &r in rows {
            let slot = &mut hist[usize::from(column.bins[r])];
            slot.0 += self.grad[r];
            slot.1 += self.hess[r];
            slot.2 += 1;
        }
        let parent = self.score(g, h);
        let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
        let mut best: Option<Candidate> = None;
        for (bin, &(bg, bh, bn)) in hist.iter().enumerate().take(n_bins - 1) {
            gl += bg;
            hl += bh;
            nl += bn;
            let (gr, hr, nr) = (g - gl, h - hl, rows.len() - nl);
            if nl == 0 || nr == 0 || hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
                continue;
            }
            let left_value = self.newton_value(gl, hl).clamp(lo, hi);
            let right_value = self.newton_value(gr, hr).clamp(lo, hi);
            if self.monotone[feature] && left_value > right_value {
                continue;
            }
            let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent);
            if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                best = Some(Candidate { feature, bin, gain, left_value, right_value });
            }
        }
        best
    }

    fn grow(&self, rows: Vec<usize>, depth: usize, lo: f64, hi: f64) -> TreeNode {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let cover = rows.len() as f64;
        let leaf = || TreeNode::Leaf { value: self.cfg.learning_rate * self.newton_value(g, h).clamp(lo, hi), cover };
        if depth >= self.cfg.max_depth || rows.len() < 2 {
            return leaf();
        }
        // Per-feature search is independent; the reduction below runs in
        // feature order so results do not depend on the thread count.
        let candidates: Vec<Option<Candidate>> =
            (0..self.columns.len()).into_par_iter().map(|f| self.best_split_for(f, &rows, g, h, lo, hi)).collect();
        let mut best: Option<Candidate> = None;
        for c in candidates.into_iter().flatten() {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        let Some(split) = best else { return leaf() };

        let bins = &self.columns[split.feature].bins;
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| usize::from(bins[r]) <= split.bin);
        let (left_bounds, right_bounds) = if self.monotone[split.feature] {
            let mid = 0.5 * (split.left_value + split.right_value);
            ((lo, mid), (mid, hi))
        } else {
            ((lo, hi), (lo, hi))
        };
        let left = self.grow(left_rows, depth + 1, left_bounds.0, left_bounds.1);
        let right = self.grow(right_rows, depth + 1, right_bounds.0, right_bounds.1);
        TreeNode::Split {
            feature: split.feature,
            threshold: self.columns[split.feature].thresholds[split.bin],
            cover: left.cover() + right.cover(),
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Trains a boosted binary classifier on rows aligned to `schema`.
pub fn train_gbt(
    schema: &FeatureSchema,
    rows: &[&[f64]],
    labels: &[bool],
    cfg: &GbtConfig,
) -> Result<BoostedClassifier> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rows.len() != labels.len() {
        return Err(Error::Precondition(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    for x in rows {
        schema.validate_vector(x)?;
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::SingleClass);
    }

    let n = rows.len();
    let columns: Vec<FeatureBins> = schema
        .features()
        .par_iter()
        .map(|f| {
            let values: Vec<f64> = rows.iter().map(|x| x[f.id]).collect();
            bin_feature(f.kind, &values, cfg.n_bins)
        })
        .collect();
    let monotone: Vec<bool> = schema.features().iter().map(|f| cfg.monotone && f.monotone).collect();

    let base_rate = n_pos as f64 / n as f64;
    let base_margin = (base_rate / (1.0 - base_rate)).ln();
    let targets: Vec<f64> = labels.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
    let mut margins = vec![base_margin; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_rounds);

    for _ in 0..cfg.n_rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - targets[i];
            hess[i] = p * (1.0 - p);
        }
        let grower = Grower { cfg, columns: &columns, monotone: &monotone, grad: &grad, hess: &hess };
        let tree = grower.grow((0..n).collect(), 0, f64::NEG_INFINITY, f64::INFINITY);
        for (m, x) in margins.iter_mut().zip(rows) {
            *m += tree.predict(x);
        }
        trees.push(tree);
    }
    Ok(BoostedClassifier { base_margin, trees, n_features: schema.len() })
}
