use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::data::FeatureSchema;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self { l2: 1e-4, epochs: 400, learning_rate: 0.5, seed: 0 }
    }
}

/// L2-regularized logistic regression on standardized features:
/// margin(x) = intercept + Σ w_j (x_j − mean_j) / scale_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticModel {
    #[serde(rename = "base_margin")]
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LogisticModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.intercept + self.contributions(x).iter().sum::<f64>()
    }

    /// Per-feature terms w_j · z_j of the margin.
    pub fn contributions(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.weights)
            .zip(self.mean.iter().zip(&self.scale))
            .map(|((v, w), (m, s))| w * (v - m) / s)
            .collect()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.weights.len() != n_features || self.mean.len() != n_features || self.scale.len() != n_features {
            return Err(Error::InvalidModel(format!("logistic model does not have {n_features} features")));
        }
        let finite = std::iter::once(&self.intercept).chain(&self.weights).chain(&self.mean).all(|v| v.is_finite());
        if !finite || self.scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidModel("logistic parameters must be finite with positive scales".into()));
        }
        Ok(())
    }
}

/// Full-batch gradient descent on the mean log loss.
pub fn train_logistic(
    schema: &FeatureSchema,
    rows: &[&[f64]],
    labels: &[bool],
    cfg: &LogisticConfig,
) -> Result<LogisticModel> {
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
    let d = schema.len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for x in rows {
        for (m, v) in mean.iter_mut().zip(*x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut scale = vec![0.0; d];
    for x in rows {
        for ((s, v), m) in scale.iter_mut().zip(*x).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut scale {
        *s = (*s / n).sqrt();
        if s.is_nan() || *s <= 1e-12 {
            *s = 1.0;
        }
    }
    let z: Vec<Vec<f64>> =
        rows.iter().map(|x| x.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect()).collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad_w = vec![0.0; d];
    for _ in 0..cfg.epochs {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (zi, yi) in z.iter().zip(&y) {
            let m = b + zi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let r = sigmoid(m) - yi;
            grad_b += r;
            for (g, a) in grad_w.iter_mut().zip(zi) {
                *g += r * a;
            }
        }
        b -= cfg.learning_rate * grad_b / n;
        for (wj, g) in w.iter_mut().zip(&grad_w) {
            *wj -= cfg.learning_rate * (g / n + cfg.l2 * *wj);
        }
    }
    Ok(LogisticModel { intercept: b, weights: w, mean, scale })
}
