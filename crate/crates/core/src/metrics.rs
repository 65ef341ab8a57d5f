//! Rating quality metrics and the mode baseline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{RatingClass, N_CLASSES};
use crate::error::{Error, Result};

fn check(preds: &[RatingClass], truth: &[RatingClass]) -> Result<()> {
    if preds.len() != truth.len() {
        return Err(Error::Precondition(format!("{} predictions for {} truth labels", preds.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// confusion[true][predicted]
fn confusion(preds: &[RatingClass], truth: &[RatingClass]) -> [[u64; N_CLASSES]; N_CLASSES] {
    let mut m = [[0u64; N_CLASSES]; N_CLASSES];
    for (p, t) in preds.iter().zip(truth) {
        m[t.index()][p.index()] += 1;
    }
    m
}

fn per_class_mae(preds: &[RatingClass], truth: &[RatingClass]) -> [Option<f64>; N_CLASSES] {
    let mut sum = [0u64; N_CLASSES];
    let mut count = [0u64; N_CLASSES];
    for (p, t) in preds.iter().zip(truth) {
        sum[t.index()] += u64::from(p.get().abs_diff(t.get()));
        count[t.index()] += 1;
    }
    std::array::from_fn(|c| (count[c] > 0).then(|| sum[c] as f64 / count[c] as f64))
}

/// Macro-averaged mean absolute error: per-class MAE averaged over the
/// classes present in `truth`.
pub fn mamae(preds: &[RatingClass], truth: &[RatingClass]) -> Result<f64> {
    check(preds, truth)?;
    let present: Vec<f64> = per_class_mae(preds, truth).into_iter().flatten().collect();
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

pub fn accuracy(preds: &[RatingClass], truth: &[RatingClass]) -> Result<f64> {
    check(preds, truth)?;
    let hits = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Support-weighted F1 over the classes present in `truth`.
#[allow(clippy::needless_range_loop)]
pub fn weighted_f1(preds: &[RatingClass], truth: &[RatingClass]) -> Result<f64> {
    check(preds, truth)?;
    let m = confusion(preds, truth);
    let n = truth.len() as f64;
    let mut total = 0.0;
    for c in 0..N_CLASSES {
        let support: u64 = m[c].iter().sum();
        if support == 0 {
            continue;
        }
        let predicted: u64 = (0..N_CLASSES).map(|t| m[t][c]).sum();
        let tp = m[c][c] as f64;
        let f1 = if tp == 0.0 {
            0.0
        } else {
            let precision = tp / predicted as f64;
            let recall = tp / support as f64;
            2.0 * precision * recall / (precision + recall)
        };
        total += support as f64 / n * f1;
    }
    Ok(total)
}

/// Most frequent class, ties toward the lower class.
pub fn mode_classifier(train_labels: &[RatingClass]) -> Result<RatingClass> {
    if train_labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = [0usize; N_CLASSES];
    for l in train_labels {
        counts[l.index()] += 1;
    }
    let best = (0..N_CLASSES).fold(0, |best, c| if counts[c] > counts[best] { c } else { best });
    Ok(RatingClass::from_index(best))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mamae: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    /// `None` for classes absent from the truth labels.
    pub per_class_mae: [Option<f64>; N_CLASSES],
    /// confusion[true class − 1][predicted class − 1]
    pub confusion: [[u64; N_CLASSES]; N_CLASSES],
    pub n: usize,
}

impl EvalReport {
    pub fn compute(preds: &[RatingClass], truth: &[RatingClass]) -> Result<Self> {
        Ok(Self {
            mamae: mamae(preds, truth)?,
            weighted_f1: weighted_f1(preds, truth)?,
            accuracy: accuracy(preds, truth)?,
            per_class_mae: per_class_mae(preds, truth),
            confusion: confusion(preds, truth),
            n: truth.len(),
        })
    }

    /// Fixed-format text table.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n            {:>8}", self.n);
        let _ = writeln!(s, "MAMAE        {:>8.4}", self.mamae);
        let _ = writeln!(s, "weighted F1  {:>8.4}", self.weighted_f1);
        let _ = writeln!(s, "accuracy     {:>8.4}", self.accuracy);
        let _ = writeln!(s, "class  support      MAE   pred:  1     2     3     4     5");
        for c in 0..N_CLASSES {
            let support: u64 = self.confusion[c].iter().sum();
            let mae = self.per_class_mae[c].map_or_else(|| "  absent".to_string(), |v| format!("{v:>8.4}"));
            let _ = write!(s, "{:>5}  {:>7}  {}      ", c + 1, support, mae);
            for v in &self.confusion[c] {
                let _ = write!(s, "{v:>6}");
            }
            s.push('\n');
        }
        s
    }
}
