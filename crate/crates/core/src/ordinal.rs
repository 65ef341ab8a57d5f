//! Ordinal rating through four ordered binary classifiers, classifier k
//! estimating Pr(y > k).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema, RatingClass};
use crate::error::{Error, Result};
use crate::learners::{train_gbt, train_logistic, BinaryScorer, GbtConfig, LogisticConfig};
use crate::metrics::mamae;

pub const N_CLASSIFIERS: usize = 4;
pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Gbt,
    Logistic,
}

/// Base learner and its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseLearner {
    Gbt(GbtConfig),
    Logistic(LogisticConfig),
}

impl BaseLearner {
    pub fn kind(&self) -> BaseKind {
        match self {
            BaseLearner::Gbt(_) => BaseKind::Gbt,
            BaseLearner::Logistic(_) => BaseKind::Logistic,
        }
    }
}

/// Index 1..=4 of a binary classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResponsibleIndex(u8);

impl ResponsibleIndex {
    pub fn new(k: usize) -> Result<Self> {
        if (1..=N_CLASSIFIERS).contains(&k) {
            Ok(Self(k as u8))
        } else {
            Err(Error::Precondition(format!("classifier index {k} outside 1..=4")))
        }
    }

    pub fn get(self) -> usize {
        usize::from(self.0)
    }

    /// Zero-based position in the classifier array.
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }
}

/// The classifier explaining why class `c` beats `c − 1`:
/// 1 for classes below 3, otherwise `c − 1`.
pub fn responsible_classifier(c: RatingClass) -> ResponsibleIndex {
    let k = if c.get() < 3 { 1 } else { c.get() - 1 };
    ResponsibleIndex(k)
}

/// Binary targets of classifier `k`: positive iff y > k.
pub fn expand_labels(labels: &[RatingClass], k: usize) -> Result<Vec<bool>> {
    ResponsibleIndex::new(k)?;
    Ok(labels.iter().map(|y| usize::from(y.get()) > k).collect())
}

/// Consistent labeling: start at one star and climb while the classifier for
/// the current class clears its threshold.
pub fn label_from_probabilities(
    probabilities: &[f64; N_CLASSIFIERS],
    thresholds: &[f64; N_CLASSIFIERS],
) -> RatingClass {
    let mut rating = 1usize;
    for k in 1..=N_CLASSIFIERS {
        if probabilities[k - 1] >= thresholds[k - 1] && rating == k {
            rating = k + 1;
        }
    }
    RatingClass::from_index(rating - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalModel {
    pub base_kind: BaseKind,
    pub classifiers: Vec<BinaryScorer>,
    pub thresholds: [f64; N_CLASSIFIERS],
    pub schema: FeatureSchema,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    schema: FeatureSchema,
    thresholds: Vec<f64>,
    classifiers: Vec<BinaryScorer>,
    base_kind: BaseKind,
}

impl OrdinalModel {
    pub fn new(
        base_kind: BaseKind,
        classifiers: Vec<BinaryScorer>,
        thresholds: [f64; N_CLASSIFIERS],
        schema: FeatureSchema,
    ) -> Result<Self> {
        let model = Self { base_kind, classifiers, thresholds, schema };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classifiers.len() != N_CLASSIFIERS {
            return Err(Error::InvalidModel(format!("expected 4 classifiers, got {}", self.classifiers.len())));
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::InvalidModel(format!("threshold {t} outside (0, 1)")));
        }
        for c in &self.classifiers {
            match (c, self.base_kind) {
                (BinaryScorer::Gbt(m), BaseKind::Gbt) => {
                    if m.n_features != self.schema.len() {
                        return Err(Error::InvalidModel("classifier and schema disagree on feature count".into()));
                    }
                    m.validate()?;
                }
                (BinaryScorer::Logistic(m), BaseKind::Logistic) => m.validate(self.schema.len())?,
                _ => return Err(Error::InvalidModel("classifier type does not match base_kind".into())),
            }
        }
        Ok(())
    }

    pub fn classifier(&self, k: ResponsibleIndex) -> &BinaryScorer {
        &self.classifiers[k.index()]
    }

    /// Pr(y > k | x) for k = 1..=4.
    pub fn probabilities(&self, x: &[f64]) -> Result<[f64; N_CLASSIFIERS]> {
        self.schema.validate_vector(x)?;
        Ok(self.probabilities_unchecked(x))
    }

    pub(crate) fn probabilities_unchecked(&self, x: &[f64]) -> [f64; N_CLASSIFIERS] {
        std::array::from_fn(|k| self.classifiers[k].probability(x))
    }

    pub fn margins(&self, x: &[f64]) -> Result<[f64; N_CLASSIFIERS]> {
        self.schema.validate_vector(x)?;
        Ok(std::array::from_fn(|k| self.classifiers[k].margin(x)))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_VERSION,
            schema: self.schema.clone(),
            thresholds: self.thresholds.to_vec(),
            classifiers: self.classifiers.clone(),
            base_kind: self.base_kind,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(json)?)
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        if file.version != MODEL_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        let thresholds: [f64; N_CLASSIFIERS] = file
            .thresholds
            .try_into()
            .map_err(|t: Vec<f64>| Error::InvalidModel(format!("expected 4 thresholds, got {}", t.len())))?;
        let n_features = file.schema.len();
        let classifiers = file
            .classifiers
            .into_iter()
            .map(|c| match c {
                BinaryScorer::Gbt(mut m) => {
                    m.n_features = n_features;
                    BinaryScorer::Gbt(m)
                }
                other => other,
            })
            .collect();
        Self::new(file.base_kind, classifiers, thresholds, file.schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_file(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(self.to_json()?.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}

/// Rating of `x` under the model's thresholds.
pub fn consistent_label(model: &OrdinalModel, x: &[f64]) -> Result<RatingClass> {
    Ok(label_from_probabilities(&model.probabilities(x)?, &model.thresholds))
}

/// Trains the four classifiers on the expanded label sets. A single-class
/// expansion yields a constant scorer.
pub fn train_ordinal(labeled: &Dataset, base: &BaseLearner) -> Result<OrdinalModel> {
    if labeled.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = labeled.labels()?;
    let rows = labeled.rows();
    let logistic = matches!(base, BaseLearner::Logistic(_));
    let classifiers = (1..=N_CLASSIFIERS)
        .into_par_iter()
        .map(|k| {
            let targets = expand_labels(labels, k)?;
            let n_pos = targets.iter().filter(|&&t| t).count();
            if n_pos == 0 || n_pos == targets.len() {
                log::warn!("classifier {k}: training labels are all {}; using a constant scorer", n_pos > 0);
                return Ok(BinaryScorer::constant(n_pos > 0, labeled.schema.len(), logistic));
            }
            Ok(match base {
                BaseLearner::Gbt(cfg) => BinaryScorer::Gbt(train_gbt(&labeled.schema, &rows, &targets, cfg)?),
                BaseLearner::Logistic(cfg) => {
                    BinaryScorer::Logistic(train_logistic(&labeled.schema, &rows, &targets, cfg)?)
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    OrdinalModel::new(base.kind(), classifiers, [DEFAULT_THRESHOLD; N_CLASSIFIERS], labeled.schema.clone())
}

/// Threshold candidates 0.05, 0.10, …, 0.95.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (1..20).map(|i| f64::from(i) / 20.0)
}

/// Coordinate search over the grid, k = 1 → 4, each θ_k minimizing
/// validation MAMAE with the others fixed. Ties prefer θ closest to 0.5,
/// then the smaller value.
pub fn tune_thresholds(model: &OrdinalModel, validation: &Dataset) -> Result<OrdinalModel> {
    if validation.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let truth = validation.labels()?;
    let probabilities =
        validation.records.iter().map(|r| model.probabilities(&r.features)).collect::<Result<Vec<_>>>()?;
    let mut thresholds = model.thresholds;
    for k in 0..N_CLASSIFIERS {
        let mut best: Option<(f64, f64)> = None;
        for candidate in threshold_grid() {
            thresholds[k] = candidate;
            let preds: Vec<RatingClass> =
                probabilities.iter().map(|p| label_from_probabilities(p, &thresholds)).collect();
            let score = mamae(&preds, truth)?;
            let better = match best {
                None => true,
                Some((bt, bs)) => {
                    score < bs
                        || (score == bs
                            && ((candidate - 0.5).abs() < (bt - 0.5).abs()
                                || ((candidate - 0.5).abs() == (bt - 0.5).abs() && candidate < bt)))
                }
            };
            if better {
                best = Some((candidate, score));
            }
        }
        thresholds[k] = best.expect("grid is nonempty").0;
    }
    let mut tuned = model.clone();
    tuned.thresholds = thresholds;
    Ok(tuned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureKind, PropertyKind, PropertyRecord, SchemaEntry};
    use crate::learners::BoostedClassifier;
    use proptest::prelude::*;

    fn rc(v: i64) -> RatingClass {
        RatingClass::new(v).unwrap()
    }

    #[test]
    fn expansion() {
        let exp = |y: i64| -> Vec<bool> { (1..=4).map(|k| expand_labels(&[rc(y)], k).unwrap()[0]).collect() };
        assert_eq!(exp(3), vec![true, true, false, false]);
        assert_eq!(exp(1), vec![false; 4]);
        assert_eq!(exp(5), vec![true; 4]);
        assert!(expand_labels(&[rc(2)], 0).is_err());
        assert!(expand_labels(&[rc(2)], 5).is_err());
    }

    #[test]
    fn consistent_labeling_traces() {
        let half = [0.5; 4];
        assert_eq!(label_from_probabilities(&[0.9, 0.8, 0.2, 0.1], &half).get(), 3);
        assert_eq!(label_from_probabilities(&[0.9, 0.3, 0.9, 0.9], &half).get(), 2);
        assert_eq!(label_from_probabilities(&[0.6, 0.6, 0.6, 0.6], &half).get(), 5);
        assert_eq!(label_from_probabilities(&[0.5, 0.1, 0.1, 0.1], &half).get(), 2);
        assert_eq!(label_from_probabilities(&[0.49, 0.9, 0.9, 0.9], &half).get(), 1);
    }

    #[test]
    fn responsible_table() {
        let r: Vec<usize> = RatingClass::all().map(|c| responsible_classifier(c).get()).collect();
        assert_eq!(r, vec![1, 1, 2, 3, 4]);
    }

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            SchemaEntry { name: "pool".into(), kind: FeatureKind::Binary, monotone: 1, suggestible: true },
            SchemaEntry { name: "size".into(), kind: FeatureKind::Numeric, monotone: 1, suggestible: false },
        ])
        .unwrap()
    }

    fn dataset(labels: &[i64]) -> Dataset {
        let records = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| PropertyRecord {
                id: format!("v{i}"),
                kind: PropertyKind::VacationRental,
                official_stars: None,
                features: vec![f64::from(y >= 4), 10.0 * y as f64 + (i % 3) as f64],
            })
            .collect();
        Dataset::with_labels(schema(), records, labels.iter().map(|&y| rc(y)).collect()).unwrap()
    }

    #[test]
    fn all_same_class_gives_constant_composition() {
        let ds = dataset(&[3; 12]);
        for base in [BaseLearner::Gbt(GbtConfig::default()), BaseLearner::Logistic(LogisticConfig::default())] {
            let m = train_ordinal(&ds, &base).unwrap();
            for r in &ds.records {
                assert_eq!(m.probabilities(&r.features).unwrap(), [1.0, 1.0, 0.0, 0.0]);
                assert_eq!(consistent_label(&m, &r.features).unwrap().get(), 3);
            }
        }
    }

    #[test]
    fn training_is_deterministic_and_round_trips() {
        let labels: Vec<i64> = (0..60).map(|i| 1 + (i * 7 % 5)).collect();
        let ds = dataset(&labels);
        let cfg = GbtConfig { n_rounds: 10, ..GbtConfig::default() };
        let a = train_ordinal(&ds, &BaseLearner::Gbt(cfg.clone())).unwrap();
        let b = train_ordinal(&ds, &BaseLearner::Gbt(cfg)).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let back = OrdinalModel::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);

        let log = train_ordinal(&ds, &BaseLearner::Logistic(LogisticConfig::default())).unwrap();
        let back = OrdinalModel::from_json(&log.to_json().unwrap()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn model_loading_validates() {
        let ds = dataset(&[1, 2, 3, 4, 5, 3]);
        let m = train_ordinal(&ds, &BaseLearner::Gbt(GbtConfig { n_rounds: 2, ..GbtConfig::default() })).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        v["version"] = 2.into();
        assert!(OrdinalModel::from_json(&v.to_string()).is_err());
        v["version"] = 1.into();
        v["thresholds"] = serde_json::json!([0.5, 0.5, 1.0, 0.5]);
        assert!(OrdinalModel::from_json(&v.to_string()).is_err());
        v["thresholds"] = serde_json::json!([0.5, 0.5, 0.5]);
        assert!(OrdinalModel::from_json(&v.to_string()).is_err());
        v["thresholds"] = serde_json::json!([0.5, 0.5, 0.5, 0.5]);
        v["base_kind"] = "logistic".into();
        assert!(OrdinalModel::from_json(&v.to_string()).is_err());
        v["base_kind"] = "gbt".into();
        OrdinalModel::from_json(&v.to_string()).unwrap();
    }

    fn constant_model(p: f64) -> OrdinalModel {
        let margin = (p / (1.0 - p)).ln();
        let c = BinaryScorer::Gbt(BoostedClassifier { base_margin: margin, trees: vec![], n_features: 2 });
        OrdinalModel::new(BaseKind::Gbt, vec![c; 4], [0.5; 4], schema()).unwrap()
    }

    #[test]
    fn tuning_on_class_five_goes_permissive() {
        let model = constant_model(0.06);
        let tuned = tune_thresholds(&model, &dataset(&[5, 5, 5, 5])).unwrap();
        assert_eq!(tuned.thresholds, [0.05; 4]);
        let again = tune_thresholds(&model, &dataset(&[5, 5, 5, 5])).unwrap();
        assert_eq!(again.thresholds, tuned.thresholds);
        assert!(tune_thresholds(&model, &dataset(&[])).is_err());
    }

    #[test]
    fn tuning_ties_stay_near_one_half() {
        // Every threshold below 0.9 yields class 5; 0.5 is the closest tie.
        let tuned = tune_thresholds(&constant_model(0.9), &dataset(&[5, 5])).unwrap();
        assert_eq!(tuned.thresholds, [0.5; 4]);
    }

    /// Direct form of the rule: one plus the longest prefix of classifiers
    /// clearing their thresholds.
    fn prefix_rule(p: &[f64; 4], t: &[f64; 4]) -> u8 {
        let mut m = 0;
        while m < 4 && p[m] >= t[m] {
            m += 1;
        }
        1 + m as u8
    }

    proptest! {
        #[test]
        fn algorithm_matches_prefix_rule(
            p in prop::array::uniform4(0.0f64..1.0),
            t in prop::array::uniform4(0.01f64..0.99),
        ) {
            let y = label_from_probabilities(&p, &t);
            prop_assert_eq!(y.get(), prefix_rule(&p, &t));
            for k in 0..usize::from(y.get()) - 1 {
                prop_assert!(p[k] >= t[k]);
            }
        }

        #[test]
        fn expansions_are_nested(labels in prop::collection::vec(1i64..=5, 1..50)) {
            let labels: Vec<RatingClass> = labels.into_iter().map(rc).collect();
            for k in 1..4 {
                let lower = expand_labels(&labels, k).unwrap();
                let upper = expand_labels(&labels, k + 1).unwrap();
                prop_assert!(lower.iter().zip(&upper).all(|(l, u)| !u || *l));
            }
        }
    }
}
