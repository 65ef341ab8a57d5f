//! Local explanations of a rating through the responsible classifier.
//!
//! Tree ensembles use path-dependent TreeSHAP, conditioning on unknown
//! features through node cover. Attributions live in margin (log-odds)
//! space so that `base_value + Σ φ` reproduces the classifier margin.

use serde::{Deserialize, Serialize};

use crate::data::RatingClass;
use crate::error::{Error, Result};
use crate::learners::{BinaryScorer, BoostedClassifier, TreeNode};
use crate::ordinal::{consistent_label, responsible_classifier, OrdinalModel, ResponsibleIndex};

/// Feature cap for the exponential reference computation.
pub const BRUTE_FORCE_MAX_FEATURES: usize = 15;

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement { feature, zero_fraction, one_fraction, pweight: if depth == 0 { 1.0 } else { 0.0 } });
    let scale = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) as f64 / scale;
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) as f64 / scale;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let scale = (depth + 1) as f64;
    let mut next_one_portion = path[depth].pweight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one_portion * scale / ((i + 1) as f64 * one);
            next_one_portion = tmp - path[i].pweight * zero * (depth - i) as f64 / scale;
        } else {
            path[i].pweight = path[i].pweight * scale / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let scale = (depth + 1) as f64;
    let mut next_one_portion = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next_one_portion * scale / ((i + 1) as f64 * one);
            total += tmp;
            next_one_portion = path[i].pweight - tmp * zero * (depth - i) as f64 / scale;
        } else if zero != 0.0 {
            total += path[i].pweight / zero / ((depth - i) as f64 / scale);
        }
    }
    total
}

fn recurse(
    node: &TreeNode,
    x: &[f64],
    phi: &mut [f64],
    mut path: Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    extend_path(&mut path, zero_fraction, one_fraction, feature);
    match node {
        TreeNode::Leaf { value, .. } => {
            for i in 1..path.len() {
                let w = unwound_path_sum(&path, i);
                let el = path[i];
                phi[el.feature.expect("non-root path element")] += w * (el.one_fraction - el.zero_fraction) * value;
            }
        }
        TreeNode::Split { feature: f, threshold, cover, left, right } => {
            let (hot, cold) = if x[*f] < *threshold { (left, right) } else { (right, left) };
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(*f)) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                unwind_path(&mut path, k);
            }
            recurse(hot, x, phi, path.clone(), hot.cover() / cover * incoming_zero, incoming_one, Some(*f));
            recurse(cold, x, phi, path, cold.cover() / cover * incoming_zero, 0.0, Some(*f));
        }
    }
}

fn check_cover(node: &TreeNode) -> Result<()> {
    if node.cover().is_nan() || node.cover() <= 0.0 {
        return Err(Error::InvalidModel("tree node with zero cover".into()));
    }
    if let TreeNode::Split { left, right, .. } = node {
        check_cover(left)?;
        check_cover(right)?;
    }
    Ok(())
}

/// Path-dependent TreeSHAP. Returns the expected margin and one attribution
/// per feature.
pub fn tree_shap(model: &BoostedClassifier, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    if x.len() != model.n_features {
        return Err(Error::DimensionMismatch { expected: model.n_features, got: x.len() });
    }
    let mut phi = vec![0.0; model.n_features];
    let mut base_value = model.base_margin;
    for tree in &model.trees {
        check_cover(tree)?;
        base_value += tree.expected_value();
        recurse(tree, x, &mut phi, Vec::with_capacity(tree.depth() + 2), 1.0, 1.0, None);
    }
    Ok((base_value, phi))
}

/// E[tree(x) | x_S]: follow `x` on features in `mask`, average the rest by cover.
fn conditional_expectation(node: &TreeNode, x: &[f64], mask: u32) -> f64 {
    match node {
        TreeNode::Leaf { value, .. } => *value,
        TreeNode::Split { feature, threshold, cover, left, right } => {
            if mask & (1 << feature) != 0 {
                let next = if x[*feature] < *threshold { left } else { right };
                conditional_expectation(next, x, mask)
            } else {
                (left.cover() * conditional_expectation(left, x, mask)
                    + right.cover() * conditional_expectation(right, x, mask))
                    / cover
            }
        }
    }
}

/// Exact Shapley values by subset enumeration over every feature. Reference
/// for [`tree_shap`]; exponential in the feature count.
pub fn brute_force_shap(model: &BoostedClassifier, x: &[f64]) -> Result<Vec<f64>> {
    let n = model.n_features;
    if n > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::Precondition(format!(
            "brute-force Shapley values support at most {BRUTE_FORCE_MAX_FEATURES} features, got {n}"
        )));
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let mut factorial = vec![1.0f64; n + 1];
    for i in 1..=n {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let n_subsets = 1u32 << n;
    let mut phi = vec![0.0; n];
    for tree in &model.trees {
        let values: Vec<f64> = (0..n_subsets).map(|mask| conditional_expectation(tree, x, mask)).collect();
        for (j, phi_j) in phi.iter_mut().enumerate() {
            let bit = 1u32 << j;
            for mask in (0..n_subsets).filter(|m| m & bit == 0) {
                let size = mask.count_ones() as usize;
                let weight = factorial[size] * factorial[n - size - 1] / factorial[n];
                *phi_j += weight * (values[(mask | bit) as usize] - values[mask as usize]);
            }
        }
    }
    Ok(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMethod {
    TreeShap,
    /// Standardized coefficient × standardized value of a logistic base.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature_id: usize,
    pub feature: String,
    pub shap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub rating: RatingClass,
    pub responsible: ResponsibleIndex,
    pub base_value: f64,
    /// Every feature: positives by value descending, then negatives by
    /// magnitude descending, then zeros; ties by feature id.
    pub attributions: Vec<Attribution>,
    /// Probability of the responsible classifier at `x`.
    pub probability: f64,
    pub method: AttributionMethod,
}

/// Presentation default: at most this many positive and negative items.
pub const TOP_POSITIVE: usize = 5;
pub const TOP_NEGATIVE: usize = 3;

impl Explanation {
    pub fn positives(&self) -> impl Iterator<Item = &Attribution> {
        self.attributions.iter().filter(|a| a.shap > 0.0)
    }

    pub fn negatives(&self) -> impl Iterator<Item = &Attribution> {
        self.attributions.iter().filter(|a| a.shap < 0.0)
    }

    /// Nonzero attributions, truncated to the top positives and negatives.
    pub fn presented(&self, top_positive: usize, top_negative: usize) -> Vec<&Attribution> {
        self.positives().take(top_positive).chain(self.negatives().take(top_negative)).collect()
    }

    pub fn margin(&self) -> f64 {
        self.base_value + self.attributions.iter().map(|a| a.shap).sum::<f64>()
    }
}

fn rank(mut items: Vec<Attribution>) -> Vec<Attribution> {
    let group = |v: f64| {
        if v > 0.0 {
            0
        } else if v < 0.0 {
            1
        } else {
            2
        }
    };
    items.sort_by(|a, b| {
        group(a.shap)
            .cmp(&group(b.shap))
            .then(b.shap.abs().total_cmp(&a.shap.abs()))
            .then(a.feature_id.cmp(&b.feature_id))
    });
    items
}

/// Explains why `x` is rated `rating` rather than `rating − 1`, using the
/// responsible classifier.
pub fn compute_explanation(model: &OrdinalModel, x: &[f64], rating: RatingClass) -> Result<Explanation> {
    let predicted = consistent_label(model, x)?;
    if predicted != rating {
        return Err(Error::Precondition(format!("rating {rating} does not match the model's rating {predicted}")));
    }
    let responsible = responsible_classifier(rating);
    let classifier = model.classifier(responsible);
    let (base_value, phi, method) = match classifier {
        BinaryScorer::Gbt(m) => {
            let (base, phi) = tree_shap(m, x)?;
            (base, phi, AttributionMethod::TreeShap)
        }
        BinaryScorer::Logistic(m) => (m.intercept, m.contributions(x), AttributionMethod::Linear),
    };
    let attributions = phi
        .into_iter()
        .enumerate()
        .map(|(id, shap)| Attribution { feature_id: id, feature: model.schema.name(id).to_string(), shap })
        .collect();
    Ok(Explanation {
        rating,
        responsible,
        base_value,
        attributions: rank(attributions),
        probability: classifier.probability(x),
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureKind, FeatureSchema, SchemaEntry};
    use crate::ordinal::BaseKind;

    fn leaf(value: f64, cover: f64) -> Box<TreeNode> {
        Box::new(TreeNode::Leaf { value, cover })
    }

    fn stump(feature: usize, a: f64, ca: f64, b: f64, cb: f64) -> TreeNode {
        TreeNode::Split { feature, threshold: 0.5, cover: ca + cb, left: leaf(a, ca), right: leaf(b, cb) }
    }

    #[test]
    fn empty_ensemble_has_no_attribution() {
        let m = BoostedClassifier { base_margin: 0.7, trees: vec![], n_features: 3 };
        let (base, phi) = tree_shap(&m, &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(base, 0.7);
        assert_eq!(phi, vec![0.0; 3]);
    }

    #[test]
    fn single_split_closed_form() {
        let (a, ca, b, cb) = (-0.4, 30.0, 0.9, 10.0);
        let m = BoostedClassifier { base_margin: 0.0, trees: vec![stump(1, a, ca, b, cb)], n_features: 3 };
        let x = [0.0, 1.0, 1.0];
        let expected = b - (ca * a + cb * b) / (ca + cb);
        let (base, phi) = tree_shap(&m, &x).unwrap();
        assert!((phi[1] - expected).abs() < 1e-12);
        assert_eq!(phi[0], 0.0);
        assert_eq!(phi[2], 0.0);
        assert!((base + phi.iter().sum::<f64>() - m.margin(&x)).abs() < 1e-12);
        let brute = brute_force_shap(&m, &x).unwrap();
        assert!((brute[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn repeated_feature_on_path() {
        let tree = TreeNode::Split {
            feature: 0,
            threshold: 0.5,
            cover: 10.0,
            left: Box::new(stump(1, 1.0, 2.0, 3.0, 4.0)),
            right: Box::new(TreeNode::Split {
                feature: 0,
                threshold: 1.5,
                cover: 4.0,
                left: Box::new(stump(1, -2.0, 1.0, 5.0, 2.0)),
                right: leaf(0.5, 1.0),
            }),
        };
        let m = BoostedClassifier { base_margin: 0.0, trees: vec![tree], n_features: 2 };
        for x in [[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [1.0, 0.0]] {
            let (_, phi) = tree_shap(&m, &x).unwrap();
            let brute = brute_force_shap(&m, &x).unwrap();
            for j in 0..2 {
                assert!((phi[j] - brute[j]).abs() < 1e-12, "{x:?}: {phi:?} vs {brute:?}");
            }
        }
    }

    #[test]
    fn duplicate_tree_doubles_attributions() {
        let t = stump(0, -1.0, 3.0, 2.0, 5.0);
        let one = BoostedClassifier { base_margin: 0.0, trees: vec![t.clone()], n_features: 2 };
        let two = BoostedClassifier { base_margin: 0.0, trees: vec![t.clone(), t], n_features: 2 };
        let x = [1.0, 0.0];
        let a = brute_force_shap(&one, &x).unwrap();
        let b = brute_force_shap(&two, &x).unwrap();
        assert_eq!(b[0], 2.0 * a[0]);
        let (_, a) = tree_shap(&one, &x).unwrap();
        let (_, b) = tree_shap(&two, &x).unwrap();
        assert_eq!(b[0], 2.0 * a[0]);
    }

    #[test]
    fn input_on_the_expected_path_is_null() {
        // Both branches have the same leaf value: the feature changes nothing.
        let m = BoostedClassifier { base_margin: 0.0, trees: vec![stump(0, 1.5, 3.0, 1.5, 5.0)], n_features: 1 };
        assert_eq!(brute_force_shap(&m, &[1.0]).unwrap(), vec![0.0]);
        assert_eq!(tree_shap(&m, &[1.0]).unwrap().1, vec![0.0]);
    }

    #[test]
    fn zero_cover_is_rejected() {
        let mut t = stump(0, 1.0, 0.0, 2.0, 0.0);
        if let TreeNode::Split { cover, .. } = &mut t {
            *cover = 0.0;
        }
        let m = BoostedClassifier { base_margin: 0.0, trees: vec![t], n_features: 1 };
        assert!(tree_shap(&m, &[0.0]).is_err());
        let wide = BoostedClassifier { base_margin: 0.0, trees: vec![], n_features: 16 };
        assert!(brute_force_shap(&wide, &[0.0; 16]).is_err());
    }

    fn schema(n: usize) -> FeatureSchema {
        FeatureSchema::new(
            (0..n)
                .map(|i| SchemaEntry {
                    name: format!("f{i}"),
                    kind: FeatureKind::Binary,
                    monotone: 1,
                    suggestible: true,
                })
                .collect(),
        )
        .unwrap()
    }

    /// Classifier k splits on feature k−1; probabilities for x = 1 on the
    /// first two features are high, so x = (1, 1, 0, 0) rates 3.
    fn model() -> OrdinalModel {
        let classifiers = (0..4)
            .map(|k| {
                BinaryScorer::Gbt(BoostedClassifier {
                    base_margin: 0.0,
                    trees: vec![stump(k, -2.0, 6.0, 2.0, 2.0)],
                    n_features: 4,
                })
            })
            .collect();
        OrdinalModel::new(BaseKind::Gbt, classifiers, [0.5; 4], schema(4)).unwrap()
    }

    #[test]
    fn explanation_uses_responsible_classifier() {
        let m = model();
        let x = [1.0, 1.0, 0.0, 0.0];
        let rating = consistent_label(&m, &x).unwrap();
        assert_eq!(rating.get(), 3);
        let e = compute_explanation(&m, &x, rating).unwrap();
        assert_eq!(e.responsible.get(), 2);
        assert_eq!(e.method, AttributionMethod::TreeShap);
        // Only feature 1 appears in classifier 2.
        assert_eq!(e.attributions[0].feature, "f1");
        assert!((e.attributions[0].shap - (2.0 - (6.0 * -2.0 + 2.0 * 2.0) / 8.0)).abs() < 1e-12);
        assert_eq!(e.attributions.len(), 4);
        assert!((e.margin() - m.classifiers[1].margin(&x)).abs() < 1e-12);
        assert!((e.probability - m.classifiers[1].probability(&x)).abs() < 1e-15);
        assert!(compute_explanation(&m, &x, RatingClass::new(4).unwrap()).is_err());
    }

    #[test]
    fn class_one_explanations_can_be_negative() {
        let m = model();
        let x = [0.0, 1.0, 1.0, 1.0];
        let rating = consistent_label(&m, &x).unwrap();
        assert_eq!(rating.get(), 1);
        let e = compute_explanation(&m, &x, rating).unwrap();
        assert_eq!(e.responsible.get(), 1);
        let negatives: Vec<_> = e.negatives().collect();
        assert_eq!(negatives.len(), 1);
        assert_eq!(negatives[0].feature, "f0");
        assert_eq!(e.presented(5, 3).len(), 1);
    }

    #[test]
    fn ranking_order() {
        let items = [(0, -0.5), (1, 0.2), (2, 0.0), (3, 0.9), (4, -0.7), (5, 0.2)]
            .into_iter()
            .map(|(id, shap)| Attribution { feature_id: id, feature: format!("f{id}"), shap })
            .collect();
        let order: Vec<usize> = rank(items).iter().map(|a| a.feature_id).collect();
        assert_eq!(order, vec![3, 1, 5, 4, 0, 2]);
    }
}
