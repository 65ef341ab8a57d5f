use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vr_rating::data::SchemaEntry;
use vr_rating::ordinal::BaseLearner;
use vr_rating::*;

fn random_tree(rng: &mut ChaCha8Rng, n_features: usize, depth: usize) -> TreeNode {
    if depth == 0 || rng.random::<f64>() < 0.2 {
        return TreeNode::Leaf { value: rng.random_range(-2.0..2.0), cover: f64::from(rng.random_range(1..20u32)) };
    }
    let left = random_tree(rng, n_features, depth - 1);
    let right = random_tree(rng, n_features, depth - 1);
    TreeNode::Split {
        feature: rng.random_range(0..n_features),
        threshold: 0.5,
        cover: left.cover() + right.cover(),
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// E[f(x) | x_S] straight from the definition: weights every leaf by the
/// cover fraction of the branches taken on features outside S.
fn expectation(node: &TreeNode, x: &[f64], known: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut stack = vec![(node, 1.0)];
    while let Some((n, w)) = stack.pop() {
        match n {
            TreeNode::Leaf { value, .. } => total += w * value,
            TreeNode::Split { feature, threshold, cover, left, right } => {
                if known[*feature] {
                    stack.push((if x[*feature] < *threshold { left } else { right }, w));
                } else {
                    stack.push((left, w * left.cover() / cover));
                    stack.push((right, w * right.cover() / cover));
                }
            }
        }
    }
    total
}

/// Shapley values as the average marginal contribution over every ordering
/// of the features.
fn permutation_shapley(model: &BoostedClassifier, x: &[f64]) -> Vec<f64> {
    let n = model.n_features;
    let f = |known: &[bool]| model.trees.iter().map(|t| expectation(t, x, known)).sum::<f64>();
    let mut phi = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut count = 0.0;
    // Heap's algorithm.
    let mut c = vec![0usize; n];
    let visit = |order: &[usize], phi: &mut [f64]| {
        let mut known = vec![false; n];
        let mut prev = f(&known);
        for &j in order {
            known[j] = true;
            let next = f(&known);
            phi[j] += next - prev;
            prev = next;
        }
    };
    visit(&order, &mut phi);
    count += 1.0;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                order.swap(0, i);
            } else {
                order.swap(c[i], i);
            }
            visit(&order, &mut phi);
            count += 1.0;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    phi.iter().map(|p| p / count).collect()
}

#[test]
fn tree_shap_matches_permutation_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let n = rng.random_range(1..=6);
        let trees = (0..rng.random_range(1..=4)).map(|_| random_tree(&mut rng, n, 4)).collect();
        let model = BoostedClassifier { base_margin: rng.random_range(-1.0..1.0), trees, n_features: n };
        for _ in 0..5 {
            let x: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..2u8))).collect();
            let (base, phi) = tree_shap(&model, &x).unwrap();
            let oracle = permutation_shapley(&model, &x);
            let brute = brute_force_shap(&model, &x).unwrap();
            for j in 0..n {
                assert!((phi[j] - oracle[j]).abs() < 1e-9, "feature {j}: {} vs {}", phi[j], oracle[j]);
                assert!((brute[j] - oracle[j]).abs() < 1e-9);
            }
            let no_features = vec![false; n];
            let expected_base =
                model.base_margin + model.trees.iter().map(|t| expectation(t, &x, &no_features)).sum::<f64>();
            assert!((base - expected_base).abs() < 1e-9);
            assert!((base + phi.iter().sum::<f64>() - model.margin(&x)).abs() < 1e-9);
        }
    }
}

#[test]
fn explanations_of_trained_model_are_locally_accurate() {
    let cfg = SynthConfig { n_properties: 3_000, n_guests: 800, seed: 5, ..SynthConfig::default() };
    let out = generate_synthetic(&cfg).unwrap();
    let labeled = out.dataset.star_labeled();
    let model = train_ordinal(&labeled, &BaseLearner::Gbt(GbtConfig { n_rounds: 30, ..GbtConfig::default() })).unwrap();
    for r in out.dataset.records.iter().take(300) {
        let rating = consistent_label(&model, &r.features).unwrap();
        let e = compute_explanation(&model, &r.features, rating).unwrap();
        let margin = model.classifier(e.responsible).margin(&r.features);
        let sum: f64 = e.attributions.iter().map(|a| a.shap).sum();
        assert!((e.base_value + sum - margin).abs() < 1e-6);
        assert_eq!(e.responsible, responsible_classifier(rating));
    }
}

#[test]
fn logistic_base_explains_with_linear_contributions() {
    let schema = FeatureSchema::new(vec![
        SchemaEntry { name: "a".into(), kind: FeatureKind::Binary, monotone: 1, suggestible: true },
        SchemaEntry { name: "b".into(), kind: FeatureKind::Numeric, monotone: 0, suggestible: false },
    ])
    .unwrap();
    let mut records = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200 {
        let class = 1 + i % 5;
        let x = vec![f64::from(class >= 3), f64::from(class * 10 + i % 7)];
        records.push(PropertyRecord {
            id: format!("p{i}"),
            kind: PropertyKind::Hotel,
            official_stars: None,
            features: x,
        });
        labels.push(RatingClass::new(i64::from(class)).unwrap());
    }
    let ds = Dataset::with_labels(schema, records, labels).unwrap();
    let model = train_ordinal(&ds, &BaseLearner::Logistic(LogisticConfig::default())).unwrap();
    for r in &ds.records {
        let rating = consistent_label(&model, &r.features).unwrap();
        let e = compute_explanation(&model, &r.features, rating).unwrap();
        assert_eq!(e.method, vr_rating::explain::AttributionMethod::Linear);
        let sum: f64 = e.attributions.iter().map(|a| a.shap).sum();
        assert!((e.base_value + sum - model.classifier(e.responsible).margin(&r.features)).abs() < 1e-9);
    }
}
