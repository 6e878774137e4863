use std::sync::Arc;

use invscore::explain::importance::{IMPURITY, PERMUTATION};
use invscore::explain::{
    consensus_rank, impurity_importance, permutation_importance, recommend, shap_importance, tree_shap,
    ShapExplainer, PermutationMetric,
};
use invscore::forest::tree::ClassCounts;
use invscore::forest::{train_forest, Forest, ForestParams, Node, Tree};
use invscore::ingest::{base_record, FeatureEngineer, LabeledDataset, Provenance, UnknownCounts};
use invscore::rng::rng_for;
use invscore::schema::{FeatureGroup, FeatureKind, FeatureSchema, FeatureSpec};
use invscore::scoring::{CalibrationTable, Factor};
use invscore::types::{DrivingContext, Label};
use proptest::prelude::*;
use rand::Rng;

// Exhaustive-subset Shapley oracle. v(S) is the expected tree output when the
// features in S are fixed to the input and the rest follow background covers.
mod oracle {
    use super::*;

    pub fn covers(tree: &Tree, background: &[Vec<f64>]) -> Vec<f64> {
        let mut c = vec![0.0; tree.nodes.len()];
        for row in background {
            let mut i = 0;
            c[i] += 1.0;
            while let Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } = tree.nodes[i]
            {
                i = if row[feature] < threshold { left } else { right };
                c[i] += 1.0;
            }
        }
        c
    }

    fn value(tree: &Tree, cover: &[f64], x: &[f64], known: u32, node: usize) -> f64 {
        match tree.nodes[node] {
            Node::Leaf { p_crash, .. } => p_crash,
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if known & (1 << feature) != 0 {
                    let next = if x[feature] < threshold { left } else { right };
                    value(tree, cover, x, known, next)
                } else if cover[node] == 0.0 {
                    0.0
                } else {
                    (cover[left] * value(tree, cover, x, known, left)
                        + cover[right] * value(tree, cover, x, known, right))
                        / cover[node]
                }
            }
        }
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    pub fn shapley(tree: &Tree, background: &[Vec<f64>], x: &[f64], m: usize) -> (f64, Vec<f64>) {
        let cover = covers(tree, background);
        let v = |s: u32| value(tree, &cover, x, s, 0);
        let mut phi = vec![0.0; m];
        for (i, p) in phi.iter_mut().enumerate() {
            for s in 0u32..(1 << m) {
                if s & (1 << i) != 0 {
                    continue;
                }
                let size = s.count_ones() as usize;
                let w = factorial(size) * factorial(m - size - 1) / factorial(m);
                *p += w * (v(s | (1 << i)) - v(s));
            }
        }
        (v(0), phi)
    }
}

fn leaf(p: f64) -> Node {
    Node::Leaf {
        counts: [0, 0],
        p_crash: p,
    }
}

fn split(feature: usize, threshold: f64, left: usize, right: usize) -> Node {
    Node::Split {
        feature,
        threshold,
        left,
        right,
        counts: [0, 0] as ClassCounts,
    }
}

fn random_tree(rng: &mut impl Rng, max_depth: usize, m: usize) -> Tree {
    fn build(rng: &mut impl Rng, depth: usize, m: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        nodes.push(leaf(0.0));
        if depth == 0 || rng.gen_bool(0.15) {
            nodes[id] = leaf((rng.gen_range(0..=20) as f64) / 20.0);
            return id;
        }
        let feature = rng.gen_range(0..m);
        let threshold = [0.25, 0.5, 0.75][rng.gen_range(0..3)];
        let left = build(rng, depth - 1, m, nodes);
        let right = build(rng, depth - 1, m, nodes);
        nodes[id] = split(feature, threshold, left, right);
        id
    }
    let mut nodes = Vec::new();
    build(rng, max_depth, m, &mut nodes);
    Tree { nodes }
}

fn schema(m: usize) -> Arc<FeatureSchema> {
    let specs = (0..m)
        .map(|i| FeatureSpec::raw(format!("x{i}"), FeatureGroup::Metadata, FeatureKind::Numeric))
        .collect();
    Arc::new(FeatureSchema::new(format!("toy-{m}"), specs).unwrap())
}

fn forest(m: usize, trees: Vec<Tree>) -> Forest {
    Forest::from_trees(format!("toy-{m}"), m, ForestParams::default(), trees)
}

fn dataset(m: usize, rows: Vec<Vec<f64>>) -> LabeledDataset {
    let labels = (0..rows.len())
        .map(|i| if i % 2 == 0 { Label::Crash } else { Label::Safe })
        .collect();
    LabeledDataset::from_rows(schema(m), rows, labels, Provenance::Planted).unwrap()
}

fn grid_value(rng: &mut impl Rng) -> f64 {
    [0.1, 0.3, 0.5, 0.6, 0.9][rng.gen_range(0..5)]
}

fn random_rows(rng: &mut impl Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..m).map(|_| grid_value(rng)).collect()).collect()
}

fn check_against_oracle(seed: u64, max_depth: usize, m: usize, n_background: usize) {
    let mut rng = rng_for(seed, 0);
    let tree = random_tree(&mut rng, max_depth, m);
    let background = random_rows(&mut rng, n_background, m);
    let x: Vec<f64> = (0..m).map(|_| grid_value(&mut rng)).collect();
    let model = forest(m, vec![tree.clone()]);
    let e = ShapExplainer::new(&model, &dataset(m, background.clone()))
        .unwrap()
        .explain_row(&x);
    let (base, phi) = oracle::shapley(&tree, &background, &x, m);
    assert!((e.base_value - base).abs() < 1e-9, "seed {seed}: base {} vs {base}", e.base_value);
    for j in 0..m {
        assert!(
            (e.contributions[j] - phi[j]).abs() < 1e-9,
            "seed {seed} feature {j}: {} vs {}",
            e.contributions[j],
            phi[j]
        );
    }
    assert!(e.residual().abs() < 1e-9);
}

#[test]
fn depth_two_tree_over_three_features_matches_oracle() {
    // Root on x0, children on x1 and x2.
    let tree = Tree {
        nodes: vec![
            split(0, 0.5, 1, 2),
            split(1, 0.5, 3, 4),
            split(2, 0.5, 5, 6),
            leaf(0.1),
            leaf(0.7),
            leaf(0.4),
            leaf(0.95),
        ],
    };
    let background = vec![
        vec![0.1, 0.1, 0.9],
        vec![0.1, 0.9, 0.1],
        vec![0.9, 0.1, 0.1],
        vec![0.9, 0.9, 0.9],
        vec![0.3, 0.6, 0.6],
    ];
    let model = forest(3, vec![tree.clone()]);
    let explainer = ShapExplainer::new(&model, &dataset(3, background.clone())).unwrap();
    for x in [[0.1, 0.9, 0.1], [0.9, 0.1, 0.9], [0.6, 0.6, 0.3]] {
        let e = explainer.explain_row(&x);
        let (base, phi) = oracle::shapley(&tree, &background, &x, 3);
        assert!((e.base_value - base).abs() < 1e-12);
        for j in 0..3 {
            assert!((e.contributions[j] - phi[j]).abs() < 1e-9);
        }
    }
}

#[test]
fn random_shallow_trees_match_oracle() {
    for seed in 0..400 {
        let m = 1 + (seed as usize % 4);
        check_against_oracle(seed, 3, m, 1 + (seed as usize % 12));
    }
}

#[test]
fn repeated_feature_on_path_matches_oracle() {
    let tree = Tree {
        nodes: vec![
            split(0, 0.5, 1, 2),
            split(0, 0.25, 3, 4),
            split(1, 0.5, 5, 6),
            leaf(0.0),
            split(0, 0.4, 7, 8),
            leaf(0.3),
            leaf(0.8),
            leaf(0.5),
            leaf(1.0),
        ],
    };
    let background = vec![vec![0.1, 0.9], vec![0.3, 0.1], vec![0.45, 0.6], vec![0.9, 0.9], vec![0.6, 0.1]];
    let model = forest(2, vec![tree.clone()]);
    let explainer = ShapExplainer::new(&model, &dataset(2, background.clone())).unwrap();
    for x in [[0.3, 0.1], [0.45, 0.9], [0.1, 0.1], [0.9, 0.3]] {
        let e = explainer.explain_row(&x);
        let (_, phi) = oracle::shapley(&tree, &background, &x, 2);
        for j in 0..2 {
            assert!((e.contributions[j] - phi[j]).abs() < 1e-9, "{x:?}");
        }
    }
}

#[test]
fn constant_model_has_zero_attributions() {
    let model = forest(3, vec![Tree::constant(0.35, [13, 7])]);
    let e = ShapExplainer::new(&model, &dataset(3, vec![vec![0.5; 3]; 4]))
        .unwrap()
        .explain_row(&[0.1, 0.2, 0.3]);
    assert_eq!(e.contributions, vec![0.0; 3]);
    assert_eq!(e.base_value, 0.35);
    assert_eq!(e.model_output, 0.35);
}

#[test]
fn symmetric_features_get_equal_credit() {
    // Crash only when both x0 and x1 are high; background is symmetric.
    let tree = Tree {
        nodes: vec![
            split(0, 0.5, 1, 2),
            leaf(0.0),
            split(1, 0.5, 3, 4),
            leaf(0.0),
            leaf(1.0),
        ],
    };
    let background = vec![vec![0.1, 0.1], vec![0.1, 0.9], vec![0.9, 0.1], vec![0.9, 0.9]];
    let model = forest(2, vec![tree]);
    let e = ShapExplainer::new(&model, &dataset(2, background))
        .unwrap()
        .explain_row(&[0.9, 0.9]);
    assert!((e.contributions[0] - e.contributions[1]).abs() < 1e-12);
    assert!((e.contributions[0] - 0.375).abs() < 1e-12);
}

#[test]
fn empty_background_is_rejected() {
    let model = forest(2, vec![Tree::constant(0.5, [1, 1])]);
    let empty = dataset(2, vec![]);
    assert!(ShapExplainer::new(&model, &empty).is_err());
    let ctx = DrivingContext::new(schema(2).schema_id(), vec![0.0, 0.0]);
    assert!(tree_shap(&model, &ctx, &empty).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_agreement_holds_for_any_seed(seed in any::<u64>(), depth in 1usize..=3, m in 1usize..=4, n in 1usize..20) {
        check_against_oracle(seed, depth, m, n);
    }

    #[test]
    fn two_tree_forest_is_mean_of_trees(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 7);
        let (a, b) = (random_tree(&mut rng, 3, 4), random_tree(&mut rng, 3, 4));
        let background = random_rows(&mut rng, 10, 4);
        let x: Vec<f64> = (0..4).map(|_| grid_value(&mut rng)).collect();
        let bg = dataset(4, background);
        let both = ShapExplainer::new(&forest(4, vec![a.clone(), b.clone()]), &bg).unwrap().explain_row(&x);
        let ea = ShapExplainer::new(&forest(4, vec![a]), &bg).unwrap().explain_row(&x);
        let eb = ShapExplainer::new(&forest(4, vec![b]), &bg).unwrap().explain_row(&x);
        for j in 0..4 {
            prop_assert!((both.contributions[j] - (ea.contributions[j] + eb.contributions[j]) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unused_feature_gets_zero(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 9);
        // Trees only split on features 0..3; feature 3 is null.
        let trees = vec![random_tree(&mut rng, 3, 3), random_tree(&mut rng, 3, 3)];
        let background = random_rows(&mut rng, 8, 4);
        let x: Vec<f64> = (0..4).map(|_| grid_value(&mut rng)).collect();
        let e = ShapExplainer::new(&forest(4, trees), &dataset(4, background)).unwrap().explain_row(&x);
        prop_assert_eq!(e.contributions[3], 0.0);
    }
}

/// One informative feature (x0 > 0.5 gives a 90% crash rate, else 10%) and
/// nine noise columns.
fn one_informative(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = rng_for(seed, 0);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..10).map(|_| rng.gen::<f64>()).collect();
        let p = if row[0] > 0.5 { 0.9 } else { 0.1 };
        labels.push(if rng.gen_bool(p) { Label::Crash } else { Label::Safe });
        rows.push(row);
    }
    LabeledDataset::from_rows(schema(10), rows, labels, Provenance::Planted).unwrap()
}

fn small_params() -> ForestParams {
    ForestParams {
        n_estimators: 30,
        seed: 11,
        ..ForestParams::default()
    }
}

#[test]
fn trained_forest_explanations_are_locally_accurate() {
    let data = one_informative(1500, 3);
    let model = train_forest(&data, &small_params()).unwrap();
    let explainer = ShapExplainer::new(&model, &data.subset(&(0..300).collect::<Vec<_>>())).unwrap();
    let mean: f64 = (0..300).map(|i| model.predict_row(data.row(i))).sum::<f64>() / 300.0;
    assert!((explainer.base_value() - mean).abs() < 1e-9);
    for e in explainer.explain_batch(&data.contexts[..200]).unwrap() {
        assert!(e.residual().abs() < 1e-9, "residual {}", e.residual());
    }
}

#[test]
fn impurity_importance_ranks_informative_feature_first() {
    let data = one_informative(1500, 5);
    let model = train_forest(&data, &small_params()).unwrap();
    let r = impurity_importance(&model, &data.schema.names());
    assert_eq!(r.method, IMPURITY);
    assert_eq!(r.order()[0], 0);
    assert!((r.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(r.scores.iter().all(|&s| s >= 0.0));
}

#[test]
fn constant_model_has_zero_impurity_importance() {
    let model = forest(3, vec![Tree::constant(0.2, [4, 1])]);
    let r = impurity_importance(&model, &["a", "b", "c"]);
    assert_eq!(r.scores, vec![0.0; 3]);
}

#[test]
fn permutation_importance_finds_informative_feature_and_is_deterministic() {
    let data = one_informative(1200, 8);
    let model = train_forest(&data, &small_params()).unwrap();
    let a = permutation_importance(&model, &data, PermutationMetric::Auc, 5, 42).unwrap();
    let b = permutation_importance(&model, &data, PermutationMetric::Auc, 5, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.method, PERMUTATION);
    assert_eq!(a.order()[0], 0);
    let acc = permutation_importance(&model, &data, PermutationMetric::Accuracy, 2, 1).unwrap();
    assert_eq!(acc.order()[0], 0);
}

#[test]
fn permutation_of_unused_feature_drops_nothing() {
    // Splits only on x0.
    let tree = Tree {
        nodes: vec![split(0, 0.5, 1, 2), leaf(0.2), leaf(0.8)],
    };
    let model = forest(3, vec![tree]);
    let mut rng = rng_for(1, 1);
    let data = dataset(3, random_rows(&mut rng, 50, 3));
    let r = permutation_importance(&model, &data, PermutationMetric::Auc, 3, 0).unwrap();
    assert_eq!(r.scores[1], 0.0);
    assert_eq!(r.scores[2], 0.0);
}

#[test]
fn permutation_with_single_class_auc_fails() {
    let model = forest(2, vec![Tree::constant(0.5, [1, 1])]);
    let data = LabeledDataset::from_rows(schema(2), vec![vec![0.0, 1.0]; 4], vec![Label::Crash; 4], Provenance::Planted)
        .unwrap();
    assert!(permutation_importance(&model, &data, PermutationMetric::Auc, 2, 0).is_err());
}

#[test]
fn three_method_consensus_puts_informative_feature_first() {
    let data = one_informative(1200, 13);
    let model = train_forest(&data, &small_params()).unwrap();
    let names = data.schema.names();
    let explainer = ShapExplainer::new(&model, &data.subset(&(0..200).collect::<Vec<_>>())).unwrap();
    let shap = shap_importance(&explainer.explain_batch(&data.contexts[..200]).unwrap(), &names);
    let rankings = vec![
        impurity_importance(&model, &names),
        permutation_importance(&model, &data, PermutationMetric::Auc, 3, 0).unwrap(),
        shap,
    ];
    let c = consensus_rank(&rankings).unwrap();
    assert_eq!(c.consensus_rank("x0"), Some(1));
    assert_eq!(c.per_method.len(), 3);
}

// Recommendations run on the default schema with a constant model, so the raw
// score is fixed and the expected gain follows directly from the alphas.
fn default_setup() -> (FeatureEngineer, Forest, LabeledDataset) {
    let engineer = FeatureEngineer::default_crss();
    let schema = engineer.schema().clone();
    let model = Forest::from_trees(&*schema.schema_id(), schema.len(), ForestParams::default(), vec![Tree::constant(0.2, [4, 1])]);
    let ctx = engineer.engineer(&base_record("bg"), &mut UnknownCounts::new()).unwrap();
    let bg = LabeledDataset::new(schema, vec![ctx], vec![Label::Safe], vec![Provenance::Planted]).unwrap();
    (engineer, model, bg)
}

fn context_for(engineer: &FeatureEngineer, overrides: &[(&str, f64)]) -> DrivingContext {
    let mut record = base_record("t");
    for &(k, v) in overrides {
        record.set(k, v);
    }
    engineer.engineer(&record, &mut UnknownCounts::new()).unwrap()
}

#[test]
fn speed_only_context_gets_one_speed_recommendation() {
    let (engineer, model, bg) = default_setup();
    let table = CalibrationTable::default_table().compile(engineer.schema()).unwrap();
    let ctx = context_for(&engineer, &[("TRAV_SP", 60.0)]);
    let e = tree_shap(&model, &ctx, &bg).unwrap();
    let recs = recommend(&e, &table, &engineer, &ctx).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].factor, Factor::Speed);
    // Raw 80; 25 over the limit costs alpha 0.65.
    assert!((recs[0].estimated_gain - (80.0 - 80.0 * 0.65)).abs() < 1e-9);
}

#[test]
fn all_clear_context_gets_no_recommendations() {
    let (engineer, model, bg) = default_setup();
    let table = CalibrationTable::default_table().compile(engineer.schema()).unwrap();
    let ctx = context_for(&engineer, &[]);
    let e = tree_shap(&model, &ctx, &bg).unwrap();
    assert!(recommend(&e, &table, &engineer, &ctx).unwrap().is_empty());
}

#[test]
fn two_adverse_factors_give_positive_sorted_gains() {
    let (engineer, model, bg) = default_setup();
    let table = CalibrationTable::default_table().compile(engineer.schema()).unwrap();
    let ctx = context_for(&engineer, &[("TRAV_SP", 47.0), ("LGT_COND", 2.0), ("HOUR", 23.0)]);
    let e = tree_shap(&model, &ctx, &bg).unwrap();
    let recs = recommend(&e, &table, &engineer, &ctx).unwrap();
    assert!(!recs.is_empty() && recs.len() <= 2);
    assert!(recs.iter().all(|r| r.estimated_gain > 0.0));
    assert!(recs.windows(2).all(|w| w[0].estimated_gain >= w[1].estimated_gain));
    // Raw 80 × (0.75 speed × 0.75 unlit × 0.9 night × 0.95 compound).
    let before = 80.0 * 0.75 * 0.75 * 0.9 * 0.95;
    let speed = recs.iter().find(|r| r.factor == Factor::Speed).unwrap();
    assert!((speed.estimated_gain - (80.0 * 0.75 * 0.9 * 0.95 - before)).abs() < 1e-9);
    let light = recs.iter().find(|r| r.factor == Factor::Lighting).unwrap();
    assert!((light.estimated_gain - (80.0 * 0.75 * 0.85 * 0.9 * 0.95 - before)).abs() < 1e-9);
}
