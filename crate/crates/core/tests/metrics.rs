use invscore::fixture::planted::{planted_dataset, PlantedConfig};
use invscore::forest::ForestParams;
use invscore::ingest::stratified_folds;
use invscore::metrics::{confusion, cross_validate, pr_metrics, roc_auc, roc_auc_trapezoid, ConfusionMatrix};
use invscore::rng::rng_for;
use invscore::types::Label;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Pairwise AUC: share of (crash, safe) pairs ordered correctly, ties half.
fn pairwise_auc(scores: &[f64], truth: &[Label]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, ti) in truth.iter().enumerate() {
        for (j, tj) in truth.iter().enumerate() {
            if ti.is_crash() && !tj.is_crash() {
                den += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn label(b: bool) -> Label {
    if b {
        Label::Crash
    } else {
        Label::Safe
    }
}

fn random_instance(seed: u64, n: usize) -> (Vec<f64>, Vec<Label>) {
    let mut rng = rng_for(seed, 0);
    let mut truth: Vec<Label> = (0..n).map(|_| label(rng.gen_bool(0.4))).collect();
    truth[0] = Label::Crash;
    truth[1] = Label::Safe;
    // Coarse scores so ties occur.
    let scores = (0..n).map(|_| (rng.gen_range(0..20) as f64) / 20.0).collect();
    (scores, truth)
}

#[test]
fn rank_auc_agrees_with_trapezoid_on_100_instances() {
    for seed in 0..100 {
        let (s, t) = random_instance(seed, 5 + seed as usize * 3);
        let rank = roc_auc(&s, &t).unwrap();
        assert!((rank - roc_auc_trapezoid(&s, &t).unwrap()).abs() < 1e-9, "seed {seed}");
        assert!((rank - pairwise_auc(&s, &t)).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn tied_pair_scores_half() {
    assert_eq!(roc_auc(&[0.8, 0.8], &[Label::Crash, Label::Safe]).unwrap(), 0.5);
}

#[test]
fn shuffled_labels_give_chance_auc_and_ap() {
    let mut rng = rng_for(4, 0);
    let n = 10_000;
    let scores: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let mut truth: Vec<Label> = (0..n).map(|i| label(i % 2 == 0)).collect();
    truth.shuffle(&mut rng);
    let auc = roc_auc(&scores, &truth).unwrap();
    assert!((auc - 0.5).abs() < 0.03, "{auc}");
    let ap = pr_metrics(&scores, &truth).unwrap().average_precision;
    assert!((ap - 0.5).abs() < 0.02, "{ap}");
}

#[test]
fn hand_enumerated_average_precision() {
    let ap = pr_metrics(&[0.9, 0.6, 0.4], &[Label::Crash, Label::Safe, Label::Crash])
        .unwrap()
        .average_precision;
    assert!((ap - 5.0 / 6.0).abs() < 1e-12);
}

#[test]
fn published_confusion_counts() {
    let m = ConfusionMatrix {
        tp: 2227,
        fp: 139,
        fn_: 2412,
        tn: 4500,
    };
    let close = |a: Option<f64>, b: f64| (a.unwrap() - b).abs() <= 0.001;
    assert!(close(m.precision(), 0.941));
    assert!(close(m.recall(), 0.480));
    assert!(close(m.f1(), 0.636));
    assert!(close(m.safe_recall(), 0.970));
}

#[test]
fn planted_fixture_cv_is_stable() {
    let data = planted_dataset(&PlantedConfig {
        n_rows: 4000,
        ..Default::default()
    })
    .unwrap();
    let params = ForestParams {
        n_estimators: 30,
        ..Default::default()
    };
    let report = cross_validate(&data, 5, &[1, 2, 3], &params).unwrap();
    assert_eq!(report.folds.len(), 15);
    assert!(report.auc.cv_percent < 5.0, "{:?}", report.auc);
    assert!(report.auc.ci_low <= report.auc.mean && report.auc.mean <= report.auc.ci_high);
}

proptest! {
    #[test]
    fn rank_and_trapezoid_agree(seed in any::<u64>(), n in 2usize..300) {
        let (s, t) = random_instance(seed, n);
        let rank = roc_auc(&s, &t).unwrap();
        prop_assert!((rank - roc_auc_trapezoid(&s, &t).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn confusion_identities(bits in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
        let pred: Vec<Label> = bits.iter().map(|b| label(b.0)).collect();
        let truth: Vec<Label> = bits.iter().map(|b| label(b.1)).collect();
        let m = confusion(&pred, &truth).unwrap();
        prop_assert_eq!(m.total(), bits.len() as u64);
        let acc = (m.tp + m.tn) as f64 / m.total() as f64;
        prop_assert!((m.accuracy().unwrap() - acc).abs() < 1e-15);
        if let (Some(p), Some(r), Some(f1)) = (m.precision(), m.recall(), m.f1()) {
            prop_assert!((f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
        }
    }

    #[test]
    fn folds_partition_rows(seed in any::<u64>(), n in 20usize..300, k in 2usize..6) {
        let mut rng = rng_for(seed, 1);
        let mut labels: Vec<Label> = (0..n).map(|_| label(rng.gen_bool(0.5))).collect();
        for l in labels.iter_mut().take(k) {
            *l = Label::Crash;
        }
        for l in labels.iter_mut().skip(k).take(k) {
            *l = Label::Safe;
        }
        let folds = stratified_folds(&labels, k, seed).unwrap();
        let mut seen = vec![0; n];
        for f in &folds {
            for &i in f {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert_eq!(folds, stratified_folds(&labels, k, seed).unwrap());
    }
}
