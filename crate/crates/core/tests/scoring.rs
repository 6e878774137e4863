use invscore::ingest::{base_record, CrashRecord, FeatureEngineer, UnknownCounts};
use invscore::rng::rng_for;
use invscore::scoring::{assessment_from_raw, classify_risk, CalibrationTable, CompiledCalibration, RiskBands};
use invscore::types::{DrivingContext, RiskLevel};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Penalty table written out by hand from raw codes, independent of the
/// rule engine.
mod oracle {
    use invscore::ingest::CrashRecord;

    fn road(v: f64) -> Option<f64> {
        match v as i64 {
            4 => Some(0.60),
            3 | 10 => Some(0.70),
            2 | 6 => Some(0.85),
            _ => None,
        }
    }

    fn weather(v: f64) -> Option<f64> {
        match v as i64 {
            3 | 4 | 11 => Some(0.80),
            2 | 12 => Some(0.90),
            5..=8 => Some(0.85),
            _ => None,
        }
    }

    fn lighting(v: f64) -> Option<f64> {
        match v as i64 {
            2 => Some(0.75),
            3 | 6 => Some(0.85),
            4 | 5 => Some(0.92),
            _ => None,
        }
    }

    fn speed(over: f64) -> Option<f64> {
        if over >= 20.0 {
            Some(0.65)
        } else if over >= 10.0 {
            Some(0.75)
        } else if over >= 5.0 {
            Some(0.88)
        } else {
            None
        }
    }

    pub fn alphas(r: &CrashRecord) -> Vec<f64> {
        let g = |c: &str| r.get(c).unwrap();
        let hour = g("HOUR") as i64;
        let fired: Vec<f64> = [
            road(g("VSURCOND")),
            weather(g("WEATHER")),
            lighting(g("LGT_COND")),
            speed(g("TRAV_SP") - g("VSPD_LIM")),
            (g("pedestrian_count") + g("cyclist_count") >= 1.0).then_some(0.88),
            (hour >= 22 || hour <= 4).then_some(0.90),
        ]
        .into_iter()
        .flatten()
        .collect();
        let mut out = fired.clone();
        if fired.len() >= 2 {
            out.push(0.95);
        }
        out
    }
}

fn random_record(rng: &mut impl Rng, id: &str) -> CrashRecord {
    let pick = |rng: &mut _, v: &[f64]| *v.choose(rng).unwrap();
    base_record(id)
        .with("HOUR", rng.gen_range(0..24) as f64)
        .with("VSURCOND", pick(rng, &[1.0, 2.0, 3.0, 4.0, 6.0, 10.0]))
        .with("WEATHER", pick(rng, &[1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 11.0, 12.0]))
        .with("LGT_COND", pick(rng, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]))
        .with("VSPD_LIM", pick(rng, &[25.0, 35.0, 45.0, 55.0]))
        .with("TRAV_SP", rng.gen_range(15..90) as f64)
        .with("pedestrian_count", pick(rng, &[0.0, 0.0, 1.0, 2.0]))
}

fn engineer_one(e: &FeatureEngineer, r: &CrashRecord) -> DrivingContext {
    e.engineer(r, &mut UnknownCounts::new()).unwrap()
}

fn default_table(e: &FeatureEngineer) -> CompiledCalibration {
    CalibrationTable::default_table().compile(e.schema()).unwrap()
}

#[test]
fn fifty_random_contexts_match_hand_table() {
    let e = FeatureEngineer::default_crss();
    let table = default_table(&e);
    let mut rng = rng_for(17, 0);
    for i in 0..50 {
        let r = random_record(&mut rng, &format!("r{i}"));
        let raw = rng.gen_range(0.0..=100.0);
        let c = table.calibrate(raw, &engineer_one(&e, &r));
        let expected = raw * oracle::alphas(&r).iter().product::<f64>();
        assert!((c.calibrated_score - expected).abs() < 1e-9, "{r:?}: {} vs {expected}", c.calibrated_score);
        assert_eq!(c.applied_penalties.len(), oracle::alphas(&r).len());
    }
}

#[test]
fn published_worked_examples() {
    let e = FeatureEngineer::default_crss();
    let table = default_table(&e);
    let ice = engineer_one(&e, &base_record("a").with("VSURCOND", 4.0));
    assert!((table.calibrate(80.0, &ice).calibrated_score - 48.0).abs() < 1e-12);
    let dark_snow = engineer_one(&e, &base_record("b").with("LGT_COND", 2.0).with("WEATHER", 4.0));
    assert!((table.calibrate(100.0, &dark_snow).calibrated_score - 57.0).abs() < 1e-9);
    let clear = engineer_one(&e, &base_record("c"));
    assert_eq!(table.calibrate(63.5, &clear).calibrated_score, 63.5);
}

#[test]
fn band_boundaries() {
    let bands = RiskBands::default();
    let expected = [
        (0.0, RiskLevel::Critical),
        (20.0, RiskLevel::Critical),
        (21.0, RiskLevel::High),
        (40.0, RiskLevel::High),
        (41.0, RiskLevel::Medium),
        (60.0, RiskLevel::Medium),
        (61.0, RiskLevel::Low),
        (75.0, RiskLevel::Low),
        (76.0, RiskLevel::Excellent),
        (100.0, RiskLevel::Excellent),
    ];
    for (s, level) in expected {
        assert_eq!(classify_risk(s, &bands).unwrap(), level, "{s}");
    }
    assert!(classify_risk(-0.1, &bands).is_err());
    assert!(classify_risk(100.1, &bands).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rule_order_does_not_matter(seed in any::<u64>()) {
        let e = FeatureEngineer::default_crss();
        let mut rng = rng_for(seed, 0);
        let mut shuffled = CalibrationTable::default_table();
        shuffled.rules.shuffle(&mut rng);
        let a = default_table(&e);
        let b = shuffled.compile(e.schema()).unwrap();
        for i in 0..10 {
            let ctx = engineer_one(&e, &random_record(&mut rng, &i.to_string()));
            let raw = rng.gen_range(0.0..=100.0);
            prop_assert_eq!(a.calibrate(raw, &ctx), b.calibrate(raw, &ctx));
        }
    }

    #[test]
    fn calibration_is_bounded_monotone_and_dominated(seed in any::<u64>(), r1 in 0.0f64..=100.0, r2 in 0.0f64..=100.0) {
        let e = FeatureEngineer::default_crss();
        let table = default_table(&e);
        let bands = RiskBands::default();
        let ctx = engineer_one(&e, &random_record(&mut rng_for(seed, 0), "x"));
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let a = assessment_from_raw(lo, &table, &bands, &ctx).unwrap();
        let b = assessment_from_raw(hi, &table, &bands, &ctx).unwrap();
        prop_assert!((0.0..=100.0).contains(&a.calibrated_score));
        prop_assert!(a.calibrated_score <= b.calibrated_score);
        prop_assert!(a.calibrated_score <= a.raw_score);
        let raw_level = classify_risk(lo, &bands).unwrap();
        prop_assert!(a.risk_level.rank() <= raw_level.rank());
    }

    #[test]
    fn vru_presence_costs_twelve_percent(seed in any::<u64>(), raw in 0.0f64..=100.0) {
        let e = FeatureEngineer::default_crss();
        let table = default_table(&e);
        let base = random_record(&mut rng_for(seed, 0), "x").with("pedestrian_count", 0.0);
        let others = oracle::alphas(&base).len();
        // One other factor means adding VRU switches the compound rule on.
        prop_assume!(others != 1);
        let without = table.calibrate(raw, &engineer_one(&e, &base)).calibrated_score;
        let with = table.calibrate(raw, &engineer_one(&e, &base.clone().with("pedestrian_count", 1.0))).calibrated_score;
        prop_assert!((with - 0.88 * without).abs() < 1e-9);
    }

    #[test]
    fn risk_level_rank_is_monotone(a in 0.0f64..=100.0, b in 0.0f64..=100.0) {
        let bands = RiskBands::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(classify_risk(lo, &bands).unwrap().rank() <= classify_risk(hi, &bands).unwrap().rank());
    }
}
