//! Inverse scoring: safe-class posterior to raw score, rule-based
//! calibration, and risk banding.

pub mod bands;
pub mod calibration;

use rayon::prelude::*;

pub use bands::{classify_risk, RiskBands};
pub use calibration::{Calibrated, CalibrationRule, CalibrationTable, CompiledCalibration, Condition, Factor};

use crate::error::{Error, Result};
use crate::types::{Classifier, DrivingContext, SafetyAssessment};

/// `100 × p_safe`.
pub fn raw_score(model: &dyn Classifier, context: &DrivingContext) -> Result<f64> {
    Ok(100.0 * model.predict_proba(context)?.p_safe)
}

/// Raw score, calibration and banding for one context.
pub fn assess(
    model: &dyn Classifier,
    table: &CompiledCalibration,
    bands: &RiskBands,
    context: &DrivingContext,
) -> Result<SafetyAssessment> {
    if table.schema_id() != model.schema_id() {
        return Err(Error::Calibration(format!(
            "calibration compiled for `{}`, model uses `{}`",
            table.schema_id(),
            model.schema_id()
        )));
    }
    let raw = raw_score(model, context)?;
    assessment_from_raw(raw, table, bands, context)
}

pub fn assessment_from_raw(
    raw: f64,
    table: &CompiledCalibration,
    bands: &RiskBands,
    context: &DrivingContext,
) -> Result<SafetyAssessment> {
    let c = table.calibrate(raw, context);
    Ok(SafetyAssessment {
        raw_score: raw,
        calibrated_score: c.calibrated_score,
        applied_penalties: c.applied_penalties,
        risk_level: bands.classify(c.calibrated_score)?,
    })
}

/// Order-preserving parallel [`assess`].
pub fn assess_batch(
    model: &dyn Classifier,
    table: &CompiledCalibration,
    bands: &RiskBands,
    contexts: &[DrivingContext],
) -> Result<Vec<SafetyAssessment>> {
    contexts.par_iter().map(|c| assess(model, table, bands, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::engineer::{base_record, FeatureEngineer, UnknownCounts};
    use crate::types::RiskLevel;

    fn ctx(edit: impl FnOnce(&mut crate::ingest::CrashRecord)) -> DrivingContext {
        let eng = FeatureEngineer::default_crss();
        let mut r = base_record("x");
        edit(&mut r);
        eng.engineer(&r, &mut UnknownCounts::new()).unwrap()
    }

    fn table() -> CompiledCalibration {
        let eng = FeatureEngineer::default_crss();
        CalibrationTable::default_table().compile(eng.schema()).unwrap()
    }

    #[test]
    fn icy_road_only() {
        let c = table().calibrate(80.0, &ctx(|r| r.set("VSURCOND", 4.0)));
        assert!((c.calibrated_score - 48.0).abs() < 1e-9);
        assert_eq!(c.applied_penalties.len(), 1);
        assert_eq!(c.applied_penalties[0].rule_id, "road_ice");
    }

    #[test]
    fn dark_unlit_snow_triggers_compound() {
        let c = table().calibrate(
            100.0,
            &ctx(|r| {
                r.set("LGT_COND", 2.0);
                r.set("WEATHER", 4.0);
            }),
        );
        assert!((c.calibrated_score - 57.0).abs() < 1e-9);
        let ids: Vec<&str> = c.applied_penalties.iter().map(|p| p.rule_id.as_str()).collect();
        assert_eq!(ids, ["weather_snow", "lighting_dark_unlit", "compound"]);
    }

    #[test]
    fn all_clear_is_identity() {
        let c = table().calibrate(73.5, &ctx(|_| {}));
        assert_eq!(c.calibrated_score, 73.5);
        assert!(c.applied_penalties.is_empty());
    }

    #[test]
    fn speed_bands_pick_one_rule() {
        let c = table().calibrate(100.0, &ctx(|r| r.set("TRAV_SP", 60.0)));
        assert_eq!(c.applied_penalties[0].rule_id, "speed_very_high");
        let c = table().calibrate(100.0, &ctx(|r| r.set("TRAV_SP", 45.0)));
        assert_eq!(c.applied_penalties[0].rule_id, "speed_high");
        let c = table().calibrate(100.0, &ctx(|r| r.set("TRAV_SP", 41.0)));
        assert_eq!(c.applied_penalties[0].rule_id, "speed_moderate_high");
        assert_eq!(c.applied_penalties.len(), 1);
    }

    #[test]
    fn overlapping_rules_in_a_factor_keep_the_most_severe() {
        let mut t = CalibrationTable::default_table();
        t.rules.push(CalibrationRule {
            rule_id: "any_dark".into(),
            factor: Factor::Lighting,
            condition: Condition::In {
                feature: "LGT_COND".into(),
                values: vec![2.0, 3.0],
            },
            alpha: 0.95,
            source: String::new(),
        });
        let compiled = t.compile(FeatureEngineer::default_crss().schema()).unwrap();
        let c = compiled.calibrate(100.0, &ctx(|r| r.set("LGT_COND", 2.0)));
        assert_eq!(c.applied_penalties.len(), 1);
        assert_eq!(c.applied_penalties[0].rule_id, "lighting_dark_unlit");
    }

    #[test]
    fn unknown_feature_fails_compile() {
        let schema = crate::fixture::planted_schema(2);
        assert!(CalibrationTable::default_table().compile(&schema).is_err());
    }

    #[test]
    fn assessment_levels() {
        let t = table();
        let a = assessment_from_raw(90.0, &t, &RiskBands::default(), &ctx(|r| r.set("VSURCOND", 4.0))).unwrap();
        assert_eq!(a.risk_level, RiskLevel::Medium);
        assert!((a.calibrated_score - 54.0).abs() < 1e-9);
    }
}
