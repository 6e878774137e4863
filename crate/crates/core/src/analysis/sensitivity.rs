//! Score response to single-factor changes from a baseline record.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::grid::{LIGHTING, ROAD_CONDITION, SPEED, TIME_OF_DAY, VRU_PRESENCE, WEATHER};
use crate::error::{Error, Result};
use crate::ingest::{CrashRecord, FeatureEngineer, UnknownCounts};
use crate::scoring::{assess, CompiledCalibration, RiskBands};
use crate::types::Classifier;

pub const DAY_OF_WEEK: &str = "day_of_week";

/// Raw columns owned by each named factor. Columns not listed here count as
/// a factor of their own.
pub const FACTOR_COLUMNS: [(&str, &[&str]); 7] = [
    (TIME_OF_DAY, &["HOUR"]),
    (WEATHER, &["WEATHER"]),
    (LIGHTING, &["LGT_COND"]),
    (SPEED, &["TRAV_SP", "VSPD_LIM"]),
    (ROAD_CONDITION, &["VSURCOND"]),
    (VRU_PRESENCE, &["pedestrian_count", "cyclist_count", "PEDS", "PERNOTMVIT", "HARM_EV", "max_vru_injury"]),
    (DAY_OF_WEEK, &["DAY_WEEK"]),
];

pub fn factor_of_column(column: &str) -> &str {
    FACTOR_COLUMNS
        .iter()
        .find(|(_, cols)| cols.contains(&column))
        .map(|(f, _)| *f)
        .unwrap_or(column)
}

/// `from` is laid over the baseline to form the starting state; `to` is laid
/// over that to form the changed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub factor: String,
    pub name: String,
    #[serde(default)]
    pub from: BTreeMap<String, f64>,
    pub to: BTreeMap<String, f64>,
}

impl Transition {
    pub fn new(factor: &str, name: &str, from: &[(&str, f64)], to: &[(&str, f64)]) -> Self {
        let map = |kv: &[(&str, f64)]| kv.iter().map(|&(k, v)| (k.to_string(), v)).collect();
        Self {
            factor: factor.to_string(),
            name: name.to_string(),
            from: map(from),
            to: map(to),
        }
    }
}

/// One transition per reported single-factor change. The weekend-night row
/// starts from a weekday night so that only the day changes.
pub fn default_transitions() -> Vec<Transition> {
    vec![
        Transition::new(LIGHTING, "daylight -> dark-unlit", &[], &[("LGT_COND", 2.0)]),
        Transition::new(SPEED, "low -> high", &[("TRAV_SP", 30.0)], &[("TRAV_SP", 50.0)]),
        Transition::new(TIME_OF_DAY, "daytime -> night", &[], &[("HOUR", 2.0)]),
        Transition::new(WEATHER, "clear -> snow", &[], &[("WEATHER", 4.0)]),
        Transition::new(ROAD_CONDITION, "dry -> ice", &[], &[("VSURCOND", 4.0)]),
        Transition::new(
            VRU_PRESENCE,
            "absent -> present",
            &[],
            &[("pedestrian_count", 1.0), ("PEDS", 1.0), ("PERNOTMVIT", 1.0), ("HARM_EV", 8.0)],
        ),
        Transition::new(DAY_OF_WEEK, "weekday -> weekend night", &[("HOUR", 23.0)], &[("DAY_WEEK", 7.0)]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub factor: String,
    pub transition: String,
    pub score_before: f64,
    pub score_after: f64,
    pub delta: f64,
    /// `|Δ| / σ`; absent when σ is zero.
    pub effect_size: Option<f64>,
    pub raw_delta: f64,
}

fn overlay(record: &CrashRecord, values: &BTreeMap<String, f64>) -> CrashRecord {
    let mut r = record.clone();
    for (k, v) in values {
        r.set(k, *v);
    }
    r
}

/// Check that `t` changes at most one factor and return the changed columns.
pub fn check_transition(baseline: &CrashRecord, t: &Transition) -> Result<Vec<String>> {
    let before = overlay(baseline, &t.from);
    let changed: Vec<String> = t
        .to
        .iter()
        .filter(|(k, v)| before.get(k) != Some(**v))
        .map(|(k, _)| k.clone())
        .collect();
    let mut factors: Vec<&str> = changed.iter().map(|c| factor_of_column(c)).collect();
    factors.sort_unstable();
    factors.dedup();
    if factors.len() > 1 {
        return Err(Error::Sensitivity(format!(
            "transition `{}` changes {} factors ({}); each transition must change exactly one",
            t.name,
            factors.len(),
            factors.join(", ")
        )));
    }
    Ok(changed)
}

/// Δ = calibrated score after − before for each transition. `sigma` is the
/// grid score standard deviation used for effect sizes.
pub fn sensitivity(
    model: &dyn Classifier,
    calibration: &CompiledCalibration,
    bands: &RiskBands,
    engineer: &FeatureEngineer,
    baseline: &CrashRecord,
    transitions: &[Transition],
    sigma: f64,
) -> Result<Vec<SensitivityRow>> {
    transitions
        .iter()
        .map(|t| {
            check_transition(baseline, t)?;
            let before = overlay(baseline, &t.from);
            let after = overlay(&before, &t.to);
            let mut unknown = UnknownCounts::new();
            let a = assess(model, calibration, bands, &engineer.engineer(&before, &mut unknown)?)?;
            let b = assess(model, calibration, bands, &engineer.engineer(&after, &mut unknown)?)?;
            let delta = b.calibrated_score - a.calibrated_score;
            Ok(SensitivityRow {
                factor: t.factor.clone(),
                transition: t.name.clone(),
                score_before: a.calibrated_score,
                score_after: b.calibrated_score,
                delta,
                effect_size: (sigma > 0.0).then(|| delta.abs() / sigma),
                raw_delta: b.raw_score - a.raw_score,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::base_record;

    #[test]
    fn default_transitions_each_change_one_factor() {
        let base = base_record("b");
        for t in default_transitions() {
            let changed = check_transition(&base, &t).unwrap();
            assert!(!changed.is_empty(), "{}", t.name);
        }
    }

    #[test]
    fn two_factor_transition_rejected() {
        let t = Transition::new("mixed", "night in snow", &[], &[("HOUR", 2.0), ("WEATHER", 4.0)]);
        assert!(matches!(check_transition(&base_record("b"), &t), Err(Error::Sensitivity(_))));
    }

    #[test]
    fn identity_transition_changes_nothing() {
        let t = Transition::new(WEATHER, "clear -> clear", &[], &[("WEATHER", 1.0)]);
        assert!(check_transition(&base_record("b"), &t).unwrap().is_empty());
    }
}
