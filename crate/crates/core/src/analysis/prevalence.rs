//! How often each headline risk factor appears among crash records.

use serde::{Deserialize, Serialize};

use crate::ingest::{CrashRecord, FeatureEngineer};

pub const PREVALENCE_FACTORS: [&str; 6] = [
    "rush_hour",
    "poor_lighting",
    "weekend",
    "adverse_weather",
    "night",
    "vru",
];

/// Presence of each factor in [`PREVALENCE_FACTORS`] order. Missing columns
/// count as absent.
pub fn factor_flags(record: &CrashRecord, engineer: &FeatureEngineer) -> [bool; 6] {
    let codes = engineer.codes();
    let cfg = engineer.config();
    let get = |c: &str| record.get(c).unwrap_or(f64::NAN);
    let hour = get("HOUR");
    let vru = record.get("pedestrian_count").unwrap_or(0.0) + record.get("cyclist_count").unwrap_or(0.0);
    [
        cfg.is_rush_hour(hour),
        codes.in_set("poor_lighting", get("LGT_COND")),
        codes.in_set("weekend_days", get("DAY_WEEK")),
        codes.in_set("adverse_weather", get("WEATHER")),
        cfg.is_night(hour),
        vru > 0.0,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorCount {
    pub factor: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoOccurrence {
    /// Records with at least two factors present.
    pub multi_factor: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceReport {
    pub total: usize,
    pub factors: Vec<FactorCount>,
    pub co_occurrence: CoOccurrence,
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

pub fn co_occurrence(crashes: &[CrashRecord], engineer: &FeatureEngineer) -> CoOccurrence {
    let multi = crashes
        .iter()
        .filter(|r| factor_flags(r, engineer).iter().filter(|&&b| b).count() >= 2)
        .count();
    CoOccurrence {
        multi_factor: multi,
        percent: percent(multi, crashes.len()),
    }
}

pub fn factor_prevalence(crashes: &[CrashRecord], engineer: &FeatureEngineer) -> PrevalenceReport {
    let mut counts = [0usize; 6];
    for r in crashes {
        for (c, f) in counts.iter_mut().zip(factor_flags(r, engineer)) {
            *c += f as usize;
        }
    }
    PrevalenceReport {
        total: crashes.len(),
        factors: PREVALENCE_FACTORS
            .iter()
            .zip(counts)
            .map(|(name, count)| FactorCount {
                factor: name.to_string(),
                count,
                percent: percent(count, crashes.len()),
            })
            .collect(),
        co_occurrence: co_occurrence(crashes, engineer),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::base_record;

    #[test]
    fn empty_set_is_all_zero() {
        let r = factor_prevalence(&[], &FeatureEngineer::default_crss());
        assert_eq!(r.total, 0);
        assert!(r.factors.iter().all(|f| f.count == 0 && f.percent == 0.0));
        assert_eq!(r.co_occurrence.percent, 0.0);
    }

    #[test]
    fn all_night_records() {
        let recs: Vec<CrashRecord> = (0..10).map(|i| base_record(&i.to_string()).with("HOUR", 23.0)).collect();
        let r = factor_prevalence(&recs, &FeatureEngineer::default_crss());
        let night = r.factors.iter().find(|f| f.factor == "night").unwrap();
        assert_eq!(night.percent, 100.0);
        assert_eq!(r.co_occurrence.multi_factor, 0);
    }
}
