//! Intervention impact: how many grid cells a score threshold flags and how
//! much crash-probability mass those cells carry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SafetyAssessment;

pub const DEFAULT_THRESHOLDS: [f64; 6] = [20.0, 40.0, 50.0, 60.0, 70.0, 80.0];
pub const DEFAULT_COMPLIANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub threshold: f64,
    pub flagged: usize,
    pub flagged_percent: f64,
    /// `compliance × (flagged p_crash mass / total p_crash mass) × 100`.
    pub reduction_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub compliance: f64,
    pub cells: usize,
    pub rows: Vec<ImpactRow>,
}

/// A cell is flagged when its calibrated score is at or below the threshold.
pub fn simulate_impact(
    assessments: &[SafetyAssessment],
    crash_probs: &[f64],
    thresholds: &[f64],
    compliance: f64,
) -> Result<ImpactReport> {
    if !(0.0..=1.0).contains(&compliance) {
        return Err(Error::Validation(format!("compliance {compliance} outside [0, 1]")));
    }
    if assessments.len() != crash_probs.len() {
        return Err(Error::Validation(format!(
            "{} assessments but {} crash probabilities",
            assessments.len(),
            crash_probs.len()
        )));
    }
    let n = assessments.len();
    let total_mass: f64 = crash_probs.iter().sum();
    let rows = thresholds
        .iter()
        .map(|&threshold| {
            let (mut flagged, mut mass) = (0, 0.0);
            for (a, &p) in assessments.iter().zip(crash_probs) {
                if a.calibrated_score <= threshold {
                    flagged += 1;
                    mass += p;
                }
            }
            ImpactRow {
                threshold,
                flagged,
                flagged_percent: if n == 0 { 0.0 } else { 100.0 * flagged as f64 / n as f64 },
                reduction_percent: if total_mass > 0.0 {
                    compliance * mass / total_mass * 100.0
                } else {
                    0.0
                },
            }
        })
        .collect();
    Ok(ImpactReport {
        compliance,
        cells: n,
        rows,
    })
}

/// `p_crash = 1 − raw / 100` for each assessment.
pub fn crash_probabilities(assessments: &[SafetyAssessment]) -> Vec<f64> {
    assessments.iter().map(|a| 1.0 - a.raw_score / 100.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RiskLevel;

    fn a(score: f64) -> SafetyAssessment {
        SafetyAssessment {
            raw_score: score,
            calibrated_score: score,
            applied_penalties: vec![],
            risk_level: RiskLevel::Medium,
        }
    }

    #[test]
    fn bounds_and_linearity() {
        let cells: Vec<SafetyAssessment> = [10.0, 30.0, 55.0, 90.0].map(a).to_vec();
        let p = crash_probabilities(&cells);
        let full = simulate_impact(&cells, &p, &[5.0, 30.0, 100.0], 1.0).unwrap();
        assert_eq!(full.rows[0].flagged_percent, 0.0);
        assert_eq!(full.rows[0].reduction_percent, 0.0);
        assert_eq!(full.rows[2].flagged_percent, 100.0);
        assert!((full.rows[2].reduction_percent - 100.0).abs() < 1e-12);
        // Cells at 10 and 30 carry 0.9 + 0.7 of 2.15 total mass.
        assert!((full.rows[1].reduction_percent - 1.6 / 2.15 * 100.0).abs() < 1e-9);
        let half = simulate_impact(&cells, &p, &[5.0, 30.0, 100.0], 0.5).unwrap();
        for (h, f) in half.rows.iter().zip(&full.rows) {
            assert!((h.reduction_percent - f.reduction_percent / 2.0).abs() < 1e-12);
        }
        assert!(simulate_impact(&cells, &p, &[50.0], 1.5).is_err());
    }
}
