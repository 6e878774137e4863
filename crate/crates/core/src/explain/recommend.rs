//! Score-improvement suggestions for the factors a driver can act on.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::explain::shap::ShapExplanation;
use crate::ingest::{CrashRecord, FeatureEngineer, UnknownCounts};
use crate::scoring::{CompiledCalibration, Factor};
use crate::types::DrivingContext;

const DARK_UNLIT: f64 = 2.0;
const DARK_LIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub factor: Factor,
    pub change: String,
    /// Calibrated-score gain with the model's raw score held fixed.
    pub estimated_gain: f64,
    /// Score-scale SHAP contribution of the features the change touches
    /// (−100 × Σ φ); negative means those features currently lower the score.
    pub shap_contribution: f64,
}

fn speed_fix(record: &CrashRecord) -> Option<(CrashRecord, String)> {
    let (speed, limit) = (record.get("TRAV_SP")?, record.get("VSPD_LIM")?);
    (speed > limit).then(|| {
        (
            record.clone().with("TRAV_SP", limit),
            format!("reduce travel speed from {speed} to the posted {limit} mph"),
        )
    })
}

fn lighting_fix(record: &CrashRecord) -> Option<(CrashRecord, String)> {
    (record.get("LGT_COND")? == DARK_UNLIT).then(|| {
        (
            record.clone().with("LGT_COND", DARK_LIT),
            "take a lit route instead of an unlit one".to_string(),
        )
    })
}

/// For each fired mutable factor (speed over the limit, unlit darkness),
/// re-assess the context with that factor made safe and report the
/// calibrated-score delta. Only positive gains are returned, largest first.
pub fn recommend(
    explanation: &ShapExplanation,
    calibration: &CompiledCalibration,
    engineer: &FeatureEngineer,
    context: &DrivingContext,
) -> Result<Vec<Recommendation>> {
    let raw = 100.0 * (1.0 - explanation.model_output);
    let current = calibration.calibrate(raw, context).calibrated_score;
    let fired = calibration.fired(context);
    let record = engineer.record_from_context("recommend", context)?;

    let candidates: [(Factor, fn(&CrashRecord) -> Option<(CrashRecord, String)>); 2] =
        [(Factor::Speed, speed_fix), (Factor::Lighting, lighting_fix)];
    let mut out = Vec::new();
    for (factor, fix) in candidates {
        if !fired.iter().any(|r| r.factor == factor) {
            continue;
        }
        let Some((changed, change)) = fix(&record) else {
            continue;
        };
        let modified = engineer.engineer(&changed, &mut UnknownCounts::new())?;
        let gain = calibration.calibrate(raw, &modified).calibrated_score - current;
        if gain <= 0.0 {
            continue;
        }
        let touched: f64 = context
            .values
            .iter()
            .zip(&modified.values)
            .zip(&explanation.contributions)
            .filter(|((a, b), _)| a != b)
            .map(|(_, phi)| phi)
            .sum();
        out.push(Recommendation {
            factor,
            change,
            estimated_gain: gain,
            shap_contribution: -100.0 * touched,
        });
    }
    out.sort_by(|a, b| b.estimated_gain.total_cmp(&a.estimated_gain));
    Ok(out)
}
