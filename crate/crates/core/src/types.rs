//! Shared domain vocabulary: contexts, labels, probabilities, risk levels and
//! the classifier contract every scoring model satisfies.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::schema::{FeatureKind, FeatureSchema};

/// Binary outcome. Crash is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Safe,
    Crash,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Safe => 0,
            Label::Crash => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Safe),
            1 => Some(Label::Crash),
            _ => None,
        }
    }

    pub fn is_crash(self) -> bool {
        self == Label::Crash
    }
}

/// One scenario's feature vector, indexed by a [`FeatureSchema`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingContext {
    pub schema_id: Arc<str>,
    pub values: Vec<f64>,
}

impl DrivingContext {
    pub fn new(schema_id: impl Into<Arc<str>>, values: Vec<f64>) -> Self {
        Self {
            schema_id: schema_id.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }
}

/// A single problem found by [`validate_context`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContextViolation {
    SchemaMismatch { expected: String, found: String },
    LengthMismatch { expected: usize, found: usize },
    NonBinary { feature: String, value: f64 },
    NonFinite { feature: String },
}

impl fmt::Display for ContextViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextViolation::SchemaMismatch { expected, found } => {
                write!(f, "schema mismatch: expected `{expected}`, found `{found}`")
            }
            ContextViolation::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected} values, found {found}")
            }
            ContextViolation::NonBinary { feature, value } => {
                write!(f, "binary feature `{feature}` holds {value}")
            }
            ContextViolation::NonFinite { feature } => {
                write!(f, "feature `{feature}` is not finite")
            }
        }
    }
}

/// Check a context against a schema. Violations are returned as data; an empty
/// list means the context is well formed.
pub fn validate_context(context: &DrivingContext, schema: &FeatureSchema) -> Vec<ContextViolation> {
    let mut out = Vec::new();
    if *context.schema_id != *schema.schema_id() {
        out.push(ContextViolation::SchemaMismatch {
            expected: schema.schema_id().to_string(),
            found: context.schema_id.to_string(),
        });
    }
    if context.values.len() != schema.len() {
        out.push(ContextViolation::LengthMismatch {
            expected: schema.len(),
            found: context.values.len(),
        });
    }
    for (spec, &v) in schema.features().iter().zip(&context.values) {
        if !v.is_finite() {
            out.push(ContextViolation::NonFinite {
                feature: spec.name.clone(),
            });
        } else if spec.kind == FeatureKind::Binary && v != 0.0 && v != 1.0 {
            out.push(ContextViolation::NonBinary {
                feature: spec.name.clone(),
                value: v,
            });
        }
    }
    out
}

/// Posterior class probabilities for one context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProbabilities {
    pub p_safe: f64,
    pub p_crash: f64,
}

impl ClassProbabilities {
    /// Build from the crash probability; `p_crash` is clamped to `[0, 1]`.
    pub fn from_crash(p_crash: f64) -> Self {
        let p_crash = p_crash.clamp(0.0, 1.0);
        Self {
            p_safe: 1.0 - p_crash,
            p_crash,
        }
    }
}

/// Five operational risk levels, ordered from most to least dangerous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskLevel {
    Critical,
    High,
    Medium,
    Low,
    Excellent,
}

impl RiskLevel {
    pub const ALL: [RiskLevel; 5] = [
        RiskLevel::Critical,
        RiskLevel::High,
        RiskLevel::Medium,
        RiskLevel::Low,
        RiskLevel::Excellent,
    ];

    /// Ordinal rank, 0 for Critical up to 4 for Excellent.
    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn from_rank(rank: usize) -> Option<Self> {
        Self::ALL.get(rank).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            RiskLevel::Critical => "Critical",
            RiskLevel::High => "High",
            RiskLevel::Medium => "Medium",
            RiskLevel::Low => "Low",
            RiskLevel::Excellent => "Excellent",
        }
    }
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedPenalty {
    pub rule_id: String,
    pub alpha: f64,
}

/// Raw and calibrated score for one context plus the penalties that fired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyAssessment {
    pub raw_score: f64,
    pub calibrated_score: f64,
    pub applied_penalties: Vec<AppliedPenalty>,
    pub risk_level: RiskLevel,
}

impl SafetyAssessment {
    pub fn alpha_product(&self) -> f64 {
        self.applied_penalties.iter().map(|p| p.alpha).product()
    }
}

/// Model-agnostic binary crash classifier.
pub trait Classifier: Send + Sync {
    fn schema_id(&self) -> &str;

    fn n_features(&self) -> usize;

    fn predict_proba(&self, context: &DrivingContext) -> Result<ClassProbabilities>;

    /// Crash probability for a raw feature row, skipping schema checks.
    fn predict_row(&self, row: &[f64]) -> f64;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureSchema;

    #[test]
    fn well_formed_context_validates() {
        let schema = FeatureSchema::default_crss();
        let ctx = DrivingContext::new(schema.schema_id(), vec![0.0; schema.len()]);
        assert!(validate_context(&ctx, &schema).is_empty());
    }

    #[test]
    fn short_vector_is_length_mismatch() {
        let schema = FeatureSchema::default_crss();
        let ctx = DrivingContext::new(schema.schema_id(), vec![0.0; 63]);
        let v = validate_context(&ctx, &schema);
        assert!(v.contains(&ContextViolation::LengthMismatch {
            expected: 64,
            found: 63
        }));
        assert!(v[0].to_string().contains("length mismatch"));
    }

    #[test]
    fn half_in_binary_slot_names_feature() {
        let schema = FeatureSchema::default_crss();
        let idx = schema.index_of("IS_NIGHT").unwrap();
        let mut values = vec![0.0; schema.len()];
        values[idx] = 0.5;
        let ctx = DrivingContext::new(schema.schema_id(), values);
        let v = validate_context(&ctx, &schema);
        assert_eq!(
            v,
            vec![ContextViolation::NonBinary {
                feature: "IS_NIGHT".into(),
                value: 0.5
            }]
        );
    }

    #[test]
    fn non_finite_is_reported() {
        let schema = FeatureSchema::default_crss();
        let mut values = vec![0.0; schema.len()];
        values[3] = f64::NAN;
        let ctx = DrivingContext::new(schema.schema_id(), values);
        assert!(matches!(
            validate_context(&ctx, &schema)[0],
            ContextViolation::NonFinite { .. }
        ));
    }

    #[test]
    fn risk_levels_are_ordered() {
        for w in RiskLevel::ALL.windows(2) {
            assert!(w[0] < w[1]);
            assert_eq!(w[0].rank() + 1, w[1].rank());
        }
        assert_eq!(RiskLevel::from_rank(4), Some(RiskLevel::Excellent));
        assert_eq!(RiskLevel::from_rank(5), None);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let p = ClassProbabilities::from_crash(0.3);
        assert!((p.p_safe + p.p_crash - 1.0).abs() < 1e-12);
        let p = ClassProbabilities::from_crash(1.7);
        assert_eq!(p.p_crash, 1.0);
    }

    #[test]
    fn core_types_round_trip_json() {
        let a = SafetyAssessment {
            raw_score: 80.0,
            calibrated_score: 48.0,
            applied_penalties: vec![AppliedPenalty {
                rule_id: "road_ice".into(),
                alpha: 0.6,
            }],
            risk_level: RiskLevel::Medium,
        };
        let s = serde_json::to_string(&a).unwrap();
        let b: SafetyAssessment = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(s, serde_json::to_string(&b).unwrap());
    }
}
