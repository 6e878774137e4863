//! Rule-based multiplicative score penalties.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::FeatureSchema;
use crate::types::{AppliedPenalty, DrivingContext};

const DEFAULT_TABLE_JSON: &str = include_str!("../../../../config/calibration_default.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    RoadSurface,
    Weather,
    Lighting,
    Speed,
    VruPresence,
    Night,
    Compound,
}

impl Factor {
    pub fn name(self) -> &'static str {
        match self {
            Factor::RoadSurface => "road_surface",
            Factor::Weather => "weather",
            Factor::Lighting => "lighting",
            Factor::Speed => "speed",
            Factor::VruPresence => "vru_presence",
            Factor::Night => "night",
            Factor::Compound => "compound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Condition {
    /// Feature value equals one of `values`.
    In { feature: String, values: Vec<f64> },
    /// `min <= value < max`; a missing bound is open.
    Range {
        feature: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
    },
    /// Fires when enough distinct factors have fired.
    Compound,
}

impl Condition {
    pub fn feature(&self) -> Option<&str> {
        match self {
            Condition::In { feature, .. } | Condition::Range { feature, .. } => Some(feature),
            Condition::Compound => None,
        }
    }

    pub fn matches(&self, value: f64) -> bool {
        match self {
            Condition::In { values, .. } => values.contains(&value),
            Condition::Range { min, max, .. } => {
                min.is_none_or(|m| value >= m) && max.is_none_or(|m| value < m)
            }
            Condition::Compound => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRule {
    pub rule_id: String,
    pub factor: Factor,
    pub condition: Condition,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    #[serde(default = "one")]
    pub version: u32,
    #[serde(default = "two")]
    pub compound_threshold: usize,
    pub rules: Vec<CalibrationRule>,
}

fn one() -> u32 {
    1
}

fn two() -> usize {
    2
}

impl CalibrationTable {
    pub fn default_table() -> Self {
        Self::from_json(DEFAULT_TABLE_JSON).expect("bundled calibration table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: CalibrationTable = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::HashSet::new();
        for r in &self.rules {
            if !(r.alpha > 0.0 && r.alpha <= 1.0) {
                return Err(Error::Calibration(format!(
                    "rule `{}` has alpha {} outside (0, 1]",
                    r.rule_id, r.alpha
                )));
            }
            if !ids.insert(r.rule_id.as_str()) {
                return Err(Error::Calibration(format!("duplicate rule id `{}`", r.rule_id)));
            }
            let compound_cond = matches!(r.condition, Condition::Compound);
            if compound_cond != (r.factor == Factor::Compound) {
                return Err(Error::Calibration(format!(
                    "rule `{}`: compound condition and compound factor must go together",
                    r.rule_id
                )));
            }
        }
        if self.rules.iter().filter(|r| r.factor == Factor::Compound).count() > 1 {
            return Err(Error::Calibration("at most one compound rule is allowed".into()));
        }
        if self.compound_threshold == 0 {
            return Err(Error::Calibration("compound_threshold must be at least 1".into()));
        }
        Ok(())
    }

    pub fn compile(&self, schema: &FeatureSchema) -> Result<CompiledCalibration> {
        self.validate()?;
        let mut rules = Vec::with_capacity(self.rules.len());
        for r in &self.rules {
            let index = match r.condition.feature() {
                Some(f) => Some(schema.index_of(f).ok_or_else(|| {
                    Error::Calibration(format!("rule `{}` reads `{f}`, which schema `{}` lacks", r.rule_id, schema.schema_id()))
                })?),
                None => None,
            };
            rules.push((r.clone(), index));
        }
        // Canonical order makes the product independent of file order.
        rules.sort_by(|a, b| (a.0.factor, &a.0.rule_id).cmp(&(b.0.factor, &b.0.rule_id)));
        Ok(CompiledCalibration {
            schema_id: schema.schema_id().to_string(),
            compound_threshold: self.compound_threshold,
            rules,
        })
    }
}

/// Calibration table bound to one schema's feature indices.
#[derive(Debug, Clone)]
pub struct CompiledCalibration {
    schema_id: String,
    compound_threshold: usize,
    rules: Vec<(CalibrationRule, Option<usize>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrated {
    pub calibrated_score: f64,
    pub applied_penalties: Vec<AppliedPenalty>,
}

impl CompiledCalibration {
    pub fn schema_id(&self) -> &str {
        &self.schema_id
    }

    pub fn rules(&self) -> impl Iterator<Item = &CalibrationRule> {
        self.rules.iter().map(|(r, _)| r)
    }

    /// Rules that fire for a context, at most one per factor (lowest alpha,
    /// then lowest rule id), compound last.
    pub fn fired(&self, context: &DrivingContext) -> Vec<&CalibrationRule> {
        let mut chosen: Vec<&CalibrationRule> = Vec::new();
        let mut compound = None;
        for (rule, index) in &self.rules {
            let Some(j) = *index else {
                compound = Some(rule);
                continue;
            };
            if !rule.condition.matches(context.values[j]) {
                continue;
            }
            match chosen.iter_mut().find(|c| c.factor == rule.factor) {
                Some(slot) => {
                    if (rule.alpha, &rule.rule_id) < (slot.alpha, &slot.rule_id) {
                        *slot = rule;
                    }
                }
                None => chosen.push(rule),
            }
        }
        if let Some(c) = compound {
            if chosen.len() >= self.compound_threshold {
                chosen.push(c);
            }
        }
        chosen
    }

    /// `raw × Π alpha` over fired rules, clamped to `[0, 100]`.
    pub fn calibrate(&self, raw: f64, context: &DrivingContext) -> Calibrated {
        let fired = self.fired(context);
        let product: f64 = fired.iter().map(|r| r.alpha).product();
        Calibrated {
            calibrated_score: (raw * product).clamp(0.0, 100.0),
            applied_penalties: fired
                .into_iter()
                .map(|r| AppliedPenalty {
                    rule_id: r.rule_id.clone(),
                    alpha: r.alpha,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_has_published_alphas() {
        let t = CalibrationTable::default_table();
        let alpha = |id: &str| t.rules.iter().find(|r| r.rule_id == id).unwrap().alpha;
        let expected = [
            ("road_ice", 0.60),
            ("road_snow", 0.70),
            ("road_wet", 0.85),
            ("weather_snow", 0.80),
            ("weather_rain", 0.90),
            ("weather_fog_other", 0.85),
            ("lighting_dark_unlit", 0.75),
            ("lighting_dark_lit", 0.85),
            ("lighting_dawn_dusk", 0.92),
            ("speed_very_high", 0.65),
            ("speed_high", 0.75),
            ("speed_moderate_high", 0.88),
            ("vru_present", 0.88),
            ("night", 0.90),
            ("compound", 0.95),
        ];
        assert_eq!(t.rules.len(), expected.len());
        for (id, a) in expected {
            assert_eq!(alpha(id), a, "{id}");
        }
        assert_eq!(t.compound_threshold, 2);
    }

    #[test]
    fn alpha_above_one_rejected() {
        let mut t = CalibrationTable::default_table();
        t.rules[0].alpha = 1.2;
        assert!(t.validate().is_err());
        t.rules[0].alpha = 0.0;
        assert!(t.validate().is_err());
    }

    #[test]
    fn range_bounds_are_half_open() {
        let c = Condition::Range {
            feature: "x".into(),
            min: Some(10.0),
            max: Some(20.0),
        };
        assert!(c.matches(10.0) && c.matches(19.99));
        assert!(!c.matches(20.0) && !c.matches(9.99));
    }

    #[test]
    fn json_round_trip() {
        let t = CalibrationTable::default_table();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(CalibrationTable::from_json(&s).unwrap(), t);
    }
}
