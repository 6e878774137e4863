//! Risk multipliers: conditional crash rate of a factor combination over the
//! marginal crash rate of an exposure set.

use serde::{Deserialize, Serialize};

use crate::analysis::prevalence::{co_occurrence, CoOccurrence};
use crate::error::{Error, Result};
use crate::ingest::{CrashRecord, FeatureEngineer, LabeledDataset};
use crate::scoring::Condition;
use crate::types::Label;

/// A predicate over engineered features in disjunctive normal form: the row
/// matches if every condition of any one term holds. One empty term matches
/// everything; no terms match nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorCombo {
    pub name: String,
    pub any_of: Vec<Vec<Condition>>,
}

fn is(feature: &str, value: f64) -> Condition {
    Condition::In {
        feature: feature.to_string(),
        values: vec![value],
    }
}

fn at_least(feature: &str, min: f64) -> Condition {
    Condition::Range {
        feature: feature.to_string(),
        min: Some(min),
        max: None,
    }
}

impl FactorCombo {
    pub fn all(name: &str, conditions: Vec<Condition>) -> Self {
        Self {
            name: name.to_string(),
            any_of: vec![conditions],
        }
    }

    pub fn baseline() -> Self {
        Self::all("baseline", Vec::new())
    }

    /// Union of several combos.
    pub fn union(name: &str, parts: &[FactorCombo]) -> Self {
        Self {
            name: name.to_string(),
            any_of: parts.iter().flat_map(|p| p.any_of.iter().cloned()).collect(),
        }
    }
}

/// The reported combinations and single-factor rows, plus the baseline.
pub fn default_combos() -> Vec<FactorCombo> {
    vec![
        FactorCombo::baseline(),
        FactorCombo::all("night + adverse weather", vec![is("IS_NIGHT", 1.0), is("ADVERSE_WEATHER", 1.0)]),
        FactorCombo::all("urban + rush hour", vec![is("URBANICITY", 1.0), is("IS_RUSH_HOUR", 1.0)]),
        FactorCombo::all(
            "vru + urban + night",
            vec![at_least("total_vru", 1.0), is("URBANICITY", 1.0), is("IS_NIGHT", 1.0)],
        ),
        FactorCombo::all(
            "high speed + poor conditions",
            vec![at_least("SPEED_OVER", 10.0), is("ADVERSE_CONDITIONS", 1.0)],
        ),
        FactorCombo::all("rush hour", vec![is("IS_RUSH_HOUR", 1.0)]),
        FactorCombo::all("poor lighting", vec![is("POOR_LIGHTING", 1.0)]),
        FactorCombo::all("adverse weather", vec![is("ADVERSE_WEATHER", 1.0)]),
        FactorCombo::all("night", vec![is("IS_NIGHT", 1.0)]),
        FactorCombo::all("vru", vec![at_least("total_vru", 1.0)]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierRow {
    pub combo: String,
    /// Exposure rows matching the combo.
    pub support: usize,
    pub crashes: usize,
    /// Undefined when nothing matches.
    pub crash_rate: Option<f64>,
    pub multiplier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierReport {
    pub exposure_rows: usize,
    pub marginal_crash_rate: f64,
    pub rows: Vec<MultiplierRow>,
    pub co_occurrence: CoOccurrence,
}

impl MultiplierReport {
    pub fn row(&self, combo: &str) -> Option<&MultiplierRow> {
        self.rows.iter().find(|r| r.combo == combo)
    }
}

type Compiled = Vec<Vec<(usize, Condition)>>;

fn compile(combo: &FactorCombo, exposure: &LabeledDataset) -> Result<Compiled> {
    combo
        .any_of
        .iter()
        .map(|term| {
            term.iter()
                .map(|c| {
                    let f = c.feature().ok_or_else(|| {
                        Error::Validation(format!("combo `{}` uses a compound condition", combo.name))
                    })?;
                    let j = exposure
                        .schema
                        .index_of(f)
                        .ok_or_else(|| Error::Validation(format!("combo `{}` names unknown feature `{f}`", combo.name)))?;
                    Ok((j, c.clone()))
                })
                .collect()
        })
        .collect()
}

/// `crashes` supply the multi-factor co-occurrence count; rates come from the
/// labeled `exposure` set.
pub fn risk_multipliers(
    crashes: &[CrashRecord],
    engineer: &FeatureEngineer,
    exposure: &LabeledDataset,
    combos: &[FactorCombo],
) -> Result<MultiplierReport> {
    let n_crash = exposure.count(Label::Crash);
    if n_crash == 0 || n_crash == exposure.len() {
        return Err(Error::Validation("exposure set must contain both crash and safe rows".into()));
    }
    let marginal = n_crash as f64 / exposure.len() as f64;
    let rows = combos
        .iter()
        .map(|combo| {
            let terms = compile(combo, exposure)?;
            let (mut support, mut crashes) = (0, 0);
            for (ctx, label) in exposure.contexts.iter().zip(&exposure.labels) {
                let hit = terms
                    .iter()
                    .any(|term| term.iter().all(|(j, c)| c.matches(ctx.values[*j])));
                if hit {
                    support += 1;
                    crashes += (*label == Label::Crash) as usize;
                }
            }
            let crash_rate = (support > 0).then(|| crashes as f64 / support as f64);
            Ok(MultiplierRow {
                combo: combo.name.clone(),
                support,
                crashes,
                crash_rate,
                multiplier: crash_rate.map(|r| r / marginal),
            })
        })
        .collect::<Result<_>>()?;
    Ok(MultiplierReport {
        exposure_rows: exposure.len(),
        marginal_crash_rate: marginal,
        rows,
        co_occurrence: co_occurrence(crashes, engineer),
    })
}
