//! Scenario-type validation: mean crash probability of safe, near-miss and
//! collision episodes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::kinematics::{AgentType, AggressiveFlag};
use crate::ingest::{
    base_record, extract_kinematics, FeatureEngineer, KinematicConfig, KinematicFeatures, ScenarioConditions,
    ScenarioType, TrajectoryScenario, UnknownCounts,
};
use crate::types::{Classifier, DrivingContext};

const MPS_TO_MPH: f64 = 2.236_936_292_054_402;

/// Crash-schema context for a trajectory episode: the neutral base record
/// with the episode's conditions, its peak ego speed, VRU counts and
/// behavior flags laid over it.
pub fn scenario_context(
    engineer: &FeatureEngineer,
    scenario: &TrajectoryScenario,
    features: &KinematicFeatures,
    conditions: &ScenarioConditions,
) -> Result<DrivingContext> {
    let peds = scenario.count_type(AgentType::Pedestrian) as f64;
    let cyclists = scenario.count_type(AgentType::Cyclist) as f64;
    let harm = if peds > 0.0 {
        8.0
    } else if cyclists > 0.0 {
        9.0
    } else {
        12.0
    };
    let speeding = features.aggressive_flags.contains(&AggressiveFlag::SpeedViolation);
    let aggressive = features.aggressive_flags.iter().any(|f| *f != AggressiveFlag::SpeedViolation);
    let record = base_record(&scenario.scenario_id)
        .with("HOUR", conditions.hour)
        .with("LGT_COND", conditions.lgt_cond)
        .with("WEATHER", conditions.weather)
        .with("VSURCOND", conditions.surface)
        .with("VSPD_LIM", conditions.speed_limit)
        .with("TRAV_SP", (features.max_speed * MPS_TO_MPH).round())
        .with("pedestrian_count", peds)
        .with("cyclist_count", cyclists)
        .with("PEDS", peds)
        .with("PERNOTMVIT", peds + cyclists)
        .with("HARM_EV", harm)
        .with("SPEEDREL", if speeding { 1.0 } else { 0.0 })
        .with("AGGR_DRIVING", if aggressive { 1.0 } else { 0.0 });
    engineer.engineer(&record, &mut UnknownCounts::new())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInput {
    pub scenario_id: String,
    pub scenario_type: ScenarioType,
    pub features: KinematicFeatures,
    pub context: DrivingContext,
}

/// Extract kinematics, type and context for every episode. With a
/// conditions table, every scenario must have a row; without one the neutral
/// defaults apply.
pub fn scenario_inputs(
    engineer: &FeatureEngineer,
    scenarios: &[TrajectoryScenario],
    conditions: Option<&BTreeMap<String, ScenarioConditions>>,
    kinematics: &KinematicConfig,
) -> Result<Vec<ScenarioInput>> {
    scenarios
        .iter()
        .map(|s| {
            let c = match conditions {
                Some(map) => *map.get(&s.scenario_id).ok_or_else(|| {
                    Error::Validation(format!("no conditions row for scenario `{}`", s.scenario_id))
                })?,
                None => ScenarioConditions::default(),
            };
            let features = extract_kinematics(s, kinematics)?;
            let context = scenario_context(engineer, s, &features, &c)?;
            Ok(ScenarioInput {
                scenario_id: s.scenario_id.clone(),
                scenario_type: ScenarioType::from_features(&features),
                features,
                context,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeGroup {
    pub scenario_type: ScenarioType,
    pub n: usize,
    pub mean_p_crash: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub groups: Vec<TypeGroup>,
    /// mean(safe) < mean(near-miss) < mean(collision).
    pub monotonic: bool,
}

impl ValidationReport {
    pub fn mean(&self, t: ScenarioType) -> f64 {
        self.groups
            .iter()
            .find(|g| g.scenario_type == t)
            .map(|g| g.mean_p_crash)
            .expect("every type has a group")
    }
}

pub fn validate_by_scenario_type(
    model: &dyn Classifier,
    scenarios: &[(DrivingContext, ScenarioType)],
) -> Result<ValidationReport> {
    let mut groups = Vec::new();
    for t in ScenarioType::ALL {
        let probs: Vec<f64> = scenarios
            .iter()
            .filter(|(_, ty)| *ty == t)
            .map(|(c, _)| model.predict_proba(c).map(|p| p.p_crash))
            .collect::<Result<_>>()?;
        if probs.is_empty() {
            return Err(Error::Validation(format!("no `{}` scenarios", t.name())));
        }
        groups.push(TypeGroup {
            scenario_type: t,
            n: probs.len(),
            mean_p_crash: probs.iter().sum::<f64>() / probs.len() as f64,
        });
    }
    let monotonic = groups[0].mean_p_crash < groups[1].mean_p_crash && groups[1].mean_p_crash < groups[2].mean_p_crash;
    Ok(ValidationReport { groups, monotonic })
}
