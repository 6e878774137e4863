//! Rule-table expected risk levels for grid cells, the reference side of the
//! ordinal confusion check. The table is documented in
//! `docs/expected_levels.md`.

use serde::{Deserialize, Serialize};

use crate::analysis::grid::ScenarioGrid;
use crate::error::{Error, Result};
use crate::ingest::{CrashRecord, FeatureEngineer};
use crate::types::RiskLevel;

/// Points per factor. Major factors are precipitation and reduced light;
/// minor factors are a wet or icy road, a vulnerable road user, and a night
/// hour. Travelling at least `speeding_margin` mph over the limit adds
/// `speeding_points`. A total at or below `cuts[0]` is Low, at or below
/// `cuts[1]` Medium, at or below `cuts[2]` High, and Critical above that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpectedLevelRules {
    pub major_points: u32,
    pub minor_points: u32,
    pub speeding_margin: f64,
    pub speeding_points: u32,
    pub cuts: [u32; 3],
}

impl Default for ExpectedLevelRules {
    fn default() -> Self {
        Self {
            major_points: 2,
            minor_points: 1,
            speeding_margin: 10.0,
            speeding_points: 1,
            cuts: [0, 1, 2],
        }
    }
}

impl ExpectedLevelRules {
    pub fn validate(&self) -> Result<()> {
        if !(self.cuts[0] <= self.cuts[1] && self.cuts[1] <= self.cuts[2]) {
            return Err(Error::Validation(format!("expected-level cuts {:?} are not ordered", self.cuts)));
        }
        Ok(())
    }

    pub fn points(&self, record: &CrashRecord, engineer: &FeatureEngineer) -> Result<u32> {
        let get = |c: &str| {
            record
                .get(c)
                .ok_or_else(|| Error::Validation(format!("record `{}` lacks `{c}`", record.casenum)))
        };
        let codes = engineer.codes();
        let major = codes.in_set("adverse_weather", get("WEATHER")?) as u32
            + codes.in_set("poor_lighting", get("LGT_COND")?) as u32;
        let vru = get("pedestrian_count")? + get("cyclist_count")? > 0.0;
        let minor = codes.in_set("adverse_surface", get("VSURCOND")?) as u32
            + vru as u32
            + engineer.config().is_night(get("HOUR")?) as u32;
        let speeding = get("TRAV_SP")? - get("VSPD_LIM")? >= self.speeding_margin;
        Ok(self.major_points * major + self.minor_points * minor + self.speeding_points * speeding as u32)
    }

    pub fn level(&self, points: u32) -> RiskLevel {
        match points {
            p if p <= self.cuts[0] => RiskLevel::Low,
            p if p <= self.cuts[1] => RiskLevel::Medium,
            p if p <= self.cuts[2] => RiskLevel::High,
            _ => RiskLevel::Critical,
        }
    }
}

pub fn expected_levels(grid: &ScenarioGrid, rules: &ExpectedLevelRules, engineer: &FeatureEngineer) -> Result<Vec<RiskLevel>> {
    rules.validate()?;
    grid.cells
        .iter()
        .map(|c| Ok(rules.level(rules.points(&c.record, engineer)?)))
        .collect()
}
