//! Per-scenario driving conditions that accompany trajectory files. Trajectory
//! logs carry no time-of-day, lighting or weather, so these come from a
//! companion CSV keyed by scenario id.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConditions {
    pub hour: f64,
    /// LGT_COND code.
    pub lgt_cond: f64,
    /// WEATHER code.
    pub weather: f64,
    /// VSURCOND code.
    pub surface: f64,
    /// Posted limit in mph.
    pub speed_limit: f64,
}

impl Default for ScenarioConditions {
    /// Noon, daylight, clear, dry, 35 mph.
    fn default() -> Self {
        Self {
            hour: 12.0,
            lgt_cond: 1.0,
            weather: 1.0,
            surface: 1.0,
            speed_limit: 35.0,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    scenario_id: String,
    hour: f64,
    lgt_cond: f64,
    weather: f64,
    surface: f64,
    speed_limit: f64,
}

pub fn read_conditions<R: Read>(reader: R) -> Result<BTreeMap<String, ScenarioConditions>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = BTreeMap::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row?;
        let c = ScenarioConditions {
            hour: row.hour,
            lgt_cond: row.lgt_cond,
            weather: row.weather,
            surface: row.surface,
            speed_limit: row.speed_limit,
        };
        if out.insert(row.scenario_id.clone(), c).is_some() {
            return Err(Error::Load(format!(
                "line {}: duplicate scenario `{}` in conditions file",
                i + 2,
                row.scenario_id
            )));
        }
    }
    Ok(out)
}

pub fn load_conditions(path: &Path) -> Result<BTreeMap<String, ScenarioConditions>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_conditions(file)
}

pub fn write_conditions<W: Write>(writer: W, conditions: &[(String, ScenarioConditions)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (id, c) in conditions {
        w.serialize(Row {
            scenario_id: id.clone(),
            hour: c.hour,
            lgt_cond: c.lgt_cond,
            weather: c.weather,
            surface: c.surface,
            speed_limit: c.speed_limit,
        })?;
    }
    w.flush().map_err(|e| Error::Load(e.to_string()))?;
    Ok(())
}
