//! Full-factorial scenario grid rendered through feature engineering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{base_record, CrashRecord, FeatureEngineer, UnknownCounts};
use crate::types::DrivingContext;

/// One level of a grid factor: raw-column values laid over the base record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLevel {
    pub name: String,
    pub set: BTreeMap<String, f64>,
}

impl GridLevel {
    pub fn new(name: &str, set: &[(&str, f64)]) -> Self {
        Self {
            name: name.to_string(),
            set: set.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFactor {
    pub name: String,
    pub levels: Vec<GridLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGridSpec {
    pub factors: Vec<GridFactor>,
}

pub const TIME_OF_DAY: &str = "time_of_day";
pub const WEATHER: &str = "weather";
pub const LIGHTING: &str = "lighting";
pub const SPEED: &str = "speed";
pub const ROAD_CONDITION: &str = "road_condition";
pub const VRU_PRESENCE: &str = "vru_presence";

impl Default for ScenarioGridSpec {
    /// time 3 × weather 3 × lighting 4 × speed 4 × road 3 × VRU 2 = 864 cells
    /// over a 35 mph base record.
    fn default() -> Self {
        let factor = |name: &str, levels: Vec<GridLevel>| GridFactor {
            name: name.to_string(),
            levels,
        };
        Self {
            factors: vec![
                factor(
                    TIME_OF_DAY,
                    vec![
                        GridLevel::new("day", &[("HOUR", 12.0)]),
                        GridLevel::new("dusk", &[("HOUR", 19.0)]),
                        GridLevel::new("night", &[("HOUR", 2.0)]),
                    ],
                ),
                factor(
                    WEATHER,
                    vec![
                        GridLevel::new("clear", &[("WEATHER", 1.0)]),
                        GridLevel::new("rain", &[("WEATHER", 2.0)]),
                        GridLevel::new("snow", &[("WEATHER", 4.0)]),
                    ],
                ),
                factor(
                    LIGHTING,
                    vec![
                        GridLevel::new("daylight", &[("LGT_COND", 1.0)]),
                        GridLevel::new("dark-lit", &[("LGT_COND", 3.0)]),
                        GridLevel::new("dark-unlit", &[("LGT_COND", 2.0)]),
                        GridLevel::new("dawn-dusk", &[("LGT_COND", 5.0)]),
                    ],
                ),
                factor(
                    SPEED,
                    vec![
                        GridLevel::new("low", &[("TRAV_SP", 30.0)]),
                        GridLevel::new("moderate-high", &[("TRAV_SP", 42.0)]),
                        GridLevel::new("high", &[("TRAV_SP", 50.0)]),
                        GridLevel::new("very-high", &[("TRAV_SP", 60.0)]),
                    ],
                ),
                factor(
                    ROAD_CONDITION,
                    vec![
                        GridLevel::new("dry", &[("VSURCOND", 1.0)]),
                        GridLevel::new("wet", &[("VSURCOND", 2.0)]),
                        GridLevel::new("ice", &[("VSURCOND", 4.0)]),
                    ],
                ),
                factor(
                    VRU_PRESENCE,
                    vec![
                        GridLevel::new("absent", &[]),
                        GridLevel::new(
                            "present",
                            &[("pedestrian_count", 1.0), ("PEDS", 1.0), ("PERNOTMVIT", 1.0), ("HARM_EV", 8.0)],
                        ),
                    ],
                ),
            ],
        }
    }
}

impl ScenarioGridSpec {
    pub fn size(&self) -> usize {
        self.factors.iter().map(|f| f.levels.len()).product()
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    pub fn validate(&self, engineer: &FeatureEngineer) -> Result<()> {
        if self.factors.is_empty() {
            return Err(Error::Grid("grid has no factors".into()));
        }
        let raw = engineer.schema().raw_columns();
        for f in &self.factors {
            if f.levels.is_empty() {
                return Err(Error::Grid(format!("factor `{}` has no levels", f.name)));
            }
            if self.factors.iter().filter(|g| g.name == f.name).count() > 1 {
                return Err(Error::Grid(format!("factor `{}` listed twice", f.name)));
            }
            for level in &f.levels {
                if let Some(col) = level.set.keys().find(|c| !raw.contains(c)) {
                    return Err(Error::Grid(format!(
                        "level `{}/{}` sets `{col}`, which is not a raw column of schema `{}`",
                        f.name,
                        level.name,
                        engineer.schema().schema_id()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub index: usize,
    /// Level index per factor, in factor order.
    pub levels: Vec<usize>,
    pub record: CrashRecord,
    pub context: DrivingContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    pub spec: ScenarioGridSpec,
    pub cells: Vec<GridCell>,
}

impl ScenarioGrid {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contexts(&self) -> Vec<DrivingContext> {
        self.cells.iter().map(|c| c.context.clone()).collect()
    }

    pub fn level_name(&self, cell: &GridCell, factor: usize) -> &str {
        &self.spec.factors[factor].levels[cell.levels[factor]].name
    }
}

/// Level indices of cell `index` in row-major order: the last factor varies
/// fastest.
pub fn cell_levels(spec: &ScenarioGridSpec, mut index: usize) -> Vec<usize> {
    let mut levels = vec![0; spec.factors.len()];
    for (slot, f) in levels.iter_mut().zip(&spec.factors).rev() {
        *slot = index % f.levels.len();
        index /= f.levels.len();
    }
    levels
}

pub fn build_scenario_grid(spec: &ScenarioGridSpec, engineer: &FeatureEngineer) -> Result<ScenarioGrid> {
    spec.validate(engineer)?;
    let mut cells = Vec::with_capacity(spec.size());
    for index in 0..spec.size() {
        let levels = cell_levels(spec, index);
        let mut record = base_record(&format!("grid-{index:04}"));
        for (f, &l) in spec.factors.iter().zip(&levels) {
            for (col, v) in &f.levels[l].set {
                record.set(col, *v);
            }
        }
        let context = engineer.engineer(&record, &mut UnknownCounts::new())?;
        cells.push(GridCell {
            index,
            levels,
            record,
            context,
        });
    }
    Ok(ScenarioGrid {
        spec: spec.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_864_balanced_cells() {
        let engineer = FeatureEngineer::default_crss();
        let spec = ScenarioGridSpec::default();
        assert_eq!(spec.size(), 864);
        let grid = build_scenario_grid(&spec, &engineer).unwrap();
        assert_eq!(grid.len(), 864);
        for (fi, f) in spec.factors.iter().enumerate() {
            for l in 0..f.levels.len() {
                let n = grid.cells.iter().filter(|c| c.levels[fi] == l).count();
                assert_eq!(n, 864 / f.levels.len());
            }
        }
        let vru = spec.factor_index(VRU_PRESENCE).unwrap();
        assert_eq!(grid.cells.iter().filter(|c| c.levels[vru] == 1).count(), 432);
    }

    #[test]
    fn two_by_two_grid() {
        let engineer = FeatureEngineer::default_crss();
        let spec = ScenarioGridSpec {
            factors: vec![
                GridFactor {
                    name: "a".into(),
                    levels: vec![GridLevel::new("x", &[("HOUR", 1.0)]), GridLevel::new("y", &[("HOUR", 2.0)])],
                },
                GridFactor {
                    name: "b".into(),
                    levels: vec![GridLevel::new("x", &[("WEATHER", 1.0)]), GridLevel::new("y", &[("WEATHER", 2.0)])],
                },
            ],
        };
        let grid = build_scenario_grid(&spec, &engineer).unwrap();
        let levels: Vec<Vec<usize>> = grid.cells.iter().map(|c| c.levels.clone()).collect();
        assert_eq!(levels, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(grid.cells[3].record.get("WEATHER"), Some(2.0));
    }

    #[test]
    fn unmappable_level_is_a_grid_error() {
        let engineer = FeatureEngineer::default_crss();
        let mut spec = ScenarioGridSpec::default();
        spec.factors[0].levels.push(GridLevel::new("bad", &[("NOT_A_COLUMN", 1.0)]));
        assert!(matches!(build_scenario_grid(&spec, &engineer), Err(Error::Grid(_))));
        spec.factors[0].levels.clear();
        assert!(matches!(build_scenario_grid(&spec, &engineer), Err(Error::Grid(_))));
    }
}
