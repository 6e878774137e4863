//! Integer code maps for categorical crash-record columns, plus the named
//! code sets used by feature rules, calibration and safe-sample synthesis.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_CODES_JSON: &str = include_str!("../../../schemas/crss_codes.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnCodes {
    pub codes: BTreeMap<String, String>,
    /// Reserved code for unlisted values. Binary flag columns reuse their
    /// "no" code here, so it may also appear in `codes`.
    pub unknown: i64,
}

impl ColumnCodes {
    pub fn is_known(&self, code: i64) -> bool {
        self.codes.contains_key(&code.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeTargets {
    #[serde(rename = "LGT_COND")]
    pub lighting: i64,
    #[serde(rename = "WEATHER")]
    pub weather: i64,
    #[serde(rename = "VSURCOND")]
    pub surface: i64,
    /// Inclusive hour range written when a night record is moved to daytime.
    pub daytime_hours: [i64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeMap {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub columns: BTreeMap<String, ColumnCodes>,
    pub sets: BTreeMap<String, Vec<i64>>,
    pub safe_targets: SafeTargets,
}

impl CodeMap {
    pub fn default_crss() -> Self {
        Self::from_json(DEFAULT_CODES_JSON).expect("bundled code map is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: CodeMap = serde_json::from_str(text)?;
        for (name, col) in &map.columns {
            for key in col.codes.keys() {
                key.parse::<i64>().map_err(|_| {
                    Error::CodeMap(format!("column `{name}` has non-integer code `{key}`"))
                })?;
            }
        }
        let [lo, hi] = map.safe_targets.daytime_hours;
        if !(0..=23).contains(&lo) || !(lo..=23).contains(&hi) {
            return Err(Error::CodeMap(format!("bad daytime hour range [{lo}, {hi}]")));
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnCodes> {
        self.columns.get(name)
    }

    /// Named code set. Panics on an unknown set name, which is a programming
    /// error against the bundled map.
    pub fn set(&self, name: &str) -> &[i64] {
        self.sets
            .get(name)
            .unwrap_or_else(|| panic!("code set `{name}` missing from code map"))
    }

    pub fn in_set(&self, name: &str, code: f64) -> bool {
        let code = code as i64;
        self.set(name).contains(&code)
    }

    /// Map a raw value onto the column's reserved unknown code when it is not
    /// listed. Returns the value to store and whether it was remapped.
    pub fn normalize(&self, column: &str, value: f64) -> (f64, bool) {
        match self.columns.get(column) {
            Some(col) if value.fract() != 0.0 || !col.is_known(value as i64) => {
                (col.unknown as f64, value != col.unknown as f64)
            }
            _ => (value, false),
        }
    }

    pub fn label(&self, column: &str, code: i64) -> Option<&str> {
        self.columns
            .get(column)?
            .codes
            .get(&code.to_string())
            .map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_map_loads() {
        let m = CodeMap::default_crss();
        assert_eq!(m.column("HOUR").unwrap().codes.len(), 24);
        assert_eq!(m.safe_targets.lighting, 1);
        assert!(m.in_set("poor_lighting", 2.0));
        assert!(!m.in_set("poor_lighting", 1.0));
    }

    #[test]
    fn unknown_codes_are_remapped_once() {
        let m = CodeMap::default_crss();
        assert_eq!(m.normalize("WEATHER", 1.0), (1.0, false));
        assert_eq!(m.normalize("WEATHER", 42.0), (99.0, true));
        // already the reserved code: kept, not counted
        assert_eq!(m.normalize("WEATHER", 99.0), (99.0, false));
        // columns without a code map pass through
        assert_eq!(m.normalize("VSPD_LIM", 45.0), (45.0, false));
        assert_eq!(m.normalize("SPEEDREL", 7.0), (0.0, true));
    }

    #[test]
    fn non_integer_code_is_rejected() {
        let text = r#"{"version":1,"columns":{"A":{"codes":{"1":"x","b":"y"},"unknown":9}},
            "sets":{},"safe_targets":{"LGT_COND":1,"WEATHER":1,"VSURCOND":1,"daytime_hours":[8,17]}}"#;
        assert!(CodeMap::from_json(text).is_err());
    }
}
