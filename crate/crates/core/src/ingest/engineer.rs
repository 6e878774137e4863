//! Raw record to feature vector: code normalization plus the derived-feature
//! rules referenced by the schema.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::CodeMap;
use crate::error::{Error, Result};
use crate::ingest::records::CrashRecord;
use crate::schema::{Derivation, DerivedRule, FeatureSchema};
use crate::types::DrivingContext;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineeringConfig {
    /// Half-open hour windows `[start, end)` counted as rush hour.
    pub rush_hours: Vec<[u32; 2]>,
    /// Night is `hour >= night_start || hour < night_end`.
    pub night_start: u32,
    pub night_end: u32,
}

impl Default for EngineeringConfig {
    fn default() -> Self {
        Self {
            rush_hours: vec![[7, 9], [16, 19]],
            night_start: 22,
            night_end: 5,
        }
    }
}

impl EngineeringConfig {
    pub fn is_night(&self, hour: f64) -> bool {
        valid_hour(hour) && (hour >= self.night_start as f64 || hour < self.night_end as f64)
    }

    pub fn is_rush_hour(&self, hour: f64) -> bool {
        valid_hour(hour)
            && self
                .rush_hours
                .iter()
                .any(|&[s, e]| hour >= s as f64 && hour < e as f64)
    }
}

fn valid_hour(hour: f64) -> bool {
    (0.0..24.0).contains(&hour)
}

/// Turns records into contexts for one schema.
#[derive(Debug, Clone)]
pub struct FeatureEngineer {
    schema: Arc<FeatureSchema>,
    codes: CodeMap,
    config: EngineeringConfig,
}

/// Unknown-code remap counts per column.
pub type UnknownCounts = BTreeMap<String, usize>;

impl FeatureEngineer {
    pub fn new(schema: Arc<FeatureSchema>, codes: CodeMap, config: EngineeringConfig) -> Self {
        Self {
            schema,
            codes,
            config,
        }
    }

    pub fn default_crss() -> Self {
        Self::new(
            Arc::new(FeatureSchema::default_crss()),
            CodeMap::default_crss(),
            EngineeringConfig::default(),
        )
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn codes(&self) -> &CodeMap {
        &self.codes
    }

    pub fn config(&self) -> &EngineeringConfig {
        &self.config
    }

    /// Engineer one record. Unknown codes are remapped and tallied into
    /// `unknown`.
    pub fn engineer(&self, record: &CrashRecord, unknown: &mut UnknownCounts) -> Result<DrivingContext> {
        let raw = |col: &str, unknown: &mut UnknownCounts| -> Result<f64> {
            let v = record.get(col).ok_or_else(|| {
                Error::Engineering(format!("record `{}` lacks column `{col}`", record.casenum))
            })?;
            let (v, remapped) = self.codes.normalize(col, v);
            if remapped {
                *unknown.entry(col.to_string()).or_default() += 1;
            }
            Ok(v)
        };

        // Normalize every rule input once so remaps are counted once per cell.
        let mut inputs: BTreeMap<&str, f64> = BTreeMap::new();
        for spec in self.schema.features() {
            match spec.derivation {
                Derivation::Raw => {
                    if !inputs.contains_key(spec.name.as_str()) {
                        inputs.insert(spec.name.as_str(), raw(&spec.name, unknown)?);
                    }
                }
                Derivation::Rule(rule) => {
                    for &col in rule.inputs() {
                        if !inputs.contains_key(col) {
                            inputs.insert(col, raw(col, unknown)?);
                        }
                    }
                }
            }
        }

        let values = self
            .schema
            .features()
            .iter()
            .map(|spec| match spec.derivation {
                Derivation::Raw => inputs[spec.name.as_str()],
                Derivation::Rule(rule) => self.apply(rule, &inputs),
            })
            .collect();
        Ok(DrivingContext::new(self.schema.schema_id(), values))
    }

    fn apply(&self, rule: DerivedRule, v: &BTreeMap<&str, f64>) -> f64 {
        let codes = &self.codes;
        let cfg = &self.config;
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let hour = || v["HOUR"];
        let night = || cfg.is_night(v["HOUR"]);
        let poor_light = || codes.in_set("poor_lighting", v["LGT_COND"]);
        let adverse_weather = || codes.in_set("adverse_weather", v["WEATHER"]);
        let adverse_surface = || codes.in_set("adverse_surface", v["VSURCOND"]);
        let weekend = || codes.in_set("weekend_days", v["DAY_WEEK"]);
        match rule {
            DerivedRule::IsRushHour => flag(cfg.is_rush_hour(hour())),
            DerivedRule::IsWeekend => flag(weekend()),
            DerivedRule::IsNight => flag(night()),
            DerivedRule::HourSin => cyclic(hour()).0,
            DerivedRule::HourCos => cyclic(hour()).1,
            DerivedRule::AdverseWeather => flag(adverse_weather()),
            DerivedRule::PoorLighting => flag(poor_light()),
            DerivedRule::LgtconIm => self.imputed_code("LGT_COND", v["LGT_COND"], codes.safe_targets.lighting),
            DerivedRule::WeathrIm => self.imputed_code("WEATHER", v["WEATHER"], codes.safe_targets.weather),
            DerivedRule::AdverseSurface => flag(adverse_surface()),
            DerivedRule::TotalVru => v["pedestrian_count"] + v["cyclist_count"],
            DerivedRule::FatalVru => flag(codes.in_set("fatal_injury", v["max_vru_injury"])),
            DerivedRule::NightAndDark => flag(night() && poor_light()),
            DerivedRule::WeekendNight => flag(weekend() && night()),
            DerivedRule::AdverseConditions => {
                let n = [night(), poor_light(), adverse_weather(), adverse_surface()]
                    .into_iter()
                    .filter(|&b| b)
                    .count();
                flag(n >= 2)
            }
            DerivedRule::SpeedOver => v["TRAV_SP"] - v["VSPD_LIM"],
            DerivedRule::VehAge => (v["YEAR"] - v["MOD_YEAR"]).max(0.0),
        }
    }

    /// Imputed-code variant: the reserved unknown code becomes the column's
    /// most common benign code.
    fn imputed_code(&self, column: &str, value: f64, fallback: i64) -> f64 {
        match self.codes.column(column) {
            Some(c) if value as i64 == c.unknown => fallback as f64,
            _ => value,
        }
    }

    /// Rebuild the raw record behind an engineered context. Every rule input
    /// must be a raw feature of the schema; codes already normalized stay as
    /// they are.
    pub fn record_from_context(&self, casenum: &str, context: &DrivingContext) -> Result<CrashRecord> {
        if context.values.len() != self.schema.len() {
            return Err(Error::Engineering(format!(
                "context has {} values, schema `{}` has {}",
                context.values.len(),
                self.schema.schema_id(),
                self.schema.len()
            )));
        }
        let mut record = CrashRecord::new(casenum);
        for (spec, &v) in self.schema.features().iter().zip(&context.values) {
            if spec.derivation == Derivation::Raw {
                record.set(&spec.name, v);
            }
        }
        for spec in self.schema.features() {
            if let Derivation::Rule(rule) = spec.derivation {
                if let Some(col) = rule.inputs().iter().find(|c| record.get(c).is_none()) {
                    return Err(Error::Engineering(format!(
                        "`{}` needs `{col}`, which is not a raw feature of the schema",
                        spec.name
                    )));
                }
            }
        }
        Ok(record)
    }

    /// Engineer many records in parallel; output order matches input order.
    pub fn engineer_all(&self, records: &[CrashRecord]) -> Result<(Vec<DrivingContext>, UnknownCounts)> {
        let parts: Vec<Result<(DrivingContext, UnknownCounts)>> = records
            .par_iter()
            .map(|r| {
                let mut counts = UnknownCounts::new();
                self.engineer(r, &mut counts).map(|c| (c, counts))
            })
            .collect();
        let mut contexts = Vec::with_capacity(records.len());
        let mut total = UnknownCounts::new();
        for p in parts {
            let (ctx, counts) = p?;
            contexts.push(ctx);
            for (k, n) in counts {
                *total.entry(k).or_default() += n;
            }
        }
        Ok((contexts, total))
    }
}

fn cyclic(hour: f64) -> (f64, f64) {
    if !valid_hour(hour) {
        return (0.0, 0.0);
    }
    let a = 2.0 * PI * hour / 24.0;
    (a.sin(), a.cos())
}

/// A neutral crash record for the default schema: noon Wednesday, clear,
/// daylight, dry, at the posted limit, no VRU. Used as the base for grid
/// cells and kinematic contexts.
pub fn base_record(casenum: &str) -> CrashRecord {
    let fields: &[(&str, f64)] = &[
        ("HOUR", 12.0),
        ("MINUTE", 0.0),
        ("MONTH", 6.0),
        ("DAY_WEEK", 4.0),
        ("YEAR", 2020.0),
        ("WEATHER", 1.0),
        ("LGT_COND", 1.0),
        ("TYP_INT", 1.0),
        ("REL_ROAD", 1.0),
        ("WRK_ZONE", 0.0),
        ("INT_HWY", 0.0),
        ("RELJCT2", 1.0),
        ("VSURCOND", 1.0),
        ("VSPD_LIM", 35.0),
        ("pedestrian_count", 0.0),
        ("cyclist_count", 0.0),
        ("max_vru_injury", 0.0),
        ("HARM_EV", 12.0),
        ("MAN_COLL", 0.0),
        ("ALCOHOL", 2.0),
        ("MAX_SEV", 0.0),
        ("VE_TOTAL", 2.0),
        ("PEDS", 0.0),
        ("PERMVIT", 2.0),
        ("PERNOTMVIT", 0.0),
        ("VE_FORMS", 2.0),
        ("NUM_INJ", 0.0),
        ("TRAV_SP", 35.0),
        ("SPEEDREL", 0.0),
        ("AGGR_DRIVING", 0.0),
        ("BODY_TYP", 4.0),
        ("MOD_YEAR", 2014.0),
        ("DR_AGE", 40.0),
        ("DR_SEX", 1.0),
        ("DEFORMED", 2.0),
        ("ROLLOVER", 0.0),
        ("HIT_RUN", 0.0),
        ("DRUGS", 0.0),
        ("DISTRACTED", 0.0),
        ("STRATUM", 5.0),
        ("REGION", 3.0),
        ("URBANICITY", 1.0),
        ("PJ", 1.0),
        ("PSU", 1.0),
        ("PSU_VAR", 1.0),
        ("PSUSTRAT", 1.0),
        ("WEIGHT", 1.0),
    ];
    let mut r = CrashRecord::new(casenum);
    for &(k, v) in fields {
        r.set(k, v);
    }
    r
}
