//! Feature schema: the ordered, grouped list of features that defines the
//! layout of every [`DrivingContext`](crate::types::DrivingContext).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_SCHEMA_JSON: &str = include_str!("../../../schemas/crss_vru_64.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    Temporal,
    Environmental,
    Location,
    #[serde(rename = "VRU")]
    Vru,
    Interaction,
    CrashVehicle,
    Metadata,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 7] = [
        FeatureGroup::Temporal,
        FeatureGroup::Environmental,
        FeatureGroup::Location,
        FeatureGroup::Vru,
        FeatureGroup::Interaction,
        FeatureGroup::CrashVehicle,
        FeatureGroup::Metadata,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Temporal => "Temporal",
            FeatureGroup::Environmental => "Environmental",
            FeatureGroup::Location => "Location",
            FeatureGroup::Vru => "VRU",
            FeatureGroup::Interaction => "Interaction",
            FeatureGroup::CrashVehicle => "CrashVehicle",
            FeatureGroup::Metadata => "Metadata",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Binary,
    Categorical,
}

/// Rule identifiers for engineered features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DerivedRule {
    IsRushHour,
    IsWeekend,
    IsNight,
    HourSin,
    HourCos,
    AdverseWeather,
    PoorLighting,
    #[serde(rename = "LGTCON_IM")]
    LgtconIm,
    #[serde(rename = "WEATHR_IM")]
    WeathrIm,
    AdverseSurface,
    TotalVru,
    FatalVru,
    NightAndDark,
    WeekendNight,
    AdverseConditions,
    SpeedOver,
    VehAge,
}

impl DerivedRule {
    /// Raw columns a rule reads.
    pub fn inputs(self) -> &'static [&'static str] {
        match self {
            DerivedRule::IsRushHour
            | DerivedRule::IsNight
            | DerivedRule::HourSin
            | DerivedRule::HourCos => &["HOUR"],
            DerivedRule::IsWeekend => &["DAY_WEEK"],
            DerivedRule::AdverseWeather | DerivedRule::WeathrIm => &["WEATHER"],
            DerivedRule::PoorLighting | DerivedRule::LgtconIm => &["LGT_COND"],
            DerivedRule::AdverseSurface => &["VSURCOND"],
            DerivedRule::TotalVru => &["pedestrian_count", "cyclist_count"],
            DerivedRule::FatalVru => &["max_vru_injury"],
            DerivedRule::NightAndDark => &["HOUR", "LGT_COND"],
            DerivedRule::WeekendNight => &["HOUR", "DAY_WEEK"],
            DerivedRule::AdverseConditions => &["HOUR", "LGT_COND", "WEATHER", "VSURCOND"],
            DerivedRule::SpeedOver => &["TRAV_SP", "VSPD_LIM"],
            DerivedRule::VehAge => &["YEAR", "MOD_YEAR"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivation {
    Raw,
    Rule(DerivedRule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub group: FeatureGroup,
    pub kind: FeatureKind,
    pub derivation: Derivation,
}

impl FeatureSpec {
    pub fn raw(name: impl Into<String>, group: FeatureGroup, kind: FeatureKind) -> Self {
        Self {
            name: name.into(),
            group,
            kind,
            derivation: Derivation::Raw,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    schema_id: String,
    #[serde(default = "one")]
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    features: Vec<FeatureSpec>,
}

fn one() -> u32 {
    1
}

/// Ordered feature list. Order is total and defines vector indices.
#[derive(Debug, Clone)]
pub struct FeatureSchema {
    schema_id: Arc<str>,
    version: u32,
    note: Option<String>,
    features: Vec<FeatureSpec>,
    index: HashMap<String, usize>,
}

impl PartialEq for FeatureSchema {
    fn eq(&self, other: &Self) -> bool {
        self.schema_id == other.schema_id && self.features == other.features
    }
}

impl FeatureSchema {
    pub fn new(schema_id: impl Into<Arc<str>>, features: Vec<FeatureSpec>) -> Result<Self> {
        let mut index = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            if f.name.is_empty() {
                return Err(Error::Schema(format!("feature {i} has an empty name")));
            }
            if index.insert(f.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
        }
        if features.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        Ok(Self {
            schema_id: schema_id.into(),
            version: 1,
            note: None,
            features,
            index,
        })
    }

    /// The shipped 64-feature crash schema.
    pub fn default_crss() -> Self {
        Self::from_json(DEFAULT_SCHEMA_JSON).expect("bundled schema is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SchemaFile = serde_json::from_str(text)?;
        let mut s = Self::new(file.schema_id, file.features)?;
        s.version = file.version;
        s.note = file.note;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SchemaFile {
            schema_id: self.schema_id.to_string(),
            version: self.version,
            note: self.note.clone(),
            features: self.features.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn schema_id(&self) -> Arc<str> {
        self.schema_id.clone()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &FeatureSpec {
        &self.features[index]
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::Schema(format!("feature `{name}` not in schema `{}`", self.schema_id)))
    }

    pub fn group_indices(&self, group: FeatureGroup) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.group == group)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn group_counts(&self) -> Vec<(FeatureGroup, usize)> {
        FeatureGroup::ALL
            .iter()
            .map(|&g| (g, self.features.iter().filter(|f| f.group == g).count()))
            .collect()
    }

    /// Raw input columns needed to engineer every feature, in schema order
    /// followed by rule-only inputs.
    pub fn raw_columns(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for f in &self.features {
            if f.derivation == Derivation::Raw && seen.insert(f.name.clone()) {
                out.push(f.name.clone());
            }
        }
        for f in &self.features {
            if let Derivation::Rule(rule) = f.derivation {
                for &input in rule.inputs() {
                    if seen.insert(input.to_string()) {
                        out.push(input.to_string());
                    }
                }
            }
        }
        out
    }

    /// Sub-schema keeping only features not in `removed`. Returns the new
    /// schema and the original indices of the kept features.
    pub fn without(&self, removed: &[usize], suffix: &str) -> Result<(FeatureSchema, Vec<usize>)> {
        let drop: BTreeSet<usize> = removed.iter().copied().collect();
        let kept: Vec<usize> = (0..self.len()).filter(|i| !drop.contains(i)).collect();
        if kept.is_empty() {
            return Err(Error::Schema("projection removes every feature".into()));
        }
        let features = kept.iter().map(|&i| self.features[i].clone()).collect();
        let id = format!("{}-minus-{}", self.schema_id, suffix);
        Ok((FeatureSchema::new(id, features)?, kept))
    }
}
