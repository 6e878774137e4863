//! Planted-signal dataset: two informative features with a known decision
//! boundary plus independent noise features.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{LabeledDataset, Provenance};
use crate::rng::rng_for;
use crate::schema::{FeatureGroup, FeatureKind, FeatureSchema, FeatureSpec};
use crate::types::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedConfig {
    pub n_rows: usize,
    pub n_noise: usize,
    /// Fraction of rows whose label is redrawn by a fair coin.
    pub label_noise: f64,
    /// When set, every feature takes values `k / levels` for `k` in
    /// `0..=levels`; otherwise features are continuous on `[0, 1)`.
    pub levels: Option<u32>,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_rows: 20_000,
            n_noise: 8,
            label_noise: 0.10,
            levels: None,
            seed: 0,
        }
    }
}

pub const INFORMATIVE: [&str; 2] = ["f0", "f1"];

/// `f0`, `f1` informative (groups Environmental and Temporal), `noise*` in
/// Metadata.
pub fn planted_schema(n_noise: usize) -> FeatureSchema {
    let mut specs = vec![
        FeatureSpec::raw("f0", FeatureGroup::Environmental, FeatureKind::Numeric),
        FeatureSpec::raw("f1", FeatureGroup::Temporal, FeatureKind::Numeric),
    ];
    specs.extend(
        (0..n_noise).map(|k| FeatureSpec::raw(format!("noise{k}"), FeatureGroup::Metadata, FeatureKind::Numeric)),
    );
    FeatureSchema::new(format!("planted-{n_noise}"), specs).expect("generated names are unique")
}

/// Noise-free rule: crash iff `f0 + f1 > 1`.
pub fn planted_rule(f0: f64, f1: f64) -> bool {
    f0 + f1 > 1.0
}

/// Crash probability of the generator at a point.
pub fn planted_crash_probability(f0: f64, f1: f64, label_noise: f64) -> f64 {
    let half = label_noise / 2.0;
    if planted_rule(f0, f1) {
        1.0 - half
    } else {
        half
    }
}

pub fn planted_dataset(cfg: &PlantedConfig) -> Result<LabeledDataset> {
    let schema = Arc::new(planted_schema(cfg.n_noise));
    let width = 2 + cfg.n_noise;
    let mut rows = Vec::with_capacity(cfg.n_rows);
    let mut labels = Vec::with_capacity(cfg.n_rows);
    for i in 0..cfg.n_rows {
        let mut rng = rng_for(cfg.seed, i as u64);
        let row: Vec<f64> = (0..width)
            .map(|_| match cfg.levels {
                Some(l) => rng.gen_range(0..=l) as f64 / l as f64,
                None => rng.gen::<f64>(),
            })
            .collect();
        let resample = rng.gen::<f64>() < cfg.label_noise;
        let coin = rng.gen::<bool>();
        let crash = if resample { coin } else { planted_rule(row[0], row[1]) };
        labels.push(if crash { Label::Crash } else { Label::Safe });
        rows.push(row);
    }
    LabeledDataset::from_rows(schema, rows, labels, Provenance::Planted)
}
