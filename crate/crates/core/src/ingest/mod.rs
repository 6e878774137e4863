//! Data ingestion: crash records, feature engineering, safe-sample synthesis,
//! trajectory kinematics and stratified splitting.

pub mod conditions;
pub mod dataset;
pub mod engineer;
pub mod kinematics;
pub mod records;
pub mod split;
pub mod synth;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use conditions::{load_conditions, read_conditions, write_conditions, ScenarioConditions};
pub use dataset::{LabeledDataset, Provenance};
pub use engineer::{base_record, EngineeringConfig, FeatureEngineer, UnknownCounts};
pub use kinematics::{extract_kinematics, KinematicConfig, KinematicFeatures, ScenarioType, TrajectoryScenario};
pub use records::{load_crash_records, CrashRecord, LoadReport};
pub use split::{dataset_folds, dataset_split_indices, stratified_folds, stratified_sample, stratified_split};
pub use synth::{synthesize_safe_samples, FlipRates, SynthReport};

use crate::error::Result;
use crate::types::Label;

/// Everything counted while turning raw files into a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub load: LoadReport,
    pub unknown_codes: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthReport>,
    pub crash_rows: usize,
    pub safe_rows: usize,
}

/// Engineer labeled records into a dataset. Provenance follows the label.
/// A safe record whose casenum is a crash casenum plus [`synth::SAFE_SUFFIX`]
/// shares that crash's group id; group ids are only attached when at least one
/// such pair exists.
pub fn build_dataset(
    engineer: &FeatureEngineer,
    records: &[CrashRecord],
) -> Result<(LabeledDataset, BTreeMap<String, usize>)> {
    let (contexts, unknown) = engineer.engineer_all(records)?;
    let labels: Vec<Label> = records.iter().map(|r| r.label).collect();
    let provenance = labels
        .iter()
        .map(|l| match l {
            Label::Crash => Provenance::RealCrash,
            Label::Safe => Provenance::SyntheticSafe,
        })
        .collect();
    let ds = LabeledDataset::new(Arc::clone(engineer.schema()), contexts, labels, provenance)?;
    let ds = match clone_pair_groups(records) {
        Some(groups) => ds.with_groups(groups)?,
        None => ds,
    };
    Ok((ds, unknown))
}

fn clone_pair_groups(records: &[CrashRecord]) -> Option<Vec<usize>> {
    let crash_ids: BTreeMap<&str, usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.label == Label::Crash)
        .map(|(i, r)| (r.casenum.as_str(), i))
        .collect();
    let mut paired = false;
    let groups = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let source = (r.label == Label::Safe)
                .then(|| r.casenum.strip_suffix(synth::SAFE_SUFFIX))
                .flatten()
                .and_then(|c| crash_ids.get(c));
            match source {
                Some(&j) => {
                    paired = true;
                    j
                }
                None => i,
            }
        })
        .collect();
    paired.then_some(groups)
}
