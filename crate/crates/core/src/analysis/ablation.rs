//! Feature-group ablation: retrain without a group and compare held-out AUC.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{train_forest, ForestParams};
use crate::ingest::split::dataset_split_indices;
use crate::ingest::LabeledDataset;
use crate::metrics::roc_auc;
use crate::schema::{FeatureGroup, FeatureSchema};

/// Features removed by one configuration: whole groups plus any extra
/// features named individually.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub name: String,
    #[serde(default)]
    pub groups: Vec<FeatureGroup>,
    #[serde(default)]
    pub features: Vec<String>,
}

impl AblationConfig {
    pub fn groups(name: &str, groups: &[FeatureGroup]) -> Self {
        Self {
            name: name.to_string(),
            groups: groups.to_vec(),
            features: Vec::new(),
        }
    }

    pub fn features(name: &str, features: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            groups: Vec::new(),
            features: features.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Union of two configurations, named `a + b`.
    pub fn pair(a: &Self, b: &Self) -> Self {
        let mut groups = a.groups.clone();
        groups.extend(b.groups.iter().filter(|g| !a.groups.contains(g)));
        let mut features = a.features.clone();
        features.extend(b.features.iter().filter(|f| !a.features.contains(f)).cloned());
        Self {
            name: format!("{} + {}", a.name, b.name),
            groups,
            features,
        }
    }

    /// Sorted schema indices this configuration removes.
    pub fn removed(&self, schema: &FeatureSchema) -> Result<Vec<usize>> {
        let mut idx = Vec::new();
        for &g in &self.groups {
            idx.extend(schema.group_indices(g));
        }
        for f in &self.features {
            idx.push(
                schema
                    .index_of(f)
                    .ok_or_else(|| Error::Ablation(format!("`{}` names unknown feature `{f}`", self.name)))?,
            );
        }
        idx.sort_unstable();
        idx.dedup();
        Ok(idx)
    }
}

/// Lighting-related features, removed together as their own configuration
/// when the schema has them.
pub const LIGHTING_FEATURES: [&str; 4] = ["POOR_LIGHTING", "LGT_COND", "LGTCON_IM", "IS_NIGHT"];

/// One row per non-empty feature group, plus a lighting row when every
/// lighting feature is present.
pub fn single_group_configs(schema: &FeatureSchema) -> Vec<AblationConfig> {
    let mut out = Vec::new();
    if LIGHTING_FEATURES.iter().all(|f| schema.index_of(f).is_some()) {
        out.push(AblationConfig::features("Lighting", &LIGHTING_FEATURES));
    }
    for g in FeatureGroup::ALL {
        if !schema.group_indices(g).is_empty() {
            out.push(AblationConfig::groups(g.name(), &[g]));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub n_features: usize,
    pub auc: f64,
    /// Percentage change from the baseline AUC.
    pub delta_auc_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub test_fraction: f64,
    pub split_seed: u64,
    pub baseline: AblationRow,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Pairwise configurations over the `k` single rows with the largest AUC
/// drops, in drop order.
pub fn top_pairs(report: &AblationReport, singles: &[AblationConfig], k: usize) -> Vec<AblationConfig> {
    let mut ranked: Vec<&AblationConfig> = singles.iter().filter(|c| report.row(&c.name).is_some()).collect();
    ranked.sort_by(|a, b| {
        let d = |c: &AblationConfig| report.row(&c.name).map(|r| r.delta_auc_percent).unwrap_or(0.0);
        d(a).total_cmp(&d(b))
    });
    ranked.truncate(k);
    let mut out = Vec::new();
    for i in 0..ranked.len() {
        for j in i + 1..ranked.len() {
            out.push(AblationConfig::pair(ranked[i], ranked[j]));
        }
    }
    out
}

/// Hold out one stratified test split, then train and evaluate the baseline
/// and every configuration on it. Configurations run in parallel; rows come
/// back in input order.
pub fn ablate(
    data: &LabeledDataset,
    configs: &[AblationConfig],
    params: &ForestParams,
    test_fraction: f64,
    seed: u64,
) -> Result<AblationReport> {
    let (train_idx, test_idx) = dataset_split_indices(data, test_fraction, seed)?;
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    let schema = &data.schema;

    let evaluate = |name: &str, removed: &[usize]| -> Result<(String, usize, f64)> {
        let (sub, kept) = schema.without(removed, &name.to_lowercase().replace([' ', '+'], "-"))?;
        if kept.is_empty() {
            return Err(Error::Ablation(format!("`{name}` removes every feature")));
        }
        let sub = Arc::new(sub);
        let tr = train.project(sub.clone(), &kept)?;
        let te = test.project(sub, &kept)?;
        let model = train_forest(&tr, params)?;
        Ok((name.to_string(), kept.len(), roc_auc(&model.predict_rows(&te), &te.labels)?))
    };

    let removed: Vec<Vec<usize>> = configs.iter().map(|c| c.removed(schema)).collect::<Result<_>>()?;
    if let Some((c, _)) = configs.iter().zip(&removed).find(|(_, r)| r.len() == schema.len()) {
        return Err(Error::Ablation(format!("`{}` removes every feature", c.name)));
    }
    let (_, n_all, base_auc) = evaluate("baseline", &[])?;
    let results: Vec<(String, usize, f64)> = configs
        .par_iter()
        .zip(&removed)
        .map(|(c, r)| evaluate(&c.name, r))
        .collect::<Result<_>>()?;
    let row = |(name, n, auc): (String, usize, f64)| AblationRow {
        name,
        n_features: n,
        auc,
        delta_auc_percent: (auc - base_auc) / base_auc * 100.0,
    };
    Ok(AblationReport {
        test_fraction,
        split_seed: seed,
        baseline: row(("baseline".into(), n_all, base_auc)),
        rows: results.into_iter().map(row).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_single_configs() {
        let s = FeatureSchema::default_crss();
        let configs = single_group_configs(&s);
        assert_eq!(configs[0].name, "Lighting");
        assert_eq!(configs[0].removed(&s).unwrap().len(), 4);
        assert_eq!(configs.len(), 8);
    }

    #[test]
    fn pair_merges_without_duplicates() {
        let a = AblationConfig::groups("A", &[FeatureGroup::Temporal]);
        let b = AblationConfig::groups("B", &[FeatureGroup::Temporal, FeatureGroup::Vru]);
        let p = AblationConfig::pair(&a, &b);
        assert_eq!(p.name, "A + B");
        assert_eq!(p.groups, vec![FeatureGroup::Temporal, FeatureGroup::Vru]);
    }

    #[test]
    fn unknown_feature_is_an_ablation_error() {
        let s = FeatureSchema::default_crss();
        let c = AblationConfig::features("x", &["NOPE"]);
        assert!(matches!(c.removed(&s), Err(Error::Ablation(_))));
    }
}
