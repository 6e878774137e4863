//! Bagged random-forest classifier built from [`tree`] CART learners.

pub mod io;
pub mod tree;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LabeledDataset;
use crate::rng::{derive_seed, rng_for};
use crate::types::{ClassProbabilities, Classifier, DrivingContext, Label};

pub use io::{load_model, save_model, MODEL_VERSION};
pub use tree::{Node, Tree};

use tree::{GrowParams, TrainingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeaturesPerSplit {
    Count(usize),
    Named(FeatureRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRule {
    Sqrt,
    All,
}

impl FeaturesPerSplit {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            FeaturesPerSplit::Count(n) => n.clamp(1, n_features.max(1)),
            FeaturesPerSplit::Named(FeatureRule::All) => n_features.max(1),
            FeaturesPerSplit::Named(FeatureRule::Sqrt) => ((n_features as f64).sqrt() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeaturesPerSplit,
    pub seed: u64,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: None,
            min_samples_leaf: 5,
            features_per_split: FeaturesPerSplit::Named(FeatureRule::Sqrt),
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Training("n_estimators must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Training("min_samples_leaf must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Training("max_depth must be at least 1 when set".into()));
        }
        if self.features_per_split == FeaturesPerSplit::Count(0) {
            return Err(Error::Training("features_per_split must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub n_rows: usize,
    pub n_crash: usize,
    pub n_safe: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oob_estimate: Option<f64>,
}

/// Trained forest. Immutable; prediction is the mean of tree leaf
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub version: u32,
    pub schema_id: String,
    pub n_features: usize,
    pub params: ForestParams,
    pub training_meta: TrainingMeta,
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn from_trees(schema_id: impl Into<String>, n_features: usize, params: ForestParams, trees: Vec<Tree>) -> Self {
        Forest {
            version: MODEL_VERSION,
            schema_id: schema_id.into(),
            n_features,
            params,
            training_meta: TrainingMeta {
                seed: params.seed,
                n_rows: 0,
                n_crash: 0,
                n_safe: 0,
                oob_estimate: None,
            },
            trees,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict_rows(&self, data: &LabeledDataset) -> Vec<f64> {
        data.contexts.par_iter().map(|c| self.predict_row(&c.values)).collect()
    }
}

impl Classifier for Forest {
    fn schema_id(&self) -> &str {
        &self.schema_id
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, context: &DrivingContext) -> Result<ClassProbabilities> {
        if *context.schema_id != *self.schema_id {
            return Err(Error::Prediction(format!(
                "context schema `{}` does not match model schema `{}`",
                context.schema_id, self.schema_id
            )));
        }
        if context.len() != self.n_features {
            return Err(Error::Prediction(format!(
                "context has {} values, model expects {}",
                context.len(),
                self.n_features
            )));
        }
        Ok(ClassProbabilities::from_crash(Forest::predict_row(self, &context.values)))
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        Forest::predict_row(self, row)
    }
}

pub(crate) fn matrix(data: &LabeledDataset) -> TrainingMatrix {
    let rows: Vec<&[f64]> = data.contexts.iter().map(|c| c.values.as_slice()).collect();
    TrainingMatrix::from_rows(&rows, data.labels.iter().map(|l| l.as_u8()).collect())
}

fn bootstrap_weights(n: usize, enabled: bool, seed: u64) -> Vec<u32> {
    if !enabled {
        return vec![1; n];
    }
    let mut rng = rng_for(seed, 0);
    let mut w = vec![0u32; n];
    for _ in 0..n {
        w[rng.gen_range(0..n)] += 1;
    }
    w
}

fn grow_params(params: &ForestParams, n_features: usize) -> GrowParams {
    GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf as u64,
        features_per_split: params.features_per_split.resolve(n_features),
    }
}

/// Grow one tree on a bootstrap resample drawn from `bootstrap_seed`.
pub fn train_tree(data: &LabeledDataset, params: &ForestParams, bootstrap_seed: u64) -> Result<Tree> {
    if data.is_empty() {
        return Err(Error::Training("empty training data".into()));
    }
    params.validate()?;
    let m = matrix(data);
    Ok(grow_one(&m, params, bootstrap_seed).0)
}

fn grow_one(m: &TrainingMatrix, params: &ForestParams, tree_seed: u64) -> (Tree, Vec<u32>) {
    let weights = bootstrap_weights(m.n_rows, params.bootstrap, tree_seed);
    let mut rng = rng_for(tree_seed, 1);
    let tree = tree::grow(m, &weights, grow_params(params, m.n_features), &mut rng);
    (tree, weights)
}

pub fn train_forest(data: &LabeledDataset, params: &ForestParams) -> Result<Forest> {
    params.validate()?;
    let n_crash = data.count(Label::Crash);
    let n_safe = data.count(Label::Safe);
    if n_crash == 0 || n_safe == 0 {
        return Err(Error::Training(format!(
            "training data needs both classes (crash {n_crash}, safe {n_safe})"
        )));
    }
    let m = matrix(data);
    let seeds: Vec<u64> = (0..params.n_estimators as u64).map(|t| derive_seed(params.seed, t)).collect();
    let grown: Vec<(Tree, Vec<u32>)> = seeds.par_iter().map(|&s| grow_one(&m, params, s)).collect();

    let oob_estimate = params.bootstrap.then(|| oob_accuracy(&m, &grown)).flatten();
    let trees = grown.into_iter().map(|(t, _)| t).collect();
    Ok(Forest {
        version: MODEL_VERSION,
        schema_id: data.schema.schema_id().to_string(),
        n_features: data.n_features(),
        params: *params,
        training_meta: TrainingMeta {
            seed: params.seed,
            n_rows: data.len(),
            n_crash,
            n_safe,
            oob_estimate,
        },
        trees,
    })
}

/// Out-of-bag accuracy at threshold 0.5 over rows left out by at least one
/// tree.
fn oob_accuracy(m: &TrainingMatrix, grown: &[(Tree, Vec<u32>)]) -> Option<f64> {
    let (mut correct, mut scored) = (0usize, 0usize);
    let mut row = vec![0.0; m.n_features];
    for i in 0..m.n_rows {
        let (mut sum, mut n) = (0.0, 0usize);
        for (tree, w) in grown {
            if w[i] == 0 {
                for (j, col) in m.columns.iter().enumerate() {
                    row[j] = col[i];
                }
                sum += tree.predict_row(&row);
                n += 1;
            }
        }
        if n > 0 {
            scored += 1;
            let pred = (sum / n as f64 >= 0.5) as u8;
            correct += (pred == m.labels[i]) as usize;
        }
    }
    (scored > 0).then(|| correct as f64 / scored as f64)
}
