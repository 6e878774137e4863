//! Repeated stratified k-fold cross-validation of the forest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{train_forest, ForestParams};
use crate::ingest::split::dataset_folds;
use crate::ingest::LabeledDataset;
use crate::metrics::confusion::{confusion, threshold_labels};
use crate::metrics::ranking::roc_auc;
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub iteration: usize,
    pub seed: u64,
    pub fold: usize,
    pub n_test: usize,
    pub auc: f64,
    pub accuracy: f64,
}

/// Mean, sample standard deviation, normal-approximation 95% interval and
/// coefficient of variation (percent) of a metric over folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub cv_percent: f64,
}

impl Stability {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let half = 1.96 * std / n.sqrt();
        Self {
            mean,
            std,
            ci_low: mean - half,
            ci_high: mean + half,
            cv_percent: if mean != 0.0 { 100.0 * std / mean } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seeds: Vec<u64>,
    pub folds: Vec<FoldRecord>,
    pub auc: Stability,
    pub accuracy: Stability,
}

/// For each seed, split into `k` stratified folds and train/evaluate on each.
/// Fold models use forest seeds derived from the iteration seed and fold index.
pub fn cross_validate(data: &LabeledDataset, k: usize, seeds: &[u64], params: &ForestParams) -> Result<CvReport> {
    if seeds.is_empty() {
        return Err(Error::CrossValidation("at least one iteration seed is required".into()));
    }
    let mut folds = Vec::with_capacity(k * seeds.len());
    for (iteration, &seed) in seeds.iter().enumerate() {
        let parts = dataset_folds(data, k, seed)?;
        for (fold, test_idx) in parts.iter().enumerate() {
            let mut in_test = vec![false; data.len()];
            for &i in test_idx {
                in_test[i] = true;
            }
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| !in_test[i]).collect();
            let train = data.subset(&train_idx);
            let test = data.subset(test_idx);
            let fold_params = ForestParams {
                seed: derive_seed(seed, fold as u64),
                ..*params
            };
            let model = train_forest(&train, &fold_params)?;
            let scores = model.predict_rows(&test);
            let auc = roc_auc(&scores, &test.labels)?;
            let accuracy = confusion(&threshold_labels(&scores, 0.5), &test.labels)?
                .accuracy()
                .unwrap_or(0.0);
            folds.push(FoldRecord {
                iteration,
                seed,
                fold,
                n_test: test.len(),
                auc,
                accuracy,
            });
        }
    }
    let aucs: Vec<f64> = folds.iter().map(|f| f.auc).collect();
    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    Ok(CvReport {
        k,
        seeds: seeds.to_vec(),
        folds,
        auc: Stability::of(&aucs),
        accuracy: Stability::of(&accs),
    })
}
