//! Feature importance rankings: impurity decrease, permutation drop and mean
//! absolute SHAP.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::shap::ShapExplanation;
use crate::forest::tree::gini;
use crate::forest::{Forest, Node};
use crate::ingest::LabeledDataset;
use crate::metrics::{confusion, roc_auc, threshold_labels};
use crate::rng::{derive_seed, rng_for};
use crate::types::Label;

pub const IMPURITY: &str = "impurity";
pub const PERMUTATION: &str = "permutation";
pub const SHAP_MEAN_ABS: &str = "shap_mean_abs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub method: String,
    pub features: Vec<String>,
    /// Nonnegative, one per feature in schema order.
    pub scores: Vec<f64>,
}

impl ImportanceRanking {
    pub fn new(method: impl Into<String>, features: Vec<String>, scores: Vec<f64>) -> Self {
        Self {
            method: method.into(),
            features,
            scores,
        }
    }

    /// Feature indices from most to least important; ties go to the lower
    /// index.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }

    /// 1-based rank of every feature, in schema order.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.scores.len()];
        for (pos, i) in self.order().into_iter().enumerate() {
            ranks[i] = pos + 1;
        }
        ranks
    }

    pub fn top(&self, n: usize) -> Vec<(&str, f64)> {
        self.order()
            .into_iter()
            .take(n)
            .map(|i| (self.features[i].as_str(), self.scores[i]))
            .collect()
    }
}

fn names(data_features: &[&str]) -> Vec<String> {
    data_features.iter().map(|s| s.to_string()).collect()
}

/// Weighted Gini decrease summed over every split of every tree, normalized
/// to sum to one. A forest without splits scores all zeros.
pub fn impurity_importance(model: &Forest, features: &[&str]) -> ImportanceRanking {
    let mut scores = vec![0.0; model.n_features];
    for tree in &model.trees {
        for node in &tree.nodes {
            if let Node::Split {
                feature,
                left,
                right,
                counts,
                ..
            } = *node
            {
                let n = |c: [u64; 2]| (c[0] + c[1]) as f64;
                let (l, r) = (tree.nodes[left].counts(), tree.nodes[right].counts());
                let decrease = n(counts) * gini(counts) - n(l) * gini(l) - n(r) * gini(r);
                scores[feature] += decrease.max(0.0);
            }
        }
    }
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        for s in &mut scores {
            *s /= total;
        }
    }
    ImportanceRanking::new(IMPURITY, names(features), scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMetric {
    Auc,
    Accuracy,
}

fn metric(kind: PermutationMetric, scores: &[f64], truth: &[Label]) -> Result<f64> {
    match kind {
        PermutationMetric::Auc => roc_auc(scores, truth),
        PermutationMetric::Accuracy => Ok(confusion(&threshold_labels(scores, 0.5), truth)?
            .accuracy()
            .unwrap_or(0.0)),
    }
}

/// Mean metric drop over `repeats` shuffles of each column. Drops below zero
/// are reported as zero. Features the model never splits on score exactly
/// zero without being evaluated.
pub fn permutation_importance(
    model: &Forest,
    data: &LabeledDataset,
    kind: PermutationMetric,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceRanking> {
    if data.is_empty() {
        return Err(Error::Metric("permutation importance needs data".into()));
    }
    let base = metric(kind, &model.predict_rows(data), &data.labels)?;
    let mut used = vec![false; model.n_features];
    for t in &model.trees {
        for n in &t.nodes {
            if let Node::Split { feature, .. } = *n {
                used[feature] = true;
            }
        }
    }
    let cache = PathCache::new(model, data);
    let scores: Vec<f64> = (0..model.n_features)
        .into_par_iter()
        .map(|j| -> Result<f64> {
            if !used[j] || repeats == 0 {
                return Ok(0.0);
            }
            let mut rows: Vec<Vec<f64>> = data.contexts.iter().map(|c| c.values.clone()).collect();
            let mut column = data.column(j);
            let mut drop = 0.0;
            for r in 0..repeats {
                column.shuffle(&mut rng_for(derive_seed(seed, j as u64), r as u64));
                for (row, &v) in rows.iter_mut().zip(&column) {
                    row[j] = v;
                }
                let preds: Vec<f64> = rows.iter().enumerate().map(|(i, row)| cache.predict(model, i, row, j)).collect();
                drop += base - metric(kind, &preds, &data.labels)?;
            }
            Ok((drop / repeats as f64).max(0.0))
        })
        .collect::<Result<_>>()?;
    Ok(ImportanceRanking::new(PERMUTATION, names(&data.schema.names()), scores))
}

/// Per tree and row: the unpermuted leaf value and the set of features tested
/// on the row's path. Permuting a feature off the path cannot move the row, so
/// only trees whose path tests it are walked again. Predictions are summed in
/// tree order and match `Forest::predict_row` exactly.
struct PathCache {
    words: usize,
    leaf: Vec<f64>,
    masks: Vec<u64>,
}

impl PathCache {
    fn new(model: &Forest, data: &LabeledDataset) -> Self {
        let words = model.n_features.div_ceil(64);
        let n_trees = model.trees.len();
        let mut leaf = vec![0.0; data.len() * n_trees];
        let mut masks = vec![0u64; data.len() * n_trees * words];
        for (i, ctx) in data.contexts.iter().enumerate() {
            for (t, tree) in model.trees.iter().enumerate() {
                let slot = i * n_trees + t;
                let mask = &mut masks[slot * words..(slot + 1) * words];
                let mut node = 0;
                loop {
                    match tree.nodes[node] {
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                            ..
                        } => {
                            mask[feature / 64] |= 1 << (feature % 64);
                            node = if ctx.values[feature] < threshold { left } else { right };
                        }
                        Node::Leaf { p_crash, .. } => {
                            leaf[slot] = p_crash;
                            break;
                        }
                    }
                }
            }
        }
        Self { words, leaf, masks }
    }

    fn predict(&self, model: &Forest, i: usize, row: &[f64], permuted: usize) -> f64 {
        let n_trees = model.trees.len();
        let sum: f64 = model
            .trees
            .iter()
            .enumerate()
            .map(|(t, tree)| {
                let slot = i * n_trees + t;
                let word = self.masks[slot * self.words + permuted / 64];
                if word & (1 << (permuted % 64)) != 0 {
                    tree.predict_row(row)
                } else {
                    self.leaf[slot]
                }
            })
            .sum();
        sum / n_trees as f64
    }
}

/// Mean |φ_j| over a batch of explanations.
pub fn shap_importance(explanations: &[ShapExplanation], features: &[&str]) -> ImportanceRanking {
    let mut scores = vec![0.0; features.len()];
    for e in explanations {
        for (s, c) in scores.iter_mut().zip(&e.contributions) {
            *s += c.abs();
        }
    }
    if !explanations.is_empty() {
        for s in &mut scores {
            *s /= explanations.len() as f64;
        }
    }
    ImportanceRanking::new(SHAP_MEAN_ABS, names(features), scores)
}

/// Long-format CSV rows `feature, method, score, rank`.
pub fn ranking_csv_rows(rankings: &[ImportanceRanking]) -> Vec<[String; 4]> {
    let mut out = Vec::new();
    for r in rankings {
        let ranks = r.ranks();
        for i in r.order() {
            out.push([
                r.features[i].clone(),
                r.method.clone(),
                format!("{}", r.scores[i]),
                ranks[i].to_string(),
            ]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_breaks_ties_by_index() {
        let r = ImportanceRanking::new("x", vec!["a".into(), "b".into(), "c".into()], vec![0.2, 0.5, 0.2]);
        assert_eq!(r.order(), vec![1, 0, 2]);
        assert_eq!(r.ranks(), vec![2, 1, 3]);
    }
}
