//! Binary and ordinal confusion matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Label, RiskLevel};

/// Crash is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Crash-class precision; undefined when nothing was predicted crash.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Crash-class recall.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
    }

    pub fn safe_precision(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fn_)
    }

    pub fn safe_recall(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn summary(&self) -> ConfusionSummary {
        ConfusionSummary {
            counts: *self,
            accuracy: self.accuracy(),
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
            safe_precision: self.safe_precision(),
            safe_recall: self.safe_recall(),
        }
    }
}

/// Counts plus derived metrics; `null` marks an undefined metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSummary {
    pub counts: ConfusionMatrix,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub safe_precision: Option<f64>,
    pub safe_recall: Option<f64>,
}

pub fn confusion(predictions: &[Label], truth: &[Label]) -> Result<ConfusionMatrix> {
    if predictions.len() != truth.len() {
        return Err(Error::Metric(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Metric("no predictions".into()));
    }
    let mut m = ConfusionMatrix {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p, t) {
            (Label::Crash, Label::Crash) => m.tp += 1,
            (Label::Crash, Label::Safe) => m.fp += 1,
            (Label::Safe, Label::Crash) => m.fn_ += 1,
            (Label::Safe, Label::Safe) => m.tn += 1,
        }
    }
    Ok(m)
}

/// Threshold crash probabilities (`p >= threshold` is crash).
pub fn threshold_labels(scores: &[f64], threshold: f64) -> Vec<Label> {
    scores
        .iter()
        .map(|&s| if s >= threshold { Label::Crash } else { Label::Safe })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalConfusion {
    /// `matrix[expected][predicted]`, indexed by ordinal rank.
    pub matrix: [[u64; 5]; 5],
    pub total: u64,
    pub accuracy: f64,
    pub max_distance: usize,
    /// Share of misclassifications that are one level off; `None` without
    /// errors.
    pub adjacency_share: Option<f64>,
    pub errors_by_distance: [u64; 5],
}

pub fn ordinal_confusion(predicted: &[RiskLevel], expected: &[RiskLevel]) -> Result<OrdinalConfusion> {
    if predicted.len() != expected.len() {
        return Err(Error::Metric(format!(
            "{} predicted levels vs {} expected",
            predicted.len(),
            expected.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Metric("no levels to compare".into()));
    }
    let mut matrix = [[0u64; 5]; 5];
    let mut by_distance = [0u64; 5];
    for (&p, &e) in predicted.iter().zip(expected) {
        matrix[e.rank()][p.rank()] += 1;
        by_distance[p.rank().abs_diff(e.rank())] += 1;
    }
    let total = predicted.len() as u64;
    let errors: u64 = by_distance[1..].iter().sum();
    Ok(OrdinalConfusion {
        matrix,
        total,
        accuracy: by_distance[0] as f64 / total as f64,
        max_distance: (0..5).rev().find(|&d| by_distance[d] > 0).unwrap_or(0),
        adjacency_share: (errors > 0).then(|| by_distance[1] as f64 / errors as f64),
        errors_by_distance: by_distance,
    })
}
