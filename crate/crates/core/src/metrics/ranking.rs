//! Ranking metrics: ROC-AUC (rank statistic and trapezoidal curve area) and
//! precision-recall with step-wise average precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Label;

fn class_sizes(truth: &[Label]) -> (usize, usize) {
    let pos = truth.iter().filter(|l| l.is_crash()).count();
    (pos, truth.len() - pos)
}

fn check(scores: &[f64], truth: &[Label]) -> Result<()> {
    if scores.len() != truth.len() {
        return Err(Error::Metric(format!("{} scores vs {} labels", scores.len(), truth.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    Ok(())
}

/// Indices sorted by score descending; ties keep input order.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Mann-Whitney rank statistic with average ranks for ties: the probability
/// that a random crash outscores a random safe row, ties counting one half.
pub fn roc_auc(scores: &[f64], truth: &[Label]) -> Result<f64> {
    check(scores, truth)?;
    let (pos, neg) = class_sizes(truth);
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("ROC-AUC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        let positives = idx[i..=j].iter().filter(|&&k| truth[k].is_crash()).count();
        rank_sum += avg * positives as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve from the origin through one point per distinct score.
pub fn roc_curve(scores: &[f64], truth: &[Label]) -> Result<Vec<RocPoint>> {
    check(scores, truth)?;
    let (pos, neg) = class_sizes(truth);
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("ROC curve needs both classes".into()));
    }
    let idx = descending(scores);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &i) in idx.iter().enumerate() {
        if truth[i].is_crash() {
            tp += 1;
        } else {
            fp += 1;
        }
        if k + 1 == idx.len() || scores[idx[k + 1]] != scores[i] {
            points.push(RocPoint {
                threshold: scores[i],
                fpr: fp as f64 / neg as f64,
                tpr: tp as f64 / pos as f64,
            });
        }
    }
    Ok(points)
}

/// Trapezoidal area under [`roc_curve`].
pub fn roc_auc_trapezoid(scores: &[f64], truth: &[Label]) -> Result<f64> {
    let pts = roc_curve(scores, truth)?;
    Ok(pts
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrMetrics {
    /// Sorted by recall, then by threshold descending.
    pub curve: Vec<PrPoint>,
    pub average_precision: f64,
    pub operating_threshold: f64,
    pub operating_precision: Option<f64>,
    pub operating_recall: f64,
}

/// Step-wise average precision `Σ (R_n − R_{n−1}) P_n` over the sweep of
/// distinct score thresholds, plus the operating point at 0.5.
pub fn pr_metrics(scores: &[f64], truth: &[Label]) -> Result<PrMetrics> {
    check(scores, truth)?;
    let (pos, _) = class_sizes(truth);
    if pos == 0 {
        return Err(Error::Metric("precision-recall needs at least one crash".into()));
    }
    let idx = descending(scores);
    let mut curve = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        if truth[i].is_crash() {
            tp += 1;
        } else {
            fp += 1;
        }
        if k + 1 == idx.len() || scores[idx[k + 1]] != scores[i] {
            let precision = tp as f64 / (tp + fp) as f64;
            let recall = tp as f64 / pos as f64;
            ap += (recall - prev_recall) * precision;
            prev_recall = recall;
            curve.push(PrPoint {
                threshold: scores[i],
                precision,
                recall,
            });
        }
    }
    let threshold = 0.5;
    let flagged: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= threshold).collect();
    let tp_op = flagged.iter().filter(|&&i| truth[i].is_crash()).count();
    Ok(PrMetrics {
        curve,
        average_precision: ap,
        operating_threshold: threshold,
        operating_precision: (!flagged.is_empty()).then(|| tp_op as f64 / flagged.len() as f64),
        operating_recall: tp_op as f64 / pos as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Crash as C, Safe as S};

    #[test]
    fn perfect_and_inverted() {
        let t = [C, C, S, S];
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &t).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &t).unwrap(), 0.0);
    }

    #[test]
    fn tie_counts_half() {
        assert_eq!(roc_auc(&[0.8, 0.8], &[C, S]).unwrap(), 0.5);
        assert_eq!(roc_auc_trapezoid(&[0.8, 0.8], &[C, S]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(roc_auc(&[0.1, 0.2], &[C, C]).is_err());
    }

    #[test]
    fn hand_enumerated_average_precision() {
        let m = pr_metrics(&[0.9, 0.6, 0.4], &[C, S, C]).unwrap();
        assert!((m.average_precision - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.operating_precision, Some(0.5));
        assert_eq!(m.operating_recall, 0.5);
    }

    #[test]
    fn separated_scores_have_unit_ap() {
        let m = pr_metrics(&[0.9, 0.7, 0.3, 0.1], &[C, C, S, S]).unwrap();
        assert_eq!(m.average_precision, 1.0);
    }

    #[test]
    fn no_positives_is_an_error() {
        assert!(pr_metrics(&[0.3], &[S]).is_err());
    }
}
