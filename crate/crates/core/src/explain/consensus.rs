//! Multi-method consensus over importance rankings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::importance::ImportanceRanking;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRanks {
    pub method: String,
    /// 1-based rank per feature, schema order.
    pub ranks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusRanking {
    pub features: Vec<String>,
    pub per_method: Vec<MethodRanks>,
    /// Mean rank position per feature; lower is more important.
    pub mean_rank: Vec<f64>,
    /// Feature indices in consensus order.
    pub order: Vec<usize>,
}

impl ConsensusRanking {
    pub fn consensus_rank(&self, feature: &str) -> Option<usize> {
        let i = self.features.iter().position(|f| f == feature)?;
        self.order.iter().position(|&k| k == i).map(|p| p + 1)
    }
}

pub fn consensus_rank(rankings: &[ImportanceRanking]) -> Result<ConsensusRanking> {
    if rankings.len() < 2 {
        return Err(Error::Consensus(format!("need at least 2 rankings, got {}", rankings.len())));
    }
    let features = rankings[0].features.clone();
    for r in &rankings[1..] {
        if r.features != features {
            return Err(Error::Consensus(format!(
                "ranking `{}` covers a different feature set than `{}`",
                r.method, rankings[0].method
            )));
        }
    }
    let per_method: Vec<MethodRanks> = rankings
        .iter()
        .map(|r| MethodRanks {
            method: r.method.clone(),
            ranks: r.ranks(),
        })
        .collect();
    let k = rankings.len() as f64;
    let mean_rank: Vec<f64> = (0..features.len())
        .map(|i| per_method.iter().map(|m| m.ranks[i] as f64).sum::<f64>() / k)
        .collect();
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| mean_rank[a].total_cmp(&mean_rank[b]).then(a.cmp(&b)));
    Ok(ConsensusRanking {
        features,
        per_method,
        mean_rank,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(method: &str, scores: &[f64]) -> ImportanceRanking {
        let features = (0..scores.len()).map(|i| format!("f{i}")).collect();
        ImportanceRanking::new(method, features, scores.to_vec())
    }

    #[test]
    fn unanimous_order_is_kept() {
        let c = consensus_rank(&[ranking("a", &[0.1, 0.5, 0.3]), ranking("b", &[1.0, 9.0, 4.0])]).unwrap();
        assert_eq!(c.order, vec![1, 2, 0]);
    }

    #[test]
    fn reversed_pair_ties_to_lower_index() {
        let c = consensus_rank(&[ranking("a", &[1.0, 0.0]), ranking("b", &[0.0, 1.0])]).unwrap();
        assert_eq!(c.mean_rank, vec![1.5, 1.5]);
        assert_eq!(c.order, vec![0, 1]);
    }

    #[test]
    fn dominant_feature_wins() {
        let rs = vec![
            ranking("a", &[0.1, 0.9, 0.3, 0.2]),
            ranking("b", &[0.5, 0.9, 0.1, 0.2]),
            ranking("c", &[0.3, 0.4, 0.1, 0.35]),
            ranking("d", &[0.1, 0.7, 0.6, 0.2]),
        ];
        let c = consensus_rank(&rs).unwrap();
        assert_eq!(c.consensus_rank("f1"), Some(1));
    }

    #[test]
    fn mismatched_features_rejected() {
        let mut b = ranking("b", &[1.0, 2.0]);
        b.features[1] = "other".into();
        assert!(consensus_rank(&[ranking("a", &[1.0, 2.0]), b]).is_err());
        assert!(consensus_rank(&[ranking("a", &[1.0])]).is_err());
    }
}
