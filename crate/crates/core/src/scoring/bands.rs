//! Score-to-risk-level banding.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::RiskLevel;

const DEFAULT_BANDS_JSON: &str = include_str!("../../../../config/risk_bands_default.json");

/// Inclusive upper edges; Excellent covers everything above `low`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperEdges {
    pub critical: f64,
    pub high: f64,
    pub medium: f64,
    pub low: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBands {
    #[serde(default = "one")]
    pub version: u32,
    pub upper_edges: UpperEdges,
}

fn one() -> u32 {
    1
}

impl Default for RiskBands {
    fn default() -> Self {
        Self::from_json(DEFAULT_BANDS_JSON).expect("bundled risk bands are valid")
    }
}

impl RiskBands {
    pub fn from_json(text: &str) -> Result<Self> {
        let b: RiskBands = serde_json::from_str(text)?;
        b.validate()?;
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.upper_edges;
        let edges = [0.0, e.critical, e.high, e.medium, e.low, 100.0];
        if edges.windows(2).all(|w| w[0] < w[1]) {
            Ok(())
        } else {
            Err(Error::Classification(format!(
                "band edges must increase strictly inside (0, 100): {:?}",
                &edges[1..5]
            )))
        }
    }

    /// Score range `(lower, upper]` of a level; Critical starts at 0 inclusive.
    pub fn range(&self, level: RiskLevel) -> (f64, f64) {
        let e = self.upper_edges;
        let edges = [0.0, e.critical, e.high, e.medium, e.low, 100.0];
        (edges[level.rank()], edges[level.rank() + 1])
    }

    pub fn classify(&self, score: f64) -> Result<RiskLevel> {
        if !(0.0..=100.0).contains(&score) {
            return Err(Error::Classification(format!("score {score} outside [0, 100]")));
        }
        let e = self.upper_edges;
        Ok(if score <= e.critical {
            RiskLevel::Critical
        } else if score <= e.high {
            RiskLevel::High
        } else if score <= e.medium {
            RiskLevel::Medium
        } else if score <= e.low {
            RiskLevel::Low
        } else {
            RiskLevel::Excellent
        })
    }
}

pub fn classify_risk(score: f64, bands: &RiskBands) -> Result<RiskLevel> {
    bands.classify(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use RiskLevel::*;

    #[test]
    fn published_boundaries() {
        let b = RiskBands::default();
        let cases = [
            (0.0, Critical),
            (20.0, Critical),
            (21.0, High),
            (40.0, High),
            (41.0, Medium),
            (60.0, Medium),
            (61.0, Low),
            (75.0, Low),
            (76.0, Excellent),
            (100.0, Excellent),
            (8.34, Critical),
            (92.17, Excellent),
        ];
        for (s, l) in cases {
            assert_eq!(b.classify(s).unwrap(), l, "{s}");
        }
    }

    #[test]
    fn out_of_range_is_an_error() {
        let b = RiskBands::default();
        assert!(b.classify(-0.1).is_err());
        assert!(b.classify(100.5).is_err());
        assert!(b.classify(f64::NAN).is_err());
    }

    #[test]
    fn unordered_edges_rejected() {
        let mut b = RiskBands::default();
        b.upper_edges.high = 10.0;
        assert!(b.validate().is_err());
    }
}
