//! Descriptive statistics of grid scores, overall and per factor level.

use serde::{Deserialize, Serialize};

use crate::analysis::grid::ScenarioGrid;
use crate::error::{Error, Result};
use crate::types::SafetyAssessment;

/// Standard deviation is the sample (n − 1) estimate; skewness and excess
/// kurtosis are the moment-based population estimates. Quantiles interpolate
/// linearly between order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub skew: f64,
    pub kurtosis: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn shape(m2: f64, m3: f64, m4: f64) -> (f64, f64) {
    // m_k are central moments divided by n.
    if m2 <= 0.0 {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    }
}

impl ScoreDistribution {
    /// Two-pass batch computation.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Metric("distribution of an empty set".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
        for &v in values {
            let d = v - mean;
            s2 += d * d;
            s3 += d * d * d;
            s4 += d * d * d * d;
        }
        let (skew, kurtosis) = shape(s2 / n, s3 / n, s4 / n);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.75));
        Ok(Self {
            n: values.len(),
            mean,
            median: quantile(&sorted, 0.5),
            std: if values.len() > 1 { (s2 / (n - 1.0)).sqrt() } else { 0.0 },
            skew,
            kurtosis,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            q1,
            q3,
            iqr: q3 - q1,
        })
    }
}

/// Single-pass moment accumulator (Welford's update extended to the third
/// and fourth central moments).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StreamingMoments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
    min: f64,
    max: f64,
}

impl StreamingMoments {
    pub fn new() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            ..Default::default()
        }
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        if self.n > 1 {
            (self.m2 / (self.n - 1) as f64).sqrt()
        } else {
            0.0
        }
    }

    pub fn skew(&self) -> f64 {
        let n = self.n as f64;
        shape(self.m2 / n, self.m3 / n, self.m4 / n).0
    }

    pub fn kurtosis(&self) -> f64 {
        let n = self.n as f64;
        shape(self.m2 / n, self.m3 / n, self.m4 / n).1
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMean {
    pub factor: String,
    pub level: String,
    pub n: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub calibrated: ScoreDistribution,
    pub raw: ScoreDistribution,
    pub by_level: Vec<LevelMean>,
}

impl DistributionReport {
    pub fn level_mean(&self, factor: &str, level: &str) -> Option<f64> {
        self.by_level
            .iter()
            .find(|l| l.factor == factor && l.level == level)
            .map(|l| l.mean)
    }
}

/// Statistics over calibrated (and raw) scores of an assessed grid, with the
/// mean calibrated score of every factor level.
pub fn score_distribution(grid: &ScenarioGrid, assessments: &[SafetyAssessment]) -> Result<DistributionReport> {
    if grid.is_empty() {
        return Err(Error::Grid("score distribution needs a non-empty grid".into()));
    }
    if assessments.len() != grid.len() {
        return Err(Error::Grid(format!(
            "{} assessments for {} grid cells",
            assessments.len(),
            grid.len()
        )));
    }
    let calibrated: Vec<f64> = assessments.iter().map(|a| a.calibrated_score).collect();
    let raw: Vec<f64> = assessments.iter().map(|a| a.raw_score).collect();
    let mut by_level = Vec::new();
    for (fi, f) in grid.spec.factors.iter().enumerate() {
        for (li, level) in f.levels.iter().enumerate() {
            let scores: Vec<f64> = grid
                .cells
                .iter()
                .zip(&calibrated)
                .filter(|(c, _)| c.levels[fi] == li)
                .map(|(_, &s)| s)
                .collect();
            by_level.push(LevelMean {
                factor: f.name.clone(),
                level: level.name.clone(),
                n: scores.len(),
                mean: scores.iter().sum::<f64>() / scores.len() as f64,
            });
        }
    }
    Ok(DistributionReport {
        calibrated: ScoreDistribution::of(&calibrated)?,
        raw: ScoreDistribution::of(&raw)?,
        by_level,
    })
}
