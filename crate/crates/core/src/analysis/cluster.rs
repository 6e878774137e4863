//! Driver profiles: composite aggression and risk-taking scores clustered
//! with k-means (k-means++ seeding, Lloyd iterations).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CrashRecord, FeatureEngineer};
use crate::rng::{derive_seed, rng_for};

const DEFAULT_COMPOSITES_JSON: &str = include_str!("../../../../config/composites_default.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggressionWeights {
    pub speeding: f64,
    pub alcohol: f64,
    pub aggressive_driving: f64,
    /// mph over the limit that counts as speeding even without a
    /// speed-related code.
    pub speeding_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskTakingWeights {
    pub night: f64,
    pub adverse_weather: f64,
    pub poor_lighting: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeWeights {
    pub aggression: AggressionWeights,
    pub risk_taking: RiskTakingWeights,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        Self::from_json(DEFAULT_COMPOSITES_JSON).expect("bundled composite weights are valid")
    }
}

impl CompositeWeights {
    pub fn from_json(text: &str) -> Result<Self> {
        let w: Self = serde_json::from_str(text)?;
        let a = w.aggression;
        let r = w.risk_taking;
        let all = [a.speeding, a.alcohol, a.aggressive_driving, r.night, r.adverse_weather, r.poor_lighting];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) || a.speeding + a.alcohol + a.aggressive_driving <= 0.0 {
            return Err(Error::Clustering("composite weights must be nonnegative with a positive aggression total".into()));
        }
        Ok(w)
    }

    /// `(aggression in [0, 1], risk_taking >= 0)` for one crash record.
    pub fn composites(&self, record: &CrashRecord, engineer: &FeatureEngineer) -> (f64, f64) {
        let codes = engineer.codes();
        let get = |c: &str| record.get(c).unwrap_or(f64::NAN);
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let a = self.aggression;
        let over = get("TRAV_SP") - get("VSPD_LIM");
        let speeding = get("SPEEDREL") == 1.0 || over >= a.speeding_margin;
        let alcohol = codes.in_set("alcohol_involved", get("ALCOHOL"));
        let aggressive = get("AGGR_DRIVING") == 1.0;
        let aggression = (a.speeding * flag(speeding) + a.alcohol * flag(alcohol) + a.aggressive_driving * flag(aggressive))
            / (a.speeding + a.alcohol + a.aggressive_driving);
        let r = self.risk_taking;
        let risk = r.night * flag(engineer.config().is_night(get("HOUR")))
            + r.adverse_weather * flag(codes.in_set("adverse_weather", get("WEATHER")))
            + r.poor_lighting * flag(codes.in_set("poor_lighting", get("LGT_COND")));
        (aggression, risk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest final inertia wins.
    pub n_init: usize,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: 4,
            max_iter: 300,
            n_init: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub centers: Vec<[f64; 2]>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: [f64; 2], centers: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus(points: &[[f64; 2]], k: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = rng_for(seed, 0);
    let mut centers = vec![points[rng.gen_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        centers.push(points[next]);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, points[next]));
        }
    }
    centers
}

fn lloyd(points: &[[f64; 2]], mut centers: Vec<[f64; 2]>, max_iter: usize) -> KMeansResult {
    let k = centers.len();
    let mut assignments = vec![usize::MAX; points.len()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        let mut inertia = 0.0;
        for (a, &p) in assignments.iter_mut().zip(points) {
            let (c, d) = nearest(p, &centers);
            inertia += d;
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        history.push(inertia);
        if !changed {
            converged = true;
            break;
        }
        let mut sums = vec![[0.0, 0.0]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignments.iter().zip(points) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        for c in 0..k {
            // An emptied cluster keeps its previous center.
            if counts[c] > 0 {
                centers[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
    }
    KMeansResult {
        centers,
        assignments,
        inertia_history: history,
        iterations,
        converged,
    }
}

pub fn kmeans(points: &[[f64; 2]], params: &KMeansParams) -> Result<KMeansResult> {
    if params.k == 0 {
        return Err(Error::Clustering("k must be at least 1".into()));
    }
    if points.len() < params.k {
        return Err(Error::Clustering(format!("{} points for k = {}", points.len(), params.k)));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::Clustering("points must be finite".into()));
    }
    let mut best: Option<KMeansResult> = None;
    for run in 0..params.n_init.max(1) {
        let init = plus_plus(points, params.k, derive_seed(params.seed, run as u64));
        let r = lloyd(points, init, params.max_iter.max(1));
        if best.as_ref().is_none_or(|b| r.inertia() < b.inertia()) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one run"))
}

/// Reference profile centers in (aggression, risk-taking) space.
pub const ARCHETYPES: [(&str, [f64; 2]); 4] = [
    ("Cautious but Crashed", [0.0, 0.0]),
    ("Environmental Risk-Taker (high)", [0.07, 2.19]),
    ("Environmental Risk-Taker (moderate)", [0.43, 1.00]),
    ("Aggressive Driver", [1.00, 0.00]),
];

pub fn archetype_label(center: [f64; 2]) -> &'static str {
    let centers: Vec<[f64; 2]> = ARCHETYPES.iter().map(|a| a.1).collect();
    ARCHETYPES[nearest(center, &centers).0].0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverProfile {
    pub casenum: String,
    pub aggression: f64,
    pub risk_taking: f64,
    pub cluster_id: usize,
    pub cluster_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster_id: usize,
    pub label: String,
    pub aggression: f64,
    pub risk_taking: f64,
    pub size: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub params: KMeansParams,
    pub clusters: Vec<ClusterSummary>,
    pub profiles: Vec<DriverProfile>,
    pub inertia_history: Vec<f64>,
    pub converged: bool,
}

pub fn cluster_drivers(
    crashes: &[CrashRecord],
    engineer: &FeatureEngineer,
    weights: &CompositeWeights,
    params: &KMeansParams,
) -> Result<ClusterReport> {
    let points: Vec<[f64; 2]> = crashes
        .iter()
        .map(|r| {
            let (a, b) = weights.composites(r, engineer);
            [a, b]
        })
        .collect();
    let km = kmeans(&points, params)?;
    let labels: Vec<&str> = km.centers.iter().map(|&c| archetype_label(c)).collect();
    let clusters = km
        .centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let size = km.assignments.iter().filter(|&&a| a == i).count();
            ClusterSummary {
                cluster_id: i,
                label: labels[i].to_string(),
                aggression: c[0],
                risk_taking: c[1],
                size,
                share: size as f64 / points.len() as f64,
            }
        })
        .collect();
    let profiles = crashes
        .iter()
        .zip(&points)
        .zip(&km.assignments)
        .map(|((r, p), &a)| DriverProfile {
            casenum: r.casenum.clone(),
            aggression: p[0],
            risk_taking: p[1],
            cluster_id: a,
            cluster_label: labels[a].to_string(),
        })
        .collect();
    Ok(ClusterReport {
        params: *params,
        clusters,
        profiles,
        inertia_history: km.inertia_history,
        converged: km.converged,
    })
}
