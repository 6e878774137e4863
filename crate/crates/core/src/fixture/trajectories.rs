//! Scripted trajectory episodes: safe passes, near-miss crossings and
//! collisions, each with a companion conditions row.
//!
//! The ego drives straight along +x at constant speed. In safe episodes a
//! vehicle in the next lane pulls away; in the other two a pedestrian or
//! cyclist crosses ahead, timed so that its lateral offset at the instant the
//! ego reaches the crossing line is the planted miss distance.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::kinematics::{AgentTrack, AgentType, ScenarioType, TrackPoint, EGO_ID};
use crate::ingest::{ScenarioConditions, TrajectoryScenario};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryFixtureConfig {
    pub per_kind: usize,
    /// Episode length in seconds.
    pub duration: f64,
    /// Sampling interval in seconds.
    pub dt: f64,
    pub seed: u64,
}

impl Default for TrajectoryFixtureConfig {
    fn default() -> Self {
        Self {
            per_kind: 30,
            duration: 6.0,
            dt: 0.1,
            seed: 0,
        }
    }
}

pub struct TrajectoryFixture {
    pub scenarios: Vec<TrajectoryScenario>,
    pub conditions: Vec<(String, ScenarioConditions)>,
    /// Scripted type per scenario, in scenario order.
    pub kinds: Vec<ScenarioType>,
}

fn track(id: &str, ty: AgentType, n: usize, dt: f64, at: impl Fn(f64) -> (f64, f64), speed: f64) -> AgentTrack {
    AgentTrack {
        agent_id: id.to_string(),
        agent_type: ty,
        points: (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                let (x, y) = at(t);
                TrackPoint { t, x, y, v: speed }
            })
            .collect(),
    }
}

/// Riskier kinds get riskier conditions: safe episodes run at midday in
/// clear weather, near-misses around dawn and dusk with some rain, collisions
/// mostly at night in the dark and in rain or snow.
fn conditions(kind: ScenarioType, rng: &mut ChaCha8Rng) -> ScenarioConditions {
    let mut c = ScenarioConditions::default();
    match kind {
        ScenarioType::Safe => {
            c.hour = rng.gen_range(10..=14) as f64;
        }
        ScenarioType::NearMiss => {
            let dawn = rng.gen_bool(0.5);
            c.hour = if dawn { 6.0 } else { 20.0 };
            c.lgt_cond = if dawn { 4.0 } else { [5.0, 3.0][rng.gen_range(0..2)] };
            if rng.gen_bool(0.5) {
                c.weather = 2.0;
                c.surface = 2.0;
            }
        }
        ScenarioType::Collision => {
            c.hour = [22.0, 23.0, 0.0, 1.0, 2.0, 3.0][rng.gen_range(0..6)];
            c.lgt_cond = if rng.gen_bool(0.7) { 2.0 } else { 3.0 };
            if rng.gen_bool(0.7) {
                let snow = rng.gen_bool(0.3);
                c.weather = if snow { 4.0 } else { 2.0 };
                c.surface = if snow { 4.0 } else { 2.0 };
            }
        }
    }
    c
}

fn episode(kind: ScenarioType, id: String, cfg: &TrajectoryFixtureConfig, rng: &mut ChaCha8Rng) -> Result<TrajectoryScenario> {
    let n = (cfg.duration / cfg.dt).round() as usize + 1;
    let dt = cfg.dt;
    let ego_speed = rng.gen_range(8.0..14.0);
    let ego = track(EGO_ID, AgentType::Vehicle, n, dt, |t| (ego_speed * t, 0.0), ego_speed);
    let other = match kind {
        ScenarioType::Safe => {
            let lateral = rng.gen_range(4.0..8.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let lead = rng.gen_range(10.0..30.0);
            let speed = ego_speed + rng.gen_range(0.5..2.0);
            track("v1", AgentType::Vehicle, n, dt, |t| (lead + speed * t, lateral), speed)
        }
        ScenarioType::NearMiss | ScenarioType::Collision => {
            // Crossing instant on the sample grid, in the middle third.
            let step = rng.gen_range(n / 3..2 * n / 3);
            let t_cross = step as f64 * dt;
            let x_cross = ego_speed * t_cross;
            let miss = if kind == ScenarioType::NearMiss {
                rng.gen_range(0.9..1.6)
            } else {
                rng.gen_range(0.0..0.3)
            };
            let (ty, id, speed) = if rng.gen_bool(0.7) {
                (AgentType::Pedestrian, "p1", rng.gen_range(1.0..1.8))
            } else {
                (AgentType::Cyclist, "c1", rng.gen_range(3.0..5.0))
            };
            // Lateral position passes through `-miss` at the crossing instant.
            track(id, ty, n, dt, |t| (x_cross, -miss + speed * (t - t_cross)), speed)
        }
    };
    TrajectoryScenario::new(id, vec![ego, other])
}

pub fn trajectory_fixture(cfg: &TrajectoryFixtureConfig) -> Result<TrajectoryFixture> {
    let mut scenarios = Vec::new();
    let mut conds = Vec::new();
    let mut kinds = Vec::new();
    for (k, kind) in ScenarioType::ALL.into_iter().enumerate() {
        for i in 0..cfg.per_kind {
            let mut rng = rng_for(cfg.seed, (k * 1_000_000 + i) as u64);
            let id = format!("{}-{:04}", kind.name(), i + 1);
            let c = conditions(kind, &mut rng);
            scenarios.push(episode(kind, id.clone(), cfg, &mut rng)?);
            conds.push((id, c));
            kinds.push(kind);
        }
    }
    Ok(TrajectoryFixture {
        scenarios,
        conditions: conds,
        kinds,
    })
}
