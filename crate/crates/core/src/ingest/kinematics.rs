//! Planar trajectory scenarios and the kinematic summary extracted from them:
//! speeds, ego-to-agent separation, constant-velocity time-to-collision and
//! aggressive-maneuver flags.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentType {
    Vehicle,
    Pedestrian,
    Cyclist,
}

impl AgentType {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vehicle" => Some(AgentType::Vehicle),
            "pedestrian" => Some(AgentType::Pedestrian),
            "cyclist" => Some(AgentType::Cyclist),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentType::Vehicle => "vehicle",
            AgentType::Pedestrian => "pedestrian",
            AgentType::Cyclist => "cyclist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack {
    pub agent_id: String,
    pub agent_type: AgentType,
    pub points: Vec<TrackPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryScenario {
    pub scenario_id: String,
    pub agents: Vec<AgentTrack>,
    pub ego_id: String,
}

/// Agent id that marks the ego track; otherwise the first vehicle is ego.
pub const EGO_ID: &str = "ego";

impl TrajectoryScenario {
    pub fn new(scenario_id: impl Into<String>, agents: Vec<AgentTrack>) -> Result<Self> {
        let scenario_id = scenario_id.into();
        for a in &agents {
            if let Some(w) = a.points.windows(2).find(|w| w[1].t <= w[0].t) {
                return Err(Error::Kinematics(format!(
                    "scenario `{scenario_id}` agent `{}`: timestamps not increasing at t = {}",
                    a.agent_id, w[1].t
                )));
            }
        }
        let ego_id = agents
            .iter()
            .find(|a| a.agent_id == EGO_ID)
            .or_else(|| agents.iter().find(|a| a.agent_type == AgentType::Vehicle))
            .map(|a| a.agent_id.clone())
            .ok_or_else(|| Error::Kinematics(format!("scenario `{scenario_id}` has no ego vehicle")))?;
        Ok(Self {
            scenario_id,
            agents,
            ego_id,
        })
    }

    pub fn ego(&self) -> &AgentTrack {
        self.agents
            .iter()
            .find(|a| a.agent_id == self.ego_id)
            .expect("ego id refers to a track")
    }

    pub fn others(&self) -> impl Iterator<Item = &AgentTrack> {
        self.agents.iter().filter(move |a| a.agent_id != self.ego_id)
    }

    pub fn count_type(&self, ty: AgentType) -> usize {
        self.others().filter(|a| a.agent_type == ty).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicConfig {
    pub collision_distance: f64,
    pub near_miss_distance: f64,
    pub ttc_threshold: f64,
    /// Longitudinal acceleration magnitude, m/s², for hard accel/brake.
    pub hard_accel: f64,
    /// Lateral acceleration, m/s², for an aggressive lane change.
    pub lane_change_lateral_accel: f64,
    /// Ego speed, m/s, above which the speed-violation flag is raised.
    pub speed_limit: f64,
}

impl Default for KinematicConfig {
    fn default() -> Self {
        Self {
            collision_distance: 0.5,
            near_miss_distance: 2.0,
            ttc_threshold: 1.5,
            hard_accel: 3.0,
            lane_change_lateral_accel: 3.0,
            speed_limit: 29.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggressiveFlag {
    HardAccel,
    HardBrake,
    AggressiveLaneChange,
    SpeedViolation,
    /// Never raised from planar tracks alone; signal state is not in the data.
    RedLight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicFeatures {
    pub mean_speed: f64,
    pub max_speed: f64,
    #[serde(with = "inf_as_null")]
    pub min_inter_agent_distance: f64,
    #[serde(with = "inf_as_null")]
    pub min_ttc: f64,
    pub collision_flag: bool,
    pub near_miss_flag: bool,
    pub aggressive_flags: BTreeSet<AggressiveFlag>,
}

/// Episode outcome implied by the kinematic flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioType {
    Safe,
    NearMiss,
    Collision,
}

impl ScenarioType {
    pub const ALL: [ScenarioType; 3] = [ScenarioType::Safe, ScenarioType::NearMiss, ScenarioType::Collision];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioType::Safe => "safe",
            ScenarioType::NearMiss => "near-miss",
            ScenarioType::Collision => "collision",
        }
    }

    pub fn from_features(k: &KinematicFeatures) -> Self {
        if k.collision_flag {
            ScenarioType::Collision
        } else if k.near_miss_flag {
            ScenarioType::NearMiss
        } else {
            ScenarioType::Safe
        }
    }
}

/// JSON has no infinity; store it as `null`.
mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn time_key(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

/// Finite-difference velocity vectors: forward differences, backward at the
/// last point. A single-point track has zero velocity.
fn velocities(points: &[TrackPoint]) -> Vec<(f64, f64)> {
    let n = points.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                return (0.0, 0.0);
            }
            let (a, b) = if i + 1 < n { (i, i + 1) } else { (i - 1, i) };
            let dt = points[b].t - points[a].t;
            ((points[b].x - points[a].x) / dt, (points[b].y - points[a].y) / dt)
        })
        .collect()
}

/// Distance and constant-velocity TTC between two agents at one instant.
pub fn pairwise_ttc(dx: f64, dy: f64, dvx: f64, dvy: f64) -> (f64, f64) {
    let d = dx.hypot(dy);
    if d < 1e-12 {
        return (d, f64::INFINITY);
    }
    let closing = -(dx * dvx + dy * dvy) / d;
    let ttc = if closing > 0.0 { d / closing } else { f64::INFINITY };
    (d, ttc)
}

pub fn extract_kinematics(scenario: &TrajectoryScenario, cfg: &KinematicConfig) -> Result<KinematicFeatures> {
    let ego = scenario.ego();
    if ego.points.len() < 2 {
        return Err(Error::Kinematics(format!(
            "scenario `{}`: ego track has {} timesteps, need at least 2",
            scenario.scenario_id,
            ego.points.len()
        )));
    }
    let speeds: Vec<f64> = ego.points.iter().map(|p| p.v).collect();
    let mean_speed = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let max_speed = speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let ego_vel = velocities(&ego.points);
    let mut min_dist = f64::INFINITY;
    let mut min_ttc = f64::INFINITY;
    for other in scenario.others() {
        let vel = velocities(&other.points);
        let by_time: HashMap<i64, usize> = other
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (time_key(p.t), i))
            .collect();
        for (i, p) in ego.points.iter().enumerate() {
            let Some(&j) = by_time.get(&time_key(p.t)) else {
                continue;
            };
            let q = other.points[j];
            let (d, ttc) = pairwise_ttc(
                q.x - p.x,
                q.y - p.y,
                vel[j].0 - ego_vel[i].0,
                vel[j].1 - ego_vel[i].1,
            );
            min_dist = min_dist.min(d);
            min_ttc = min_ttc.min(ttc);
        }
    }

    let collision_flag = min_dist < cfg.collision_distance;
    let near_miss_flag =
        !collision_flag && (min_dist < cfg.near_miss_distance || min_ttc < cfg.ttc_threshold);

    let mut flags = BTreeSet::new();
    for w in ego.points.windows(2) {
        let a = (w[1].v - w[0].v) / (w[1].t - w[0].t);
        if a > cfg.hard_accel {
            flags.insert(AggressiveFlag::HardAccel);
        }
        if a < -cfg.hard_accel {
            flags.insert(AggressiveFlag::HardBrake);
        }
    }
    if max_lateral_accel(&ego.points) > cfg.lane_change_lateral_accel {
        flags.insert(AggressiveFlag::AggressiveLaneChange);
    }
    if max_speed > cfg.speed_limit {
        flags.insert(AggressiveFlag::SpeedViolation);
    }

    Ok(KinematicFeatures {
        mean_speed,
        max_speed,
        min_inter_agent_distance: min_dist,
        min_ttc,
        collision_flag,
        near_miss_flag,
        aggressive_flags: flags,
    })
}

/// Peak |speed × yaw rate| along the track, with heading taken from
/// consecutive displacements. Near-stationary segments carry no heading.
fn max_lateral_accel(points: &[TrackPoint]) -> f64 {
    let headings: Vec<Option<(f64, f64)>> = points
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
            let dt = w[1].t - w[0].t;
            (dx.hypot(dy) / dt > 1.0).then(|| (dy.atan2(dx), (w[0].t + w[1].t) / 2.0))
        })
        .collect();
    let mut peak: f64 = 0.0;
    for (k, w) in headings.windows(2).enumerate() {
        if let (Some((h0, t0)), Some((h1, t1))) = (w[0], w[1]) {
            let mut dh = h1 - h0;
            while dh > std::f64::consts::PI {
                dh -= 2.0 * std::f64::consts::PI;
            }
            while dh < -std::f64::consts::PI {
                dh += 2.0 * std::f64::consts::PI;
            }
            let yaw_rate = dh / (t1 - t0);
            peak = peak.max((points[k + 1].v * yaw_rate).abs());
        }
    }
    peak
}

pub fn load_trajectories(path: &Path) -> Result<Vec<TrajectoryScenario>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectories(file)
}

/// Read long-format `scenario_id,agent_id,agent_type,t,x,y,v` rows. Scenarios
/// and agents keep their order of first appearance.
pub fn read_trajectories<R: Read>(reader: R) -> Result<Vec<TrajectoryScenario>> {
    const COLUMNS: [&str; 7] = ["scenario_id", "agent_id", "agent_type", "t", "x", "y", "v"];
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut pos = [0usize; 7];
    for (k, name) in COLUMNS.iter().enumerate() {
        pos[k] = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }

    let mut order: Vec<String> = Vec::new();
    let mut scenarios: BTreeMap<String, Vec<AgentTrack>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let cell = |k: usize| row.get(pos[k]).unwrap_or_default();
        let num = |k: usize| -> Result<f64> {
            cell(k)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Load(format!("line {line}: bad `{}` value `{}`", COLUMNS[k], cell(k))))
        };
        let agent_type = AgentType::parse(cell(2))
            .ok_or_else(|| Error::Load(format!("line {line}: unknown agent type `{}`", cell(2))))?;
        let point = TrackPoint {
            t: num(3)?,
            x: num(4)?,
            y: num(5)?,
            v: num(6)?,
        };
        let sid = cell(0).to_string();
        let agents = scenarios.entry(sid.clone()).or_insert_with(|| {
            order.push(sid.clone());
            Vec::new()
        });
        match agents.iter_mut().find(|a| a.agent_id == cell(1)) {
            Some(a) => a.points.push(point),
            None => agents.push(AgentTrack {
                agent_id: cell(1).to_string(),
                agent_type,
                points: vec![point],
            }),
        }
    }
    order
        .into_iter()
        .map(|sid| {
            let agents = scenarios.remove(&sid).expect("scenario recorded");
            TrajectoryScenario::new(sid, agents)
        })
        .collect()
}

pub fn write_trajectories<W: std::io::Write>(writer: W, scenarios: &[TrajectoryScenario]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scenario_id", "agent_id", "agent_type", "t", "x", "y", "v"])?;
    for s in scenarios {
        for a in &s.agents {
            for p in &a.points {
                w.write_record([
                    s.scenario_id.clone(),
                    a.agent_id.clone(),
                    a.agent_type.name().to_string(),
                    format!("{:.2}", p.t),
                    format!("{:.4}", p.x),
                    format!("{:.4}", p.y),
                    format!("{:.4}", p.v),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::Load(e.to_string()))?;
    Ok(())
}
