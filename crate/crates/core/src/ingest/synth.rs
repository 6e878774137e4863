//! Safe-sample synthesis: each crash record gets one clone whose risky
//! dimensions are moved to safe codes, each with its own probability.
//!
//! Lighting and time of day share one uniform draw, as do weather and road
//! surface. Each dimension still flips at its configured rate, but the pairs
//! move together: with the default rates a clone moved to a daytime hour is
//! always moved to daylight too, and a dried road always comes with clear
//! weather. Independent draws would leave clones such as "noon, dark, unlit"
//! that never occur among crashes, and a classifier trained on them learns
//! that darkness at midday is safe.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::CodeMap;
use crate::error::{Error, Result};
use crate::ingest::engineer::EngineeringConfig;
use crate::ingest::records::CrashRecord;
use crate::rng::rng_for;
use crate::types::Label;

/// Per-dimension probability of moving a risky value to its safe code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlipRates {
    pub lighting: f64,
    pub night: f64,
    pub weather: f64,
    pub road: f64,
}

impl Default for FlipRates {
    fn default() -> Self {
        Self {
            lighting: 0.80,
            night: 0.70,
            weather: 0.90,
            road: 0.85,
        }
    }
}

impl FlipRates {
    pub fn uniform(rate: f64) -> Self {
        Self {
            lighting: rate,
            night: rate,
            weather: rate,
            road: rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("lighting", self.lighting),
            ("night", self.night),
            ("weather", self.weather),
            ("road", self.road),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Load(format!("flip rate `{name}` = {r} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipTally {
    /// Source records that were risky on this dimension.
    pub risky: usize,
    /// Clones actually moved to the safe value.
    pub flipped: usize,
}

impl FlipTally {
    pub fn fraction(&self) -> Option<f64> {
        (self.risky > 0).then(|| self.flipped as f64 / self.risky as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthReport {
    pub clones: usize,
    pub lighting: FlipTally,
    pub night: FlipTally,
    pub weather: FlipTally,
    pub road: FlipTally,
}

/// Suffix appended to a crash CASENUM to form its safe clone's id.
pub const SAFE_SUFFIX: &str = "-S";

pub fn synthesize_safe_samples(
    crashes: &[CrashRecord],
    rates: &FlipRates,
    codes: &CodeMap,
    night: &EngineeringConfig,
    seed: u64,
) -> Result<(Vec<CrashRecord>, SynthReport)> {
    rates.validate()?;
    let safe = codes.safe_targets;
    let [lo, hi] = safe.daytime_hours;
    let out: Vec<(CrashRecord, [(bool, bool); 4])> = crashes
        .par_iter()
        .enumerate()
        .map(|(i, crash)| {
            // One stream per row, all draws taken unconditionally so a row's
            // outcome never depends on which dimensions other rows hit.
            let mut rng = rng_for(seed, i as u64);
            let (dark, wet): (f64, f64) = (rng.gen(), rng.gen());
            let u = [dark, dark, wet, wet];
            let day_hour = rng.gen_range(lo..=hi) as f64;

            let mut clone = crash.clone();
            clone.casenum = format!("{}{SAFE_SUFFIX}", crash.casenum);
            clone.label = Label::Safe;
            let mut tally = [(false, false); 4];

            if let Some(v) = crash.get("LGT_COND") {
                if codes.in_set("poor_lighting", v) {
                    let flip = u[0] < rates.lighting;
                    tally[0] = (true, flip);
                    if flip {
                        clone.set("LGT_COND", safe.lighting as f64);
                    }
                }
            }
            if let Some(h) = crash.get("HOUR") {
                if night.is_night(h) {
                    let flip = u[1] < rates.night;
                    tally[1] = (true, flip);
                    if flip {
                        clone.set("HOUR", day_hour);
                    }
                }
            }
            if let Some(v) = crash.get("WEATHER") {
                if codes.in_set("adverse_weather", v) {
                    let flip = u[2] < rates.weather;
                    tally[2] = (true, flip);
                    if flip {
                        clone.set("WEATHER", safe.weather as f64);
                    }
                }
            }
            if let Some(v) = crash.get("VSURCOND") {
                if codes.in_set("adverse_surface", v) {
                    let flip = u[3] < rates.road;
                    tally[3] = (true, flip);
                    if flip {
                        clone.set("VSURCOND", safe.surface as f64);
                    }
                }
            }
            (clone, tally)
        })
        .collect();

    let mut report = SynthReport {
        clones: out.len(),
        ..Default::default()
    };
    let mut clones = Vec::with_capacity(out.len());
    for (clone, tally) in out {
        for (slot, (risky, flipped)) in [
            &mut report.lighting,
            &mut report.night,
            &mut report.weather,
            &mut report.road,
        ]
        .into_iter()
        .zip(tally)
        {
            slot.risky += risky as usize;
            slot.flipped += flipped as usize;
        }
        clones.push(clone);
    }
    Ok((clones, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn risky(id: &str) -> CrashRecord {
        CrashRecord::new(id)
            .with("HOUR", 2.0)
            .with("LGT_COND", 2.0)
            .with("WEATHER", 2.0)
            .with("VSURCOND", 2.0)
            .with("TRAV_SP", 50.0)
    }

    #[test]
    fn rate_one_makes_every_dimension_safe() {
        let (out, rep) = synthesize_safe_samples(
            &[risky("a")],
            &FlipRates::uniform(1.0),
            &CodeMap::default_crss(),
            &EngineeringConfig::default(),
            7,
        )
        .unwrap();
        let c = &out[0];
        assert_eq!(c.label, Label::Safe);
        assert_eq!(c.get("LGT_COND"), Some(1.0));
        assert_eq!(c.get("WEATHER"), Some(1.0));
        assert_eq!(c.get("VSURCOND"), Some(1.0));
        let h = c.get("HOUR").unwrap();
        assert!((8.0..=17.0).contains(&h));
        assert_eq!(rep.night, FlipTally { risky: 1, flipped: 1 });
    }

    #[test]
    fn rate_zero_changes_only_the_label() {
        let src = risky("a");
        let (out, _) = synthesize_safe_samples(
            std::slice::from_ref(&src),
            &FlipRates::uniform(0.0),
            &CodeMap::default_crss(),
            &EngineeringConfig::default(),
            7,
        )
        .unwrap();
        assert_eq!(out[0].fields, src.fields);
        assert_eq!(out[0].label, Label::Safe);
        assert_eq!(out[0].casenum, "a-S");
    }

    #[test]
    fn rates_outside_unit_interval_rejected() {
        let r = FlipRates {
            night: 1.2,
            ..Default::default()
        };
        assert!(r.validate().is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let rows: Vec<_> = (0..50).map(|i| risky(&i.to_string())).collect();
        let run = |seed| {
            synthesize_safe_samples(&rows, &FlipRates::default(), &CodeMap::default_crss(), &EngineeringConfig::default(), seed)
                .unwrap()
                .0
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn paired_dimensions_move_together() {
        let rows: Vec<_> = (0..2000).map(|i| risky(&i.to_string())).collect();
        let (out, rep) =
            synthesize_safe_samples(&rows, &FlipRates::default(), &CodeMap::default_crss(), &EngineeringConfig::default(), 5)
                .unwrap();
        for c in &out {
            if !EngineeringConfig::default().is_night(c.get("HOUR").unwrap()) {
                assert_eq!(c.get("LGT_COND"), Some(1.0));
            }
            if c.get("VSURCOND") == Some(1.0) {
                assert_eq!(c.get("WEATHER"), Some(1.0));
            }
        }
        let night = rep.night.fraction().unwrap();
        let light = rep.lighting.fraction().unwrap();
        assert!((night - 0.70).abs() < 0.035 && (light - 0.80).abs() < 0.03, "{night} {light}");
    }
}
