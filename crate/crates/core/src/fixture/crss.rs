//! Crash-report fixture: records in the raw CRSS-style column layout with
//! configurable marginal rates for the headline risk factors.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    build_dataset, synthesize_safe_samples, CrashRecord, FeatureEngineer, FlipRates, LabeledDataset, SynthReport,
};
use crate::rng::rng_for;
use crate::schema::FeatureSchema;

/// Target share of crash records showing each factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorRates {
    pub rush_hour: f64,
    pub poor_lighting: f64,
    pub weekend: f64,
    pub adverse_weather: f64,
    pub night: f64,
    pub vru: f64,
}

impl Default for FactorRates {
    fn default() -> Self {
        Self {
            rush_hour: 0.353,
            poor_lighting: 0.292,
            weekend: 0.251,
            adverse_weather: 0.233,
            night: 0.214,
            vru: 0.087,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrashFixtureConfig {
    pub n_records: usize,
    pub rates: FactorRates,
    /// Share of crashes caused by an aggressive driver (speeding, impaired,
    /// aggressive maneuvers).
    pub aggressive_share: f64,
    /// Probability that a coded categorical cell holds its unknown code.
    pub unknown_rate: f64,
    pub seed: u64,
}

impl Default for CrashFixtureConfig {
    fn default() -> Self {
        Self {
            n_records: 10_000,
            rates: FactorRates::default(),
            aggressive_share: 0.22,
            unknown_rate: 0.01,
            seed: 0,
        }
    }
}

impl CrashFixtureConfig {
    pub fn validate(&self) -> Result<()> {
        let r = &self.rates;
        for (name, p) in [
            ("rush_hour", r.rush_hour),
            ("poor_lighting", r.poor_lighting),
            ("weekend", r.weekend),
            ("adverse_weather", r.adverse_weather),
            ("night", r.night),
            ("vru", r.vru),
            ("aggressive_share", self.aggressive_share),
            ("unknown_rate", self.unknown_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Load(format!("fixture rate `{name}` = {p} outside [0, 1]")));
            }
        }
        if r.night + r.rush_hour > 1.0 {
            return Err(Error::Load("night and rush-hour rates are disjoint and must sum to at most 1".into()));
        }
        if r.poor_lighting < r.night * DARK_AT_NIGHT {
            return Err(Error::Load(format!(
                "poor_lighting rate must be at least {:.3} given the night rate",
                r.night * DARK_AT_NIGHT
            )));
        }
        Ok(())
    }
}

// Hour classes for the default engineering config.
const NIGHT_HOURS: [f64; 7] = [22.0, 23.0, 0.0, 1.0, 2.0, 3.0, 4.0];
const RUSH_HOURS: [f64; 5] = [7.0, 8.0, 16.0, 17.0, 18.0];
const OTHER_HOURS: [f64; 12] = [5.0, 6.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 19.0, 20.0, 21.0];

/// Share of night crashes that happen in the dark.
const DARK_AT_NIGHT: f64 = 0.95;

const SPEED_LIMITS: [f64; 7] = [25.0, 30.0, 35.0, 40.0, 45.0, 55.0, 65.0];

fn pick<T: Copy>(rng: &mut ChaCha8Rng, weighted: &[(T, f64)]) -> T {
    let total: f64 = weighted.iter().map(|w| w.1).sum();
    let mut u = rng.gen::<f64>() * total;
    for &(v, w) in weighted {
        if u < w {
            return v;
        }
        u -= w;
    }
    weighted[weighted.len() - 1].0
}

fn one_of(rng: &mut ChaCha8Rng, values: &[f64]) -> f64 {
    *values.choose(rng).expect("non-empty choice")
}

fn int(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> f64 {
    rng.gen_range(lo..=hi) as f64
}

fn crash_record(cfg: &CrashFixtureConfig, i: usize) -> CrashRecord {
    let mut rng = rng_for(cfg.seed, i as u64);
    let r = &cfg.rates;
    let mut rec = CrashRecord::new(format!("C{:07}", i + 1));
    let unknown = |rng: &mut ChaCha8Rng, value: f64, code: f64| {
        if rng.gen::<f64>() < cfg.unknown_rate {
            code
        } else {
            value
        }
    };

    let u = rng.gen::<f64>();
    let night = u < r.night;
    let hour = if night {
        one_of(&mut rng, &NIGHT_HOURS)
    } else if u < r.night + r.rush_hour {
        one_of(&mut rng, &RUSH_HOURS)
    } else {
        one_of(&mut rng, &OTHER_HOURS)
    };

    let day_poor = ((r.poor_lighting - r.night * DARK_AT_NIGHT) / (1.0 - r.night)).clamp(0.0, 1.0);
    let lighting = if night {
        if rng.gen::<f64>() < DARK_AT_NIGHT {
            pick(&mut rng, &[(2.0, 0.55), (3.0, 0.40), (6.0, 0.05)])
        } else {
            1.0
        }
    } else if rng.gen::<f64>() < day_poor {
        if hour < 12.0 {
            4.0
        } else {
            pick(&mut rng, &[(5.0, 0.5), (3.0, 0.5)])
        }
    } else {
        1.0
    };
    let lighting = unknown(&mut rng, lighting, 9.0);

    let weather = if rng.gen::<f64>() < r.adverse_weather {
        pick(
            &mut rng,
            &[(2.0, 0.55), (4.0, 0.15), (3.0, 0.05), (5.0, 0.08), (12.0, 0.07), (11.0, 0.05), (8.0, 0.05)],
        )
    } else {
        pick(&mut rng, &[(1.0, 0.8), (10.0, 0.2)])
    };
    let surface = match weather as i64 {
        2 => pick(&mut rng, &[(2.0, 0.85), (6.0, 0.05), (1.0, 0.10)]),
        12 => pick(&mut rng, &[(2.0, 0.6), (4.0, 0.4)]),
        3 | 4 | 11 => pick(&mut rng, &[(3.0, 0.5), (4.0, 0.35), (10.0, 0.15)]),
        5..=8 => pick(&mut rng, &[(1.0, 0.7), (2.0, 0.3)]),
        _ => pick(&mut rng, &[(1.0, 0.95), (2.0, 0.05)]),
    };
    let weather = unknown(&mut rng, weather, 99.0);
    let surface = unknown(&mut rng, surface, 99.0);

    let day = if rng.gen::<f64>() < r.weekend {
        one_of(&mut rng, &[1.0, 7.0])
    } else {
        int(&mut rng, 2, 6)
    };

    let vru = rng.gen::<f64>() < r.vru;
    let pedestrian = vru && rng.gen::<f64>() < 0.82;
    let (peds, cyclists) = match (vru, pedestrian) {
        (false, _) => (0.0, 0.0),
        (true, true) => (pick(&mut rng, &[(1.0, 0.9), (2.0, 0.1)]), 0.0),
        (true, false) => (0.0, 1.0),
    };

    let aggressive = rng.gen::<f64>() < cfg.aggressive_share;
    let limit = one_of(&mut rng, &SPEED_LIMITS);
    let over: f64 = if aggressive {
        rng.gen_range(3.0..28.0)
    } else {
        rng.gen_range(-10.0..6.0)
    };
    let speed = (limit + over).max(0.0).round();
    let (p_speedrel, p_alcohol, p_aggr) = if aggressive { (0.7, 0.25, 0.6) } else { (0.03, 0.04, 0.02) };
    let speedrel = (rng.gen::<f64>() < p_speedrel) as u8 as f64;
    let alcohol = if rng.gen::<f64>() < p_alcohol { 1.0 } else { 2.0 };
    let alcohol = unknown(&mut rng, alcohol, 9.0);
    let aggr = (rng.gen::<f64>() < p_aggr) as u8 as f64;

    let year = int(&mut rng, 2016, 2023);
    let injury = if vru { int(&mut rng, 1, 4) } else { 0.0 };
    let vehicles = pick(&mut rng, &[(1.0, 0.3), (2.0, 0.55), (3.0, 0.15)]);

    let fields: [(&str, f64); 47] = [
        ("HOUR", hour),
        ("MINUTE", int(&mut rng, 0, 59)),
        ("MONTH", int(&mut rng, 1, 12)),
        ("DAY_WEEK", day),
        ("YEAR", year),
        ("WEATHER", weather),
        ("LGT_COND", lighting),
        ("TYP_INT", int(&mut rng, 1, 7)),
        ("REL_ROAD", int(&mut rng, 1, 8)),
        ("WRK_ZONE", pick(&mut rng, &[(0.0, 0.97), (1.0, 0.03)])),
        ("INT_HWY", pick(&mut rng, &[(0.0, 0.85), (1.0, 0.15)])),
        ("RELJCT2", int(&mut rng, 1, 8)),
        ("VSURCOND", surface),
        ("VSPD_LIM", limit),
        ("pedestrian_count", peds),
        ("cyclist_count", cyclists),
        ("max_vru_injury", injury),
        ("HARM_EV", if pedestrian { 8.0 } else if vru { 9.0 } else { 12.0 }),
        ("MAN_COLL", int(&mut rng, 0, 11)),
        ("ALCOHOL", alcohol),
        ("MAX_SEV", int(&mut rng, 0, 4)),
        ("VE_TOTAL", vehicles),
        ("PEDS", peds),
        ("PERMVIT", int(&mut rng, 1, 5)),
        ("PERNOTMVIT", peds + cyclists),
        ("VE_FORMS", vehicles),
        ("NUM_INJ", int(&mut rng, 0, 4)),
        ("TRAV_SP", speed),
        ("SPEEDREL", speedrel),
        ("AGGR_DRIVING", aggr),
        ("BODY_TYP", one_of(&mut rng, &[1.0, 2.0, 4.0, 14.0, 15.0, 31.0, 34.0, 66.0, 80.0])),
        ("MOD_YEAR", year - int(&mut rng, 0, 20)),
        ("DR_AGE", int(&mut rng, 16, 85)),
        ("DR_SEX", int(&mut rng, 1, 2)),
        ("DEFORMED", one_of(&mut rng, &[0.0, 2.0, 4.0, 6.0])),
        ("ROLLOVER", pick(&mut rng, &[(0.0, 0.96), (1.0, 0.04)])),
        ("HIT_RUN", pick(&mut rng, &[(0.0, 0.93), (1.0, 0.07)])),
        ("DRUGS", pick(&mut rng, &[(0.0, 0.95), (1.0, 0.05)])),
        ("DISTRACTED", pick(&mut rng, &[(0.0, 0.88), (1.0, 0.12)])),
        ("STRATUM", int(&mut rng, 2, 10)),
        ("REGION", int(&mut rng, 1, 4)),
        ("URBANICITY", int(&mut rng, 1, 2)),
        ("PJ", int(&mut rng, 1, 60)),
        ("PSU", int(&mut rng, 1, 60)),
        ("PSU_VAR", int(&mut rng, 1, 120)),
        ("PSUSTRAT", int(&mut rng, 1, 25)),
        ("WEIGHT", (rng.gen_range(1.0..500.0_f64) * 100.0).round() / 100.0),
    ];
    for (k, v) in fields {
        rec.set(k, v);
    }
    rec
}

/// Generate crash records. Every raw column of `schema` must be one the
/// generator knows.
pub fn crash_fixture(cfg: &CrashFixtureConfig, schema: &FeatureSchema) -> Result<Vec<CrashRecord>> {
    cfg.validate()?;
    let records: Vec<CrashRecord> = (0..cfg.n_records).into_par_iter().map(|i| crash_record(cfg, i)).collect();
    if let Some(first) = records.first() {
        if let Some(col) = schema.raw_columns().into_iter().find(|c| first.get(c).is_none()) {
            return Err(Error::Load(format!("crash fixture does not generate column `{col}`")));
        }
    }
    Ok(records)
}

/// Crash fixture plus synthesized safe clones, engineered into a dataset.
pub struct FixtureData {
    pub crashes: Vec<CrashRecord>,
    pub safe: Vec<CrashRecord>,
    pub synthesis: SynthReport,
    pub dataset: LabeledDataset,
}

pub fn crash_fixture_dataset(
    cfg: &CrashFixtureConfig,
    engineer: &FeatureEngineer,
    flip_rates: &FlipRates,
) -> Result<FixtureData> {
    let crashes = crash_fixture(cfg, engineer.schema())?;
    let (safe, synthesis) = synthesize_safe_samples(
        &crashes,
        flip_rates,
        engineer.codes(),
        engineer.config(),
        crate::rng::derive_seed(cfg.seed, 1),
    )?;
    let mut all = crashes.clone();
    all.extend(safe.iter().cloned());
    let (dataset, _) = build_dataset(engineer, &all)?;
    Ok(FixtureData {
        crashes,
        safe,
        synthesis,
        dataset,
    })
}
