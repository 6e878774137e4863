//! Run configuration: TOML file, command-line flags and defaults merged into
//! one resolved [`RunConfig`]. A value set in the config file wins over the
//! same value given as a flag, which wins over the built-in default.

use std::path::{Path, PathBuf};

use invscore::analysis::{ExpectedLevelRules, KMeansParams, DEFAULT_COMPLIANCE, DEFAULT_THRESHOLDS};
use invscore::fixture::{CrashFixtureConfig, FactorRates, PlantedConfig, TrajectoryFixtureConfig};
use invscore::forest::{FeaturesPerSplit, ForestParams};
use invscore::ingest::{EngineeringConfig, FlipRates, KinematicConfig};
use invscore::rng::derive_seed;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Seed streams derived from the run seed, one per stochastic stage.
pub mod stream {
    pub const SYNTH: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const FOREST: u64 = 3;
    pub const PERMUTATION: u64 = 4;
    pub const KMEANS: u64 = 5;
    pub const BACKGROUND: u64 = 6;
    pub const FIXTURE_CRASHES: u64 = 10;
    pub const FIXTURE_TRAJECTORIES: u64 = 11;
    pub const FIXTURE_PLANTED: u64 = 12;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crashes: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub codes: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub composites: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub n_estimators: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub features_per_split: Option<FeaturesPerSplit>,
    pub bootstrap: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureSection {
    pub n_records: Option<usize>,
    pub rates: Option<FactorRates>,
    pub aggressive_share: Option<f64>,
    pub unknown_rate: Option<f64>,
    pub per_kind: Option<usize>,
    pub duration: Option<f64>,
    pub dt: Option<f64>,
    pub planted_rows: Option<usize>,
    pub planted_noise_features: Option<usize>,
    pub planted_label_noise: Option<f64>,
    pub planted_levels: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub enabled: Option<bool>,
    pub folds: Option<usize>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactSection {
    pub thresholds: Option<Vec<f64>>,
    pub compliance: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub top_pairs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub k: Option<usize>,
    pub max_iter: Option<usize>,
    pub n_init: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub rows: Option<usize>,
    pub background: Option<usize>,
    pub shap_rows: Option<usize>,
    pub permutation_repeats: Option<usize>,
}

/// Contents of a `--config` TOML file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub test_fraction: Option<f64>,
    pub paths: Paths,
    pub forest: ForestSection,
    pub engineering: Option<EngineeringConfig>,
    pub synth: Option<FlipRates>,
    pub kinematics: Option<KinematicConfig>,
    pub fixture: FixtureSection,
    pub cv: CvSection,
    pub impact: ImpactSection,
    pub ablation: AblationSection,
    pub cluster: ClusterSection,
    pub explain: ExplainSection,
    pub expected: Option<ExpectedLevelRules>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Values that can also be given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub crashes: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub conditions: Option<PathBuf>,
    pub trees: Option<usize>,
    pub cv: bool,
    pub folds: Option<usize>,
    pub compliance: Option<f64>,
    pub k: Option<usize>,
    pub rows: Option<usize>,
    pub records: Option<usize>,
    pub per_kind: Option<usize>,
    pub planted_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureSettings {
    pub crashes: CrashFixtureConfig,
    pub trajectories: TrajectoryFixtureConfig,
    pub planted: PlantedConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvSettings {
    pub enabled: bool,
    pub folds: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactSettings {
    pub thresholds: Vec<f64>,
    pub compliance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainSettings {
    /// Records explained individually, taken from the start of the input.
    pub rows: usize,
    /// Background sample size for SHAP base values.
    pub background: usize,
    /// Sample size for the global SHAP importance.
    pub shap_rows: usize,
    pub permutation_repeats: usize,
}

/// Fully resolved configuration. Its JSON form, minus the output directory,
/// is hashed into every manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub out: PathBuf,
    pub test_fraction: f64,
    pub paths: Paths,
    pub forest: ForestParams,
    pub engineering: EngineeringConfig,
    pub synth: FlipRates,
    pub kinematics: KinematicConfig,
    pub fixture: FixtureSettings,
    pub cv: CvSettings,
    pub impact: ImpactSettings,
    pub ablation_top_pairs: usize,
    pub cluster: KMeansParams,
    pub explain: ExplainSettings,
    pub expected: ExpectedLevelRules,
}

pub const DEFAULT_CV_SEEDS: [u64; 3] = [42, 84, 126];

impl RunConfig {
    pub fn resolve(command: &str, file: FileConfig, flags: Overrides) -> Self {
        let seed = file.seed.or(flags.seed);
        let s = seed.unwrap_or(0);
        let fp = ForestParams::default();
        let forest = ForestParams {
            n_estimators: file.forest.n_estimators.or(flags.trees).unwrap_or(fp.n_estimators),
            max_depth: file.forest.max_depth.or(fp.max_depth),
            min_samples_leaf: file.forest.min_samples_leaf.unwrap_or(fp.min_samples_leaf),
            features_per_split: file.forest.features_per_split.unwrap_or(fp.features_per_split),
            bootstrap: file.forest.bootstrap.unwrap_or(fp.bootstrap),
            seed: derive_seed(s, stream::FOREST),
        };

        let fx = file.fixture;
        let cd = CrashFixtureConfig::default();
        let td = TrajectoryFixtureConfig::default();
        let pd = PlantedConfig::default();
        let fixture = FixtureSettings {
            crashes: CrashFixtureConfig {
                n_records: fx.n_records.or(flags.records).unwrap_or(cd.n_records),
                rates: fx.rates.unwrap_or(cd.rates),
                aggressive_share: fx.aggressive_share.unwrap_or(cd.aggressive_share),
                unknown_rate: fx.unknown_rate.unwrap_or(cd.unknown_rate),
                seed: derive_seed(s, stream::FIXTURE_CRASHES),
            },
            trajectories: TrajectoryFixtureConfig {
                per_kind: fx.per_kind.or(flags.per_kind).unwrap_or(td.per_kind),
                duration: fx.duration.unwrap_or(td.duration),
                dt: fx.dt.unwrap_or(td.dt),
                seed: derive_seed(s, stream::FIXTURE_TRAJECTORIES),
            },
            planted: PlantedConfig {
                n_rows: fx.planted_rows.or(flags.planted_rows).unwrap_or(pd.n_rows),
                n_noise: fx.planted_noise_features.unwrap_or(pd.n_noise),
                label_noise: fx.planted_label_noise.unwrap_or(pd.label_noise),
                levels: fx.planted_levels.or(pd.levels),
                seed: derive_seed(s, stream::FIXTURE_PLANTED),
            },
        };

        let kd = KMeansParams::default();
        let paths = Paths {
            crashes: file.paths.crashes.or(flags.crashes),
            model: file.paths.model.or(flags.model),
            trajectories: file.paths.trajectories.or(flags.trajectories),
            conditions: file.paths.conditions.or(flags.conditions),
            ..file.paths
        };

        RunConfig {
            command: command.to_string(),
            seed,
            out: file.out.or(flags.out).unwrap_or_else(|| PathBuf::from("out")),
            test_fraction: file.test_fraction.unwrap_or(0.2),
            paths,
            forest,
            engineering: file.engineering.unwrap_or_default(),
            synth: file.synth.unwrap_or_default(),
            kinematics: file.kinematics.unwrap_or_default(),
            fixture,
            cv: CvSettings {
                enabled: file.cv.enabled.unwrap_or(flags.cv),
                folds: file.cv.folds.or(flags.folds).unwrap_or(5),
                seeds: file.cv.seeds.unwrap_or_else(|| DEFAULT_CV_SEEDS.to_vec()),
            },
            impact: ImpactSettings {
                thresholds: file.impact.thresholds.unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec()),
                compliance: file.impact.compliance.or(flags.compliance).unwrap_or(DEFAULT_COMPLIANCE),
            },
            ablation_top_pairs: file.ablation.top_pairs.unwrap_or(3),
            cluster: KMeansParams {
                k: file.cluster.k.or(flags.k).unwrap_or(kd.k),
                max_iter: file.cluster.max_iter.unwrap_or(kd.max_iter),
                n_init: file.cluster.n_init.unwrap_or(kd.n_init),
                seed: derive_seed(s, stream::KMEANS),
            },
            explain: ExplainSettings {
                rows: file.explain.rows.or(flags.rows).unwrap_or(20),
                background: file.explain.background.unwrap_or(1000),
                shap_rows: file.explain.shap_rows.unwrap_or(200),
                permutation_repeats: file.explain.permutation_repeats.unwrap_or(5),
            },
            expected: file.expected.unwrap_or_default(),
        }
    }

    /// Seed for a stage; only valid after [`RunConfig::validate`] has
    /// confirmed a seed is present for stochastic commands.
    pub fn stream_seed(&self, stream: u64) -> u64 {
        derive_seed(self.seed.unwrap_or(0), stream)
    }

    pub fn validate(&self, stochastic: bool) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if stochastic && self.seed.is_none() {
            return bad(format!("`{}` is stochastic and needs a seed (--seed or `seed` in the config)", self.command));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        self.forest.validate().map_err(CliError::config)?;
        self.fixture.crashes.validate().map_err(CliError::config)?;
        if self.cv.folds < 2 {
            return bad(format!("cv.folds must be at least 2, got {}", self.cv.folds));
        }
        if self.cv.seeds.is_empty() {
            return bad("cv.seeds is empty".into());
        }
        if !(0.0..=1.0).contains(&self.impact.compliance) {
            return bad(format!("impact.compliance {} outside [0, 1]", self.impact.compliance));
        }
        if self.impact.thresholds.iter().any(|t| !(0.0..=100.0).contains(t)) {
            return bad("impact.thresholds must lie in [0, 100]".into());
        }
        if self.cluster.k == 0 {
            return bad("cluster.k must be positive".into());
        }
        if self.explain.background == 0 || self.explain.shap_rows == 0 {
            return bad("explain.background and explain.shap_rows must be positive".into());
        }
        self.expected.validate().map_err(CliError::config)?;
        // Optional configuration files must exist whenever they are named.
        for p in [
            &self.paths.schema,
            &self.paths.codes,
            &self.paths.calibration,
            &self.paths.bands,
            &self.paths.composites,
            &self.paths.grid,
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return bad(format!("config file {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// An input path the command cannot run without.
    pub fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
        let p = path
            .as_deref()
            .ok_or_else(|| CliError::Config(format!("`{}` needs {what}", self.command)))?;
        if !p.is_file() {
            return Err(CliError::Config(format!("{what} {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("run config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
