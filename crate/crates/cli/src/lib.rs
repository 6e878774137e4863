//! `invscore` command-line front end. Each subcommand maps to one library
//! stage and writes JSON/CSV reports plus a `<command>.manifest.json` into
//! the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{FileConfig, Overrides, RunConfig};
use crate::error::CliResult;
use crate::output::Outputs;

#[derive(Debug, Parser)]
#[command(name = "invscore", version, about = "Calibrated driving safety scores from a crash classifier")]
pub struct Cli {
    /// TOML run configuration. Values in it take precedence over flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; required by every stochastic command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InputArg {
    /// Crash-record CSV (CASENUM, optional LABEL, coded columns).
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArg {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and engineer crash records into a feature dataset.
    Ingest(InputArg),
    /// Generate safe counterparts for crash records.
    Synth(InputArg),
    /// Train a random forest on a stratified split.
    Train {
        #[command(flatten)]
        input: InputArg,
        /// Number of trees.
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Held-out metrics for a trained model, optionally with cross-validation.
    Evaluate {
        #[command(flatten)]
        input: InputArg,
        #[command(flatten)]
        model: ModelArg,
        /// Also run repeated stratified k-fold cross-validation.
        #[arg(long)]
        cv: bool,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Calibrated scores and risk levels for every input record.
    Score {
        #[command(flatten)]
        input: InputArg,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Per-record SHAP attributions, recommendations and global importance.
    Explain {
        #[command(flatten)]
        input: InputArg,
        #[command(flatten)]
        model: ModelArg,
        /// Records explained individually.
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Score the full-factorial scenario grid.
    Grid(ModelArg),
    /// Single-factor score deltas from a neutral baseline.
    Sensitivity(ModelArg),
    /// Retrain without each feature group and report the AUC change.
    Ablate {
        #[command(flatten)]
        input: InputArg,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// k-means driver archetypes on aggression and risk-taking composites.
    Cluster {
        #[command(flatten)]
        input: InputArg,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Crash-rate multipliers for factor combinations.
    Multipliers(InputArg),
    /// Crash reduction from intervening on low-scoring grid cells.
    Impact {
        #[command(flatten)]
        model: ModelArg,
        /// Share of flagged drivers who act on the warning, in [0, 1].
        #[arg(long)]
        compliance: Option<f64>,
    },
    /// Mean crash probability by trajectory scenario type.
    Validate {
        #[command(flatten)]
        model: ModelArg,
        /// Trajectory CSV (scenario_id, agent_id, agent_type, t, x, y, v).
        #[arg(long)]
        trajectories: Option<PathBuf>,
        /// Per-scenario environment CSV.
        #[arg(long)]
        conditions: Option<PathBuf>,
    },
    /// Write the synthetic crash, trajectory and planted-signal datasets.
    Fixture {
        /// Crash records to generate.
        #[arg(long)]
        records: Option<usize>,
        /// Trajectory episodes per scenario type.
        #[arg(long)]
        per_kind: Option<usize>,
        /// Rows in the planted-signal dataset.
        #[arg(long)]
        planted_rows: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Synth(_) => "synth",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Score { .. } => "score",
            Command::Explain { .. } => "explain",
            Command::Grid(_) => "grid",
            Command::Sensitivity(_) => "sensitivity",
            Command::Ablate { .. } => "ablate",
            Command::Cluster { .. } => "cluster",
            Command::Multipliers(_) => "multipliers",
            Command::Impact { .. } => "impact",
            Command::Validate { .. } => "validate",
            Command::Fixture { .. } => "fixture",
        }
    }

    /// Commands that draw random numbers and therefore need a seed.
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            Command::Synth(_)
                | Command::Train { .. }
                | Command::Evaluate { .. }
                | Command::Explain { .. }
                | Command::Ablate { .. }
                | Command::Cluster { .. }
                | Command::Multipliers(_)
                | Command::Fixture { .. }
        )
    }

    fn overrides(&self) -> Overrides {
        let mut o = Overrides::default();
        match self {
            Command::Ingest(i) | Command::Synth(i) | Command::Multipliers(i) => o.crashes = i.input.clone(),
            Command::Train { input, trees } | Command::Ablate { input, trees } => {
                o.crashes = input.input.clone();
                o.trees = *trees;
            }
            Command::Evaluate { input, model, cv, folds } => {
                o.crashes = input.input.clone();
                o.model = model.model.clone();
                o.cv = *cv;
                o.folds = *folds;
            }
            Command::Score { input, model } => {
                o.crashes = input.input.clone();
                o.model = model.model.clone();
            }
            Command::Explain { input, model, rows } => {
                o.crashes = input.input.clone();
                o.model = model.model.clone();
                o.rows = *rows;
            }
            Command::Grid(m) | Command::Sensitivity(m) => o.model = m.model.clone(),
            Command::Cluster { input, k } => {
                o.crashes = input.input.clone();
                o.k = *k;
            }
            Command::Impact { model, compliance } => {
                o.model = model.model.clone();
                o.compliance = *compliance;
            }
            Command::Validate {
                model,
                trajectories,
                conditions,
            } => {
                o.model = model.model.clone();
                o.trajectories = trajectories.clone();
                o.conditions = conditions.clone();
            }
            Command::Fixture {
                records,
                per_kind,
                planted_rows,
            } => {
                o.records = *records;
                o.per_kind = *per_kind;
                o.planted_rows = *planted_rows;
            }
        }
        o
    }
}

/// Resolve the configuration for a parsed command line.
pub fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut flags = cli.command.overrides();
    flags.seed = cli.seed;
    flags.out = cli.out.clone();
    let cfg = RunConfig::resolve(cli.command.name(), file, flags);
    cfg.validate(cli.command.is_stochastic())?;
    Ok(cfg)
}

/// Run one command and return the files it wrote.
pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let cfg = resolve(cli)?;
    let mut out = Outputs::new();
    match &cli.command {
        Command::Ingest(_) => commands::ingest(&cfg, &mut out)?,
        Command::Synth(_) => commands::synth(&cfg, &mut out)?,
        Command::Train { .. } => commands::train(&cfg, &mut out)?,
        Command::Evaluate { .. } => commands::evaluate(&cfg, &mut out)?,
        Command::Score { .. } => commands::score(&cfg, &mut out)?,
        Command::Explain { .. } => commands::explain(&cfg, &mut out)?,
        Command::Grid(_) => commands::grid_cmd(&cfg, &mut out)?,
        Command::Sensitivity(_) => commands::sensitivity_cmd(&cfg, &mut out)?,
        Command::Ablate { .. } => commands::ablate_cmd(&cfg, &mut out)?,
        Command::Cluster { .. } => commands::cluster(&cfg, &mut out)?,
        Command::Multipliers(_) => commands::multipliers(&cfg, &mut out)?,
        Command::Impact { .. } => commands::impact(&cfg, &mut out)?,
        Command::Validate { .. } => commands::validate(&cfg, &mut out)?,
        Command::Fixture { .. } => commands::fixture(&cfg, &mut out)?,
    }
    log::info!("writing {} to {}", out.names().join(", "), cfg.out.display());
    out.commit(&cfg)
}
