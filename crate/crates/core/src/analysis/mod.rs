//! Population-level analyses over a trained model: scenario grid, score
//! distribution, sensitivity, ablation, prevalence, risk multipliers, driver
//! clustering, intervention impact and scenario-type validation.

pub mod ablation;
pub mod cluster;
pub mod distribution;
pub mod expected;
pub mod grid;
pub mod impact;
pub mod multipliers;
pub mod prevalence;
pub mod sensitivity;
pub mod validation;

pub use ablation::{ablate, single_group_configs, top_pairs, AblationConfig, AblationReport, AblationRow};
pub use cluster::{
    cluster_drivers, kmeans, ClusterReport, ClusterSummary, CompositeWeights, DriverProfile, KMeansParams, KMeansResult,
};
pub use distribution::{score_distribution, DistributionReport, LevelMean, ScoreDistribution, StreamingMoments};
pub use expected::{expected_levels, ExpectedLevelRules};
pub use grid::{build_scenario_grid, cell_levels, GridCell, GridFactor, GridLevel, ScenarioGrid, ScenarioGridSpec};
pub use impact::{crash_probabilities, simulate_impact, ImpactReport, ImpactRow, DEFAULT_COMPLIANCE, DEFAULT_THRESHOLDS};
pub use multipliers::{default_combos, risk_multipliers, FactorCombo, MultiplierReport, MultiplierRow};
pub use prevalence::{factor_prevalence, PrevalenceReport};
pub use sensitivity::{default_transitions, sensitivity, SensitivityRow, Transition};
pub use validation::{scenario_context, scenario_inputs, validate_by_scenario_type, ScenarioInput, ValidationReport};
