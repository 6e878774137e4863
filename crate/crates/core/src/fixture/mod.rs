//! Synthetic desk-scale datasets with planted, known structure.

pub mod crss;
pub mod planted;
pub mod trajectories;

pub use crss::{crash_fixture, crash_fixture_dataset, CrashFixtureConfig, FactorRates, FixtureData};
pub use planted::{planted_dataset, planted_schema, PlantedConfig};
pub use trajectories::{trajectory_fixture, TrajectoryFixture, TrajectoryFixtureConfig};
