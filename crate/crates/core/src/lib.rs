//! Inverse crash modeling: turn a crash classifier's safe-class posterior into
//! a calibrated 0-100 safety score, explain it, and run the evaluation
//! harnesses around it.

pub mod analysis;
pub mod codes;
pub mod error;
pub mod explain;
pub mod fixture;
pub mod forest;
pub mod ingest;
pub mod metrics;
pub mod rng;
pub mod schema;
pub mod scoring;
pub mod types;

pub use error::{Error, Result};
