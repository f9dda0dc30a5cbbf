//! Experiment harness for the data-driven reachability library: JSON config
//! ingestion, end-to-end orchestration (data generation, reachability,
//! verification), and JSON/CSV/SVG export. The `zonoreach` binary is a thin
//! CLI over this crate.

pub mod benchmarks;
pub mod config;
pub mod experiment;
pub mod export;

pub use config::{ExperimentConfig, HarnessError};
pub use experiment::{run_experiment, verify_containment, ExperimentReport};

/// Built-in reproduction config: 5-state linear system driven by a scalar
/// input, identified from 65 noisy data points.
pub const DEMO_LINEAR5D: &str = include_str!("../configs/demo_linear5d.json");

/// Built-in reproduction config: 2-state exothermic-reactor benchmark with
/// two inputs, covering term neglected.
pub const DEMO_NONLINEAR: &str = include_str!("../configs/demo_nonlinear.json");
