//! Experiment harness behind the `frog` binary: seeded, reproducible runs of
//! the retrieval pipeline with CSV/JSON outputs ready for plotting.

pub mod experiments;

pub use experiments::{
    run_experiment, ExperimentConfig, ExperimentKind, ExperimentSummary, InitOverrides,
    SolverOverrides,
};
