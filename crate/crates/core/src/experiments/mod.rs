//! Config-driven runs of the synthetic studies: the alignment sweep, the
//! initialization trajectories, the condition sweeps and the power-iteration
//! landscape study.
//!
//! Every (value, seed) cell derives its own generator from the config, so
//! results are identical however the cells are scheduled.

mod config;
mod output;
mod runners;

pub use config::{log_space, ActivationRef, ExperimentConfig, Kind, Param, Values};
pub use output::{write_manifest, write_outputs, Manifest, Outputs};
pub use runners::{
    run, run_condition_sweep, run_exp1, run_exp2, run_landscape_dynamics, DynamicsRun, RunOutput, SweepResult,
    SweepRow, TrajectoryRun,
};
