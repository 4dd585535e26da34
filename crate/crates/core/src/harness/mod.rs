//! Training loop, parameter sweeps, result files and the command line.

pub mod cli;
pub mod output;
pub mod svg;
pub mod sweep;
pub mod train;

pub use sweep::{sweep, ExperimentPlan, RunOutcome, SweepResult};
pub use train::{train_one, EpochLog, RunRecord};
