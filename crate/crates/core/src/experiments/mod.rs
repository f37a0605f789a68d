//! Seeded Monte Carlo campaigns behind the command-line tool.
//!
//! Every run is a pure function of its [`ExperimentConfig`]: samples come from
//! per-index substreams, parallel maps collect in index order and reductions
//! use pairwise summation, so outputs are byte-identical across reruns.

pub mod config;
pub mod convergence;
pub mod moments;
pub mod output;
pub mod pushforward;
pub mod tails;
pub mod validate;

pub use config::{ExperimentConfig, ExperimentKind};
pub use convergence::run_convergence;
pub use moments::run_moment_probe;
pub use output::{emit_outputs, Cell, CsvTable, OutputPaths, RunOutput};
pub use pushforward::run_pushforward;
pub use tails::run_tail_study;
pub use validate::run_validate;

use crate::error::Result;

/// Runs the experiment selected by `config.experiment`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    match config.experiment {
        ExperimentKind::Pushforward => run_pushforward(config),
        ExperimentKind::Moments => run_moment_probe(config),
        ExperimentKind::Tails => run_tail_study(config),
        ExperimentKind::Convergence => run_convergence(config),
        ExperimentKind::Validate => run_validate(config),
    }
}
