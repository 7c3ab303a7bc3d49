//! Seeded, replicated benchmark harness for the SSP solvers: runs a
//! configured procedure over independent macro-replications, scores every
//! returned point by its exact duality gap on the original problem, and
//! emits CSV or aligned text tables.

pub mod config;
pub mod emit;
pub mod presets;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] ssp_core::SspError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub use config::{build_problems, ExperimentConfig, ProblemSet};
pub use emit::{emit_results, parse_summary_csv, summary_csv, text_table, OutputFormat};
pub use runner::{run_experiment, ExperimentResult, RunRecord, Summary};
