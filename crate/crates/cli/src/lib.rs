//! Experiment harness: run configurations, per-seed execution, CSV logs
//! and cross-seed summaries.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod summarize;

pub use config::{ProblemKind, RunConfig, SolverKind};
pub use error::{CliError, Result};
pub use runner::{execute, resolve_output_dir, RunSummary, SeedSummary};
