//! Experiment configuration, orchestration and result files.
//!
//! An experiment is one TOML document naming the experiment kind plus the
//! parameter blocks it needs. [`run`] validates it, dispatches to the cell or
//! network sweeps and writes `results.csv`, `results.json` and
//! `manifest.json` into the output directory. [`emit_plot_data`] reshapes a
//! results directory into `x,y,ci_low,ci_high,series` rows.

mod config;
mod output;
mod plots;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub use config::{
    CellConfig, ExperimentConfig, ExperimentKind, Grid, LinkConfig, NetworkConfig, OutputConfig,
    Prepared, Rate, Spacing,
};
pub use output::{
    policy_rows, results_csv, run, run_prepared, CellOrNetwork, Manifest, OutputChecksum,
    PolicyRow, ResultsFile, RunSummary, MANIFEST_FILE, RESULTS_CSV, RESULTS_JSON,
    RESULTS_SCHEMA_VERSION,
};
pub use plots::{emit_plot_data, PLOT_HEADER};

/// Variable overriding `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "CRAN_OUTAGE_OUTPUT_DIR";

/// One invalid configuration field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldProblem {
    /// Dotted path such as `cell.n_trials`.
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration:\n{}", format_problems(.0))]
    Config(Vec<FieldProblem>),
    #[error("I/O error on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Schema(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
}

fn format_problems(problems: &[FieldProblem]) -> String {
    problems
        .iter()
        .map(|p| format!("  {p}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ExperimentError {
    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config(vec![FieldProblem {
            field: field.into(),
            message: message.into(),
        }])
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl fmt::Display) -> Self {
        Self::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } => 3,
            Self::Schema(_) => 4,
            Self::Simulation(_) => 1,
        }
    }
}
