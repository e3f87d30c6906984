//! Command-line front end: loss summaries, calibration sweeps, SGD constants,
//! training runs and the calibration-figure data files.

mod commands;
mod config;
mod fig1;
mod output;

use std::fmt;
use std::path::Path;

pub use commands::run;
pub use config::{Cli, Command, CommandKind, Fig1Spec, Flags, GridSpec, LossSpec, MethodName, RunConfig};
pub use fig1::{check_fig1, fig1_data, read_fig1, write_fig1, Fig1Check, Fig1Data, FIG1_HAMMING_FILE, FIG1_MIXED_FILE};
pub use output::write_atomic;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError { code: EXIT_USAGE, message: format!("{}: {e}", path.display()) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<surrocal::Error> for CliError {
    fn from(e: surrocal::Error) -> Self {
        use surrocal::Error as E;
        let code = match &e {
            E::Capacity(_) => EXIT_CAPACITY,
            E::SingularSubspace | E::Convergence { .. } => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        CliError { code, message: e.to_string() }
    }
}
