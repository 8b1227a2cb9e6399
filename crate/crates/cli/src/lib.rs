//! Configuration, orchestration, and reporting for `nearflat` runs.

pub mod config;
pub mod dp;
pub mod pipeline;
pub mod report;

use std::fmt;

pub use config::RunConfig;
pub use pipeline::{run, run_dp, run_sweep, run_verify, Command, RunOutput};
pub use report::Report;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILURES: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

/// Failure of one pipeline stage, with the metric it ran on.
#[derive(Debug)]
pub struct StageError {
    pub metric: String,
    pub stage: String,
    pub source: nearflat_core::Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        match self.source {
            nearflat_core::Error::Config(_) => exit::CONFIG,
            _ => exit::NUMERICAL,
        }
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.metric.is_empty() {
            write!(f, "stage {}: {}", self.stage, self.source)
        } else {
            write!(f, "{} at stage {}: {}", self.metric, self.stage, self.source)
        }
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}
