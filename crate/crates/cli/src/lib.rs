//! Command-line drivers for the `shuffled-sgd` library: constants analysis,
//! Gaussian and batch-size sweeps, histograms, optimizer runs and bound checks.
//!
//! Data files go to the requested paths (or stdout); human-readable summaries
//! go to stderr.

use std::io::Write;

pub mod args;
mod constants;
mod output;
pub mod problem;
mod theory;

pub use args::Cli;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] shuffled_sgd::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        2
    }
}

/// Outcome of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    /// A bound was violated, a verdict was inconclusive, or every seed diverged.
    VerdictFailure,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::VerdictFailure => 1,
        }
    }
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<Status, CliError> {
    use args::Command::*;
    match &cli.command {
        Analyze(a) => constants::analyze(a, stdout, stderr),
        GaussianSweep(a) => constants::gaussian_sweep(a, stdout, stderr),
        BatchSweep(a) => constants::batch_sweep(a, stdout, stderr),
        Histogram(a) => constants::histogram(a, stdout, stderr),
        Optimize(a) => theory::optimize(a, stdout, stderr),
        VerifyBound(a) => theory::verify_bound(a, stdout, stderr),
    }
}

/// Caps the global worker pool at `SHUFFLE_SGD_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SHUFFLE_SGD_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("SHUFFLE_SGD_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}
