use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shuffled_sgd::{LossFamily, Scheme};

use crate::problem::Synthetic;

/// Data-dependent smoothness constants and convergence bounds for shuffled SGD.
///
/// Data files are LIBSVM text. Worker threads are capped by
/// SHUFFLE_SGD_THREADS. Exit codes: 0 success, 1 verdict failure, 2 usage or
/// I/O error.
#[derive(Debug, Parser)]
#[command(name = "shuffled-sgd", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample permutations of a dataset and report L, L̂_π, L̃_π and L/L̂_π.
    ///
    /// Small datasets (a few thousand rows) take seconds to minutes at 1000
    /// permutations. Runs above --max-cost are refused unless --force is given.
    Analyze(AnalyzeArgs),
    /// L/L̂_π on standard Gaussian data along a grid of n (or d).
    ///
    /// A grid up to a few hundred rows and columns with 20 permutations per
    /// point takes well under a minute; 500 x 500 grids take minutes.
    GaussianSweep(GaussianSweepArgs),
    /// L/L̃_π against the batch size, with a fitted log-log slope.
    ///
    /// Every batch size must divide n. A 256 x 256 Gaussian over all powers of
    /// two takes seconds.
    BatchSweep(BatchSweepArgs),
    /// Histogram of L/L̂_π over sampled permutations.
    Histogram(HistogramArgs),
    /// Run shuffled SGD and write per-epoch objective values.
    Optimize(OptimizeArgs),
    /// Compare the empirical optimality gap with a theorem's right-hand side.
    ///
    /// Exits with 1 when the bound is violated or the verdict is inconclusive.
    VerifyBound(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    /// Relative tolerance of the power iteration.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Iteration cap of the power iteration.
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BudgetArgs {
    /// Run even when the cost estimate exceeds --max-cost.
    #[arg(long)]
    pub force: bool,
    /// Cost budget in estimated floating-point operations.
    #[arg(long, default_value_t = 2e11)]
    pub max_cost: f64,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// LIBSVM data file.
    pub input: PathBuf,
    /// Feature dimension; defaults to the largest index in the file.
    #[arg(long)]
    pub features: Option<usize>,
    /// Batch size; must divide n.
    #[arg(short, long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, default_value_t = 1000)]
    pub num_perms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Skip L̃_π.
    #[arg(long)]
    pub no_tilde: bool,
    /// Weight rows by the smoothness scale of this loss instead of Λ = I.
    #[arg(long)]
    pub loss: Option<LossFamily>,
    /// Also compute σ* and ‖y*‖ at a reference minimizer (smooth losses).
    #[arg(long, requires = "loss")]
    pub with_optimum: bool,
    /// JSON report path; printed to stdout when neither output is given.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Per-permutation CSV path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub power: PowerArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    N,
    D,
}

#[derive(Debug, Clone, Args)]
pub struct GaussianSweepArgs {
    /// Dimension held fixed.
    #[arg(long, value_enum)]
    pub fix: Axis,
    /// Value of the fixed dimension.
    #[arg(long)]
    pub fixed_value: usize,
    /// Comma-separated values of the other dimension.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub perms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub power: PowerArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BatchSweepArgs {
    /// LIBSVM data file; use --gaussian instead for synthetic data.
    #[arg(required_unless_present = "gaussian", conflicts_with = "gaussian")]
    pub input: Option<PathBuf>,
    /// Standard Gaussian data as N,D.
    #[arg(long, value_parser = parse_pair)]
    pub gaussian: Option<(usize, usize)>,
    #[arg(long)]
    pub features: Option<usize>,
    /// Comma-separated batch sizes; defaults to every power of two dividing n.
    #[arg(long, value_delimiter = ',')]
    pub batches: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub perms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Smallest batch size in the slope fit.
    #[arg(long)]
    pub fit_min: Option<usize>,
    /// Largest batch size in the slope fit.
    #[arg(long)]
    pub fit_max: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub power: PowerArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Clone, Args)]
pub struct HistogramArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(short, long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, default_value_t = 1000)]
    pub num_perms: usize,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub power: PowerArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Proxy {
    Max,
    Mean,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// LIBSVM data file.
    #[arg(required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<usize>,
    /// Synthetic problem: ls:N,D[,NOISE], interp:N,D or hinge:N,D.
    #[arg(long)]
    pub synthetic: Option<Synthetic>,
    /// Seed of the synthetic data.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Loss family for file input.
    #[arg(long, default_value = "squared")]
    pub loss: LossFamily,
}

#[derive(Debug, Clone, Args)]
pub struct TheoryArgs {
    /// How a single constant step summarizes sampled L̂_π and L̃_π.
    #[arg(long, value_enum, default_value_t = Proxy::Max)]
    pub proxy: Proxy,
    /// Permutations sampled for the constants.
    #[arg(long, default_value_t = 200)]
    pub proxy_perms: usize,
    /// Gradient-norm tolerance of the reference minimizer.
    #[arg(long, default_value_t = 1e-10)]
    pub opt_tol: f64,
    /// Iteration cap of the reference minimizer.
    #[arg(long, default_value_t = 100_000)]
    pub opt_max_iter: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "rr")]
    pub scheme: Scheme,
    #[arg(short, long, default_value_t = 1)]
    pub batch: usize,
    #[arg(short = 'K', long, default_value_t = 10)]
    pub epochs: usize,
    /// `theoretical` or a fixed positive step size.
    #[arg(long, default_value = "theoretical")]
    pub step: StepMode,
    /// Number of seeds; seed s runs with shuffle seed --seed + s.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Distance ‖x0 − x*‖ for nonsmooth theoretical steps without a known x*.
    #[arg(long)]
    pub dist: Option<f64>,
    /// Skip the retraction-identity residual (saves memory on large data).
    #[arg(long)]
    pub no_residual: bool,
    /// Per-epoch CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-seed summary CSV path.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub theory: TheoryArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Theorem {
    /// Smooth losses under RR.
    Rr,
    /// Smooth losses under IG (identity order).
    Ig,
    /// Lipschitz losses under RR.
    Nonsmooth,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum)]
    pub theorem: Theorem,
    #[arg(short, long, default_value_t = 1)]
    pub batch: usize,
    #[arg(short = 'K', long, default_value_t = 10)]
    pub epochs: usize,
    /// Shuffle seeds averaged for the expectation bounds.
    #[arg(long, default_value_t = 200)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON verdict path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub theory: TheoryArgs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    Theoretical,
    Fixed(f64),
}

impl std::str::FromStr for StepMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("theoretical") {
            return Ok(StepMode::Theoretical);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(StepMode::Fixed(v)),
            _ => Err(format!("expected `theoretical` or a positive number, got {s:?}")),
        }
    }
}

impl std::fmt::Display for StepMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepMode::Theoretical => f.write_str("theoretical"),
            StepMode::Fixed(v) => write!(f, "{v}"),
        }
    }
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected N,D, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn step_mode() {
        assert_eq!("theoretical".parse::<StepMode>(), Ok(StepMode::Theoretical));
        assert_eq!("0.5".parse::<StepMode>(), Ok(StepMode::Fixed(0.5)));
        assert!("-1".parse::<StepMode>().is_err());
        assert!("fast".parse::<StepMode>().is_err());
    }

    #[test]
    fn pair() {
        assert_eq!(parse_pair("256, 128"), Ok((256, 128)));
        assert!(parse_pair("256").is_err());
    }
}
