//! Shuffled SGD (random reshuffling, shuffle-once, incremental gradient) for
//! convex finite sums with linear predictors, together with the
//! data-dependent smoothness constants that govern its convergence.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`.

pub mod bounds;
pub mod constants;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod losses;
pub mod rng;
pub mod scalar;
pub mod shuffle;
pub mod stats;

pub use bounds::{BoundInputs, BoundValue, ComplexityKind, ConstantProxy};
pub use constants::spectral::{operator_norm, NormEstimate, PowerIteration, SymmetricOperator};
pub use constants::{ConstantsReport, MinimizerConfig, RatioConfig};
pub use dataset::{gen_gaussian, load_libsvm, parse_libsvm, parse_libsvm_str, PermutedView, SparseDataset};
pub use engine::{run, run_general, ComponentOracle, RunConfig, RunResult, StepSchedule};
pub use error::{Error, Result};
pub use losses::{conjugate_pair, LossFamily, LossModel, RegularityDiag, RegularityKind};
pub use scalar::Scalar;
pub use shuffle::{Scheme, ShufflePlan};

pub type Dataset = SparseDataset<f64>;
pub type Dataset32 = SparseDataset<f32>;
pub type Loss = LossModel<f64>;
pub type Regularity = RegularityDiag<f64>;
pub type Config = RunConfig<f64>;
pub type Run = RunResult<f64>;
pub type Bounds = BoundInputs<f64>;
