//! Information geometric optimization (IGO) with importance-sampling sample reuse.
//!
//! The crate provides the two classic IGO instances, PBIL / compact GA on bit
//! strings and the pure rank-μ update CMA-ES on real vectors, together with a
//! reuse estimator that mixes the last `K + 1` populations into every natural
//! gradient estimate. Past samples are reweighted by the likelihood ratio
//! `p_t(x) / p̄(x)` against the uniform mixture `p̄` of the retained search
//! distributions, both when estimating each candidate's quantile-based utility
//! and when averaging the natural gradient.
//!
//! Module map:
//!
//! - [`distributions`]: Bernoulli and Gaussian families (sampling, log-density,
//!   natural gradients of the log-likelihood).
//! - [`utility`]: weight schemes, rank counts, tie-aware utilities, and
//!   importance-sampled quantiles.
//! - [`reuse`]: the rolling archive with its log-likelihood cache, likelihood
//!   ratios, the `r̂` coefficients, and the mixture estimators.
//! - [`algorithms`]: PBIL/cGA, the CMA-ES variants, and importance mixing.
//! - [`benchmarks`]: OneMax, LeadingOnes, and the continuous test functions.
//! - [`harness`]: trials, experiments, the performance metric, and persistence.
//! - [`cli`]: the `igo-bench` command implementations.
//!
//! ```no_run
//! use igo_reuse::harness::{run_experiment, ExperimentConfig};
//! use igo_reuse::{Benchmark, Variant};
//!
//! let mut config = ExperimentConfig::new(Benchmark::OneMax, 64, Variant::Cga);
//! config.k = 1;
//! config.eta = Some(1.0 / 64.0);
//! let summary = run_experiment(&config).unwrap();
//! println!("{:?}", summary.performance_metric);
//! ```

pub mod algorithms;
pub mod benchmarks;
pub mod cli;
pub mod distributions;
mod error;
pub mod harness;
pub mod reuse;
pub mod utility;

pub use algorithms::{CmaVariant, Variant};
pub use benchmarks::Benchmark;
pub use distributions::{BernoulliParams, BitString, GaussianParams, SearchDistribution};
pub use error::{Error, Result};
pub use utility::WeightScheme;

/// Seeded random stream used for every trial.
pub type TrialRng = rand_chacha::ChaCha8Rng;
