//! Bayesian nonparametric estimation of the number of unseen species under a
//! Pitman-Yor prior: posterior point estimates, exact Monte Carlo,
//! Mittag-Leffler and Gaussian credible intervals, empirical-Bayes fitting,
//! synthetic data and a benchmark harness.
//!
//! The combinatorial core is generic over the scalar type: `f64`, `f32` and
//! exact rationals ([`Exact`]) all work. The aliases below fix the common
//! double-precision choices.

pub mod asymptotics;
pub mod benchmark;
pub mod combinatorics;
pub mod datasets;
pub mod empirical_bayes;
pub mod error;
pub mod intervals;
pub mod model;
pub mod rng;
pub mod samplers;
pub mod scalar;
pub mod signed_log;

pub use asymptotics::{gaussian_interval, GaussianApprox, RegimeRatios};
pub use benchmark::{BenchmarkRow, EstimateConfig, MGrid, Methods};
pub use combinatorics::{GfcTable, NoncentralStirlingTable};
pub use datasets::{DatasetKind, DatasetSpec, IngestMode};
pub use empirical_bayes::{fit_empirical_bayes, BoundaryFlag, FitOptions, FitResult};
pub use error::{Error, Result};
pub use intervals::{coverage, exact_interval, ml_interval, CredibleInterval, Method};
pub use model::{
    posterior_mean, posterior_pmf_closed, posterior_pmf_dp, ExactPyParams, PitmanYor, Pmf,
    PyParams, SampleSummary,
};
pub use rng::RngStream;
pub use scalar::{Exact, Real, Scalar};
pub use signed_log::SignedLog;

/// Posterior pmf over exact rationals.
pub type ExactPmf = Pmf<Exact>;
pub type GaussianApproxF64 = GaussianApprox<f64>;
pub type RegimeRatiosF64 = RegimeRatios<f64>;
