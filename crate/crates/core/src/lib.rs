//! Prediction of fractional Brownian motion and processes driven by it.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical piece:
//!
//! * [`covariance`]: Hurst index, time grids, covariance models and the
//!   linear-map construction shared by the sampler and the exact predictors.
//! * [`linalg`] and [`conditioning`]: dense Cholesky and Gaussian conditioning.
//! * [`simulation`]: seeded fBm, integral-process, fOU and fCIR path batches.
//! * [`exact`]: closed-form conditional-mean predictors and their MSEs.
//! * [`continuous`]: predictors built from a continuously observed past.
//! * [`nn`]: a fully connected ReLU regressor, its trainer and the hand-built
//!   gate networks.
//!
//! File formats, the experiment harness and the CLI live in the `fracpredict`
//! crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod conditioning;
pub mod continuous;
pub mod covariance;
mod error;
pub mod exact;
pub mod fft;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod quadrature;
pub mod rng;
pub mod simulation;
pub mod truncnorm;

pub use conditioning::{condition_block, gaussian_condition, BlockConditional, GaussianConditional};
pub use covariance::{
    build_cov_matrix, fbm_cov, fgn_autocov, Coefficient, CovarianceModel, HurstIndex,
    LinearRecursion, TimeGrid,
};
pub use error::{Error, Result};
pub use linalg::{cholesky_factor, Cholesky, Matrix};
pub use metrics::{evaluate_me_mse, ErrorStats};
pub use truncnorm::{truncated_normal_lower_second_moment, truncated_normal_upper_second_moment};
