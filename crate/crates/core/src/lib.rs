//! Exponential Radon transform toolkit.
//!
//! * [`model`]: phantoms, sampled images and sinograms, the smoothness class.
//! * [`ert`]: forward transform `T_mu` and its dual.
//! * [`filter`]: the band-limited reconstruction kernel.
//! * [`fbp`]: filtered backprojection and its smoothed-phantom oracle.
//! * [`stochastic`]: random-design observations and the kernel estimator.
//! * [`risk`]: Monte Carlo risk studies and convergence-rate fits.
//! * [`io`]: file formats.
//! * [`cli`]: the `ert` command line.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ert;
pub mod error;
pub mod fbp;
pub mod filter;
pub mod io;
pub mod model;
pub mod numeric;
pub mod quad;
pub mod risk;
pub mod rng;
pub mod stochastic;

pub use ert::{dual_point, forward_grid_point, forward_point, forward_sinogram, Ray, RaySource};
pub use error::{ErtError, Result};
pub use fbp::{approx_delta, approx_smoothed, reconstruct, SmoothedPhantom};
pub use filter::{kernel_value, FilterParams};
pub use model::{
    eval_phantom, rasterize, sobolev_weight_integral, ImageGrid, Phantom, PhantomComponent, Point, Sinogram,
    SmoothnessClass,
};
pub use risk::{bias_variance_profile, fit_rate, run_mise_study, run_mse_study, Criterion, RateFit, RiskRow, RiskStudyConfig};
pub use stochastic::{
    bandwidth_mise, bandwidth_mse, estimate_grid, estimator_eval, kl_gap_check, observe, sample_design, simulate,
    EstimatorConfig, NoiseKind, NoiseModel, ObservationSet,
};
