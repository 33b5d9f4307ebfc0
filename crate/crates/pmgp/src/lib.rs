//! Streaming Gaussian process forecasting in exact state-space form.
//!
//! A stationary GP under a *spectral Matérn* covariance — a sum of
//! half-integer Matérn kernels, each modulated by a cosine — is equivalent
//! in law to a linear Gaussian state-space model over the stacked process
//! derivatives. That equivalence turns O(N³) GP regression into a Kalman
//! filter with constant cost per incoming observation, while remaining
//! *exact*: no inducing points, no spectral truncation.
//!
//! The crate provides:
//!
//! - [`kernels`]: half-integer Matérn kernels, their derivatives, the
//!   cosine-modulated mixture, and the log-parameterized hyperparameter
//!   vector;
//! - [`statespace`]: cross-covariances of the derivative process and the
//!   assembled block-diagonal transition model;
//! - [`filter`]: the Kalman prediction/update recursions and one-step
//!   predictive distributions;
//! - [`learner`]: analytic gradients of the per-step predictive
//!   log-likelihood and a passive-aggressive online update of the
//!   hyperparameters;
//! - [`gpr_oracle`]: dense O(N³) GP regression used as ground truth in
//!   equivalence tests;
//! - [`baselines`]: online autoregressive baselines (passive-aggressive
//!   regression and Bayesian linear regression) plus the NMAE metric.
//!
//! All numerics are generic over the floating-point type through
//! [`scalar::Scalar`]; the `*64`/`*32` aliases below fix the common
//! instantiations.

pub mod baselines;
pub mod error;
pub mod filter;
pub mod gpr_oracle;
pub mod kernels;
pub mod learner;
pub mod scalar;
pub mod statespace;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type KernelComponent64 = kernels::KernelComponent<f64>;
pub type KernelComponent32 = kernels::KernelComponent<f32>;
pub type SpectralMaternKernel64 = kernels::SpectralMaternKernel<f64>;
pub type SpectralMaternKernel32 = kernels::SpectralMaternKernel<f32>;
pub type HyperParams64 = kernels::HyperParams<f64>;
pub type HyperParams32 = kernels::HyperParams<f32>;
pub type TrendModel64 = kernels::TrendModel<f64>;
pub type TrendModel32 = kernels::TrendModel<f32>;
pub type FilterState64 = filter::FilterState<f64>;
pub type FilterState32 = filter::FilterState<f32>;
pub type Predictive64 = filter::Predictive<f64>;
pub type Predictive32 = filter::Predictive<f32>;
pub type PAConfig64 = learner::PAConfig<f64>;
pub type PAConfig32 = learner::PAConfig<f32>;
pub type GradientBundle64 = learner::GradientBundle<f64>;
pub type GradientBundle32 = learner::GradientBundle<f32>;
pub type ThetaTraceEntry64 = learner::ThetaTraceEntry<f64>;
pub type ThetaTraceEntry32 = learner::ThetaTraceEntry<f32>;
pub type GPRProblem64 = gpr_oracle::GPRProblem<f64>;
pub type GPRProblem32 = gpr_oracle::GPRProblem<f32>;
pub type ARModel64 = baselines::ARModel<f64>;
pub type ARModel32 = baselines::ARModel<f32>;
