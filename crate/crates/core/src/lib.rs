//! Geodesic and stochastic dynamics on landmark configuration spaces whose
//! cometric is `K(|x_i - x_j|) I_d` for a radial profile `K`.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the tolerances in the
//! test-suite assume.

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Quadrature nodes are kept at full published precision.
#![allow(clippy::excessive_precision)]

pub mod completeness;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod kernels;
mod linalg;
pub mod ode;
pub mod quadrature;
pub mod scalar;
pub mod stochastic;
pub mod twobody;

pub use error::{Error, Result};
pub use kernels::{make_kernel, Kernel, KernelSpec};
pub use scalar::Real;

pub type Kernel64 = Kernel<f64>;
pub type Kernel32 = Kernel<f32>;
pub type CompletenessReport64 = completeness::CompletenessReport<f64>;
pub type IntegralVerdict64 = completeness::IntegralVerdict<f64>;
pub type PhasePoint64 = dynamics::PhasePoint<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type TwoBodyState64 = twobody::TwoBodyState<f64>;
pub type Forecast64 = twobody::Forecast<f64>;
pub type CeReport64 = stochastic::CeReport<f64>;
pub type HittingEstimate64 = stochastic::HittingEstimate<f64>;
pub type SampledCurve64 = geometry::SampledCurve<f64>;
pub type MetricMatrix64 = geometry::MetricMatrix<f64>;
pub type PhasePoint32 = dynamics::PhasePoint<f32>;
