//! Record-based transmuted generalized linear exponential (RTGLE) lifetime
//! distribution: evaluation, exact quantiles and sampling, moments and
//! entropy, parameter estimation, goodness of fit, competitor models and a
//! Monte Carlo bias/MSE harness.
//!
//! The distribution and special-function code is generic over [`Scalar`]
//! (`f32` or `f64`). Fitting, goodness of fit and simulation work in `f64`.

pub mod compare;
pub mod data;
pub mod estimate;
pub mod gof;
pub mod properties;
pub mod quadrature;
pub mod rng;
pub mod rtgle;
pub mod scalar;
pub mod sim;
pub mod special;

pub use rtgle::{DistError, HazardShapeClass, ParamError, PdfShapeClass, RtgleParams};
pub use scalar::Scalar;

/// Double-precision parameter vector.
pub type Rtgle = RtgleParams<f64>;
/// Single-precision parameter vector.
pub type Rtgle32 = RtgleParams<f32>;
