//! Spline-kernel autocovariance functions.
//!
//! Power spectral densities are expanded in B-spline bases over a spectral
//! knot vector; each basis has a closed-form inverse Fourier transform, so
//! the implied autocovariance is available analytically and is positive
//! semi-definite whenever the coefficients are nonnegative.

pub mod adaptive;
pub mod error;
pub mod inference;
pub mod io;
pub mod knots;
pub mod models;
pub mod quadrature;
pub mod simulation;
pub mod scalar;
pub mod transform;

pub use error::{Error, Result};
pub use knots::{DesignMatrix, KnotVectorJson, SparseRow};
pub use scalar::Real;

/// Double-precision knot vector.
pub type KnotVector = knots::KnotVector<f64>;
/// Double-precision truncated-power representation.
pub type TruncatedPowerRep = knots::TruncatedPowerRep<f64>;
/// Double-precision ACF basis.
pub type AcfBasis = transform::AcfBasis<f64>;
