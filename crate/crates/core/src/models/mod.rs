//! PSD/ACF models assembled from spline bases.

mod covariance;
mod multi;
mod tensor;
mod uni;

pub use covariance::{covariance_matrix, covariance_matrix_1d, real_part, ScalarAcf, StationaryKernel};
pub use multi::{min_eigenvalue, MatrixSplinePsdModel, PhaseDelay, PSD_TOL};
pub use tensor::{separable_surrogate, DifferencePoint, SeparableSurrogate, TensorCoeffs, TensorPsdModel};
pub use uni::SplinePsdModel;
