//! Periodograms, Whittle and exact Gaussian likelihoods, and the optimizers
//! that fit spline coefficients under them.

pub mod banded;
pub mod gaussian;
pub mod optim;
pub mod periodogram;
pub mod toeplitz;
pub mod whittle;

pub use banded::BandedSym;
pub use optim::{bfgs, numerical_gradient, BfgsOutcome, FitDiagnostics, FitOptions, FitReport};
pub use periodogram::Periodogram;
pub use whittle::{
    fit_whittle, fit_whittle_problem, whittle_grad_hess, whittle_nll, SpectralBasis, WhittleEvaluation, WhittleModel,
    WhittleProblem,
};
