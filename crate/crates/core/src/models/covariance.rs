use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::{MatrixSplinePsdModel, SplinePsdModel, TensorPsdModel};

/// A stationary covariance `γ(𝛕)` returning `M × M` blocks for lags in `R^D`.
pub trait StationaryKernel {
    /// Number of process components `M`.
    fn components(&self) -> usize;
    /// Lag dimension `D`.
    fn lag_dim(&self) -> usize;
    fn acf_block(&self, lag: &[f64]) -> Result<DMatrix<Complex64>>;
}

impl StationaryKernel for SplinePsdModel<f64> {
    fn components(&self) -> usize {
        1
    }
    fn lag_dim(&self) -> usize {
        1
    }
    fn acf_block(&self, lag: &[f64]) -> Result<DMatrix<Complex64>> {
        Ok(DMatrix::from_element(1, 1, self.acf_eval(lag[0])?))
    }
}

impl StationaryKernel for MatrixSplinePsdModel {
    fn components(&self) -> usize {
        self.dim()
    }
    fn lag_dim(&self) -> usize {
        1
    }
    fn acf_block(&self, lag: &[f64]) -> Result<DMatrix<Complex64>> {
        self.acf_eval(lag[0])
    }
}

impl StationaryKernel for TensorPsdModel<f64> {
    fn components(&self) -> usize {
        1
    }
    fn lag_dim(&self) -> usize {
        self.dim()
    }
    fn acf_block(&self, lag: &[f64]) -> Result<DMatrix<Complex64>> {
        Ok(DMatrix::from_element(1, 1, self.acf_eval(lag)?))
    }
}

/// Adapts a real scalar ACF `τ ↦ γ(τ)` to [`StationaryKernel`].
pub struct ScalarAcf<F>(pub F);

impl<F: Fn(f64) -> f64> StationaryKernel for ScalarAcf<F> {
    fn components(&self) -> usize {
        1
    }
    fn lag_dim(&self) -> usize {
        1
    }
    fn acf_block(&self, lag: &[f64]) -> Result<DMatrix<Complex64>> {
        Ok(DMatrix::from_element(1, 1, Complex64::new((self.0)(lag[0]), 0.0)))
    }
}

/// Gram matrix over sample points. Block `(a, b)` is `γ(𝐭_a − 𝐭_b)`, laid
/// out time-major: rows `a·M .. (a+1)·M` belong to point `a`.
pub fn covariance_matrix<K: StationaryKernel + ?Sized>(
    kernel: &K,
    points: &[Vec<f64>],
) -> Result<DMatrix<Complex64>> {
    let d = kernel.lag_dim();
    let m = kernel.components();
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: p.len() });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("sample point".into()));
        }
    }
    let n = points.len();
    let mut out = DMatrix::zeros(n * m, n * m);
    let mut lag = vec![0.0; d];
    for a in 0..n {
        for b in 0..=a {
            for (l, (x, y)) in lag.iter_mut().zip(points[a].iter().zip(&points[b])) {
                *l = x - y;
            }
            let g = kernel.acf_block(&lag)?;
            for r in 0..m {
                for s in 0..m {
                    out[(a * m + r, b * m + s)] = g[(r, s)];
                    // γ(−τ) = γ(τ)^H fills the upper triangle.
                    out[(b * m + s, a * m + r)] = g[(r, s)].conj();
                }
            }
        }
    }
    Ok(out)
}

/// [`covariance_matrix`] over one-dimensional times.
pub fn covariance_matrix_1d<K: StationaryKernel + ?Sized>(
    kernel: &K,
    times: &[f64],
) -> Result<DMatrix<Complex64>> {
    let pts: Vec<Vec<f64>> = times.iter().map(|&t| vec![t]).collect();
    covariance_matrix(kernel, &pts)
}

/// Real part of a Hermitian matrix whose imaginary part vanishes to
/// `1e-12 · max|entry|`.
pub fn real_part(m: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if m.iter().any(|z| z.im.abs() > 1e-12 * scale) {
        return Err(Error::InvalidModel("covariance has a non-negligible imaginary part".into()));
    }
    Ok(m.map(|z| z.re))
}
