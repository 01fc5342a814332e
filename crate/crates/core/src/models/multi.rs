use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::AcfBasis;

/// Tolerance for Hermitian and PSD checks on coefficient matrices, relative
/// to the matrix trace.
pub const PSD_TOL: f64 = 1e-10;

/// Linear phase `e^{−2πιωt0}` on the `(r, s)` cross-spectrum (conjugate on `(s, r)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDelay {
    pub r: usize,
    pub s: usize,
    pub t0: f64,
}

/// Matrix-valued spline PSD `f̂(ω) = Σ_i C_i B_{i,k}(ω)` with Hermitian PSD
/// coefficient matrices on one shared knot vector.
#[derive(Debug, Clone)]
pub struct MatrixSplinePsdModel {
    basis: AcfBasis,
    coeffs: Vec<DMatrix<Complex64>>,
    real_process: bool,
    delays: Vec<PhaseDelay>,
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn check_hermitian_psd(c: &DMatrix<Complex64>, what: &str) -> Result<()> {
    let trace: f64 = c.diagonal().iter().map(|z| z.re.abs()).sum();
    let scale = trace.max(f64::MIN_POSITIVE);
    for r in 0..c.nrows() {
        for s in 0..c.ncols() {
            if !(c[(r, s)].re.is_finite() && c[(r, s)].im.is_finite()) {
                return Err(Error::NonFinite(format!("{what} entry ({r},{s})")));
            }
            if (c[(r, s)] - c[(s, r)].conj()).norm() > PSD_TOL * scale {
                return Err(Error::InvalidModel(format!("{what} is not Hermitian at ({r},{s})")));
            }
        }
    }
    if trace > 0.0 {
        let lo = min_eigenvalue(c);
        if lo < -PSD_TOL * trace {
            return Err(Error::InvalidModel(format!(
                "{what} is not positive semi-definite (min eigenvalue {lo:.3e})"
            )));
        }
    }
    Ok(())
}

impl MatrixSplinePsdModel {
    pub fn new(basis: AcfBasis, coeffs: Vec<DMatrix<Complex64>>, real_process: bool) -> Result<Self> {
        if coeffs.len() != basis.num_basis() {
            return Err(Error::DimensionMismatch { expected: basis.num_basis(), found: coeffs.len() });
        }
        let dim = coeffs.first().map(|c| c.nrows()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidModel("coefficient matrices must be at least 1×1".into()));
        }
        for (i, c) in coeffs.iter().enumerate() {
            if c.nrows() != dim || c.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: c.nrows().max(c.ncols()) });
            }
            check_hermitian_psd(c, &format!("C_{i}"))?;
        }
        Ok(Self { basis, coeffs, real_process, delays: Vec::new() })
    }

    /// Builds from real symmetric PSD matrices.
    pub fn from_real(basis: AcfBasis, coeffs: Vec<DMatrix<f64>>, real_process: bool) -> Result<Self> {
        let c = coeffs.into_iter().map(|m| m.map(|x| Complex64::new(x, 0.0))).collect();
        Self::new(basis, c, real_process)
    }

    pub fn basis(&self) -> &AcfBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[DMatrix<Complex64>] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn real_process(&self) -> bool {
        self.real_process
    }

    pub fn phase_delays(&self) -> &[PhaseDelay] {
        &self.delays
    }

    /// Net delay `t0` on the `(r, s)` entry (negated for the transposed pair).
    fn net_delay(&self, r: usize, s: usize) -> f64 {
        self.delays.iter().fold(0.0, |acc, d| {
            if d.r == r && d.s == s {
                acc + d.t0
            } else if d.r == s && d.s == r {
                acc - d.t0
            } else {
                acc
            }
        })
    }

    /// New model whose `(r, s)` cross-spectrum carries the extra phase
    /// `e^{−2πιωt0}`, so `γ^{(r,s)}(τ) ↦ γ^{(r,s)}(τ − t0)`.
    pub fn apply_phase_delay(&self, r: usize, s: usize, t0: f64) -> Result<Self> {
        let m = self.dim();
        if r >= m || s >= m {
            return Err(Error::IndexOutOfRange { index: r.max(s), count: m });
        }
        if r == s {
            return Err(Error::InvalidArgument(
                "a phase delay needs two distinct components".into(),
            ));
        }
        if !t0.is_finite() {
            return Err(Error::NonFinite("phase delay".into()));
        }
        let mut out = self.clone();
        if t0 != 0.0 {
            out.delays.push(PhaseDelay { r, s, t0 });
        }
        Ok(out)
    }

    fn one_sided(&self, omega: f64) -> DMatrix<Complex64> {
        let m = self.dim();
        let mut f = DMatrix::zeros(m, m);
        if let Some((start, vals)) = self.basis.knots().local_values(omega) {
            for (q, b) in vals.into_iter().enumerate() {
                f += &self.coeffs[start + q] * Complex64::new(b, 0.0);
            }
        }
        for r in 0..m {
            for s in 0..m {
                let t0 = self.net_delay(r, s);
                if t0 != 0.0 {
                    f[(r, s)] *= Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * omega * t0);
                }
            }
        }
        f
    }

    /// `f̂(ω)`; for real processes `½[F(ω) + conj F(−ω)]`.
    pub fn psd_eval(&self, omega: f64) -> DMatrix<Complex64> {
        if self.real_process {
            (self.one_sided(omega) + self.one_sided(-omega).map(|z| z.conj())) * Complex64::new(0.5, 0.0)
        } else {
            self.one_sided(omega)
        }
    }

    /// `γ̂(τ)` entrywise `Σ_i C_i^{(r,s)} ρ_{i,k}(τ − t0^{(r,s)})`; real part
    /// only for real processes.
    pub fn acf_eval(&self, tau: f64) -> Result<DMatrix<Complex64>> {
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        let base = self.basis.rho_all(tau)?;
        for r in 0..m {
            for s in 0..m {
                let t0 = self.net_delay(r, s);
                let rho = if t0 == 0.0 { base.clone() } else { self.basis.rho_all(tau - t0)? };
                let mut acc = Complex64::new(0.0, 0.0);
                for (c, p) in self.coeffs.iter().zip(&rho) {
                    acc += c[(r, s)] * p;
                }
                out[(r, s)] = if self.real_process { Complex64::new(acc.re, 0.0) } else { acc };
            }
        }
        Ok(out)
    }

    /// Variance matrix `γ̂(0)`.
    pub fn variance(&self) -> Result<DMatrix<Complex64>> {
        self.acf_eval(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::KnotVector;
    use crate::models::SplinePsdModel;

    fn basis() -> AcfBasis {
        AcfBasis::new(KnotVector::new(vec![0.0, 0.1, 0.25, 0.3, 0.5], 1).unwrap())
    }

    fn herm(a: [[f64; 2]; 2], b: f64) -> DMatrix<Complex64> {
        // L L^H with L lower-triangular (a) plus imaginary off-diagonal b.
        let l = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(a[0][0], 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(a[1][0], b),
                Complex64::new(a[1][1], 0.0),
            ],
        );
        &l * l.adjoint()
    }

    fn model() -> MatrixSplinePsdModel {
        let c = vec![herm([[1.0, 0.0], [0.3, 0.8]], 0.2), herm([[0.5, 0.0], [-0.2, 1.0]], -0.4), herm([[0.9, 0.0], [0.6, 0.1]], 0.0)];
        MatrixSplinePsdModel::new(basis(), c, false).unwrap()
    }

    #[test]
    fn rejects_indefinite_or_non_hermitian() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(MatrixSplinePsdModel::from_real(basis(), vec![bad.clone(); 3], false).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(MatrixSplinePsdModel::from_real(basis(), vec![asym; 3], false).is_err());
        let ok = DMatrix::identity(2, 2);
        assert!(MatrixSplinePsdModel::from_real(basis(), vec![ok; 2], false).is_err());
    }

    #[test]
    fn identity_coefficients_partition() {
        let m = MatrixSplinePsdModel::from_real(basis(), vec![DMatrix::identity(3, 3); 3], false).unwrap();
        let f = m.psd_eval(0.2);
        let total: f64 = m.basis().knots().eval_all(0.2).iter().sum();
        for r in 0..3 {
            for s in 0..3 {
                let expect = if r == s { total } else { 0.0 };
                assert!((f[(r, s)].re - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn scalar_reduction() {
        let c = [0.3, 1.2, 0.7];
        let mm = MatrixSplinePsdModel::from_real(
            basis(),
            c.iter().map(|&x| DMatrix::from_element(1, 1, x)).collect(),
            true,
        )
        .unwrap();
        let su = SplinePsdModel::new(basis(), c.to_vec(), true).unwrap();
        for &x in &[-0.4, 0.0, 0.12, 0.33] {
            assert!((mm.psd_eval(x)[(0, 0)].re - su.psd_eval(x)).abs() < 1e-12);
        }
        for &t in &[0.0, 1.5, -7.2] {
            assert!((mm.acf_eval(t).unwrap()[(0, 0)] - su.acf_eval(t).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitian_lag_symmetry() {
        let m = model().apply_phase_delay(0, 1, 0.7).unwrap();
        for &t in &[0.4, 2.0, 13.0] {
            let p = m.acf_eval(t).unwrap();
            let n = m.acf_eval(-t).unwrap();
            assert!((p - n.adjoint()).norm() < 1e-12);
        }
    }

    #[test]
    fn psd_pointwise() {
        let m = model();
        for l in 0..200 {
            let w = -0.6 + 1.2 * l as f64 / 199.0;
            let f = m.psd_eval(w);
            let tr: f64 = f.diagonal().iter().map(|z| z.re).sum();
            assert!(min_eigenvalue(&f) >= -1e-10 * tr.max(1e-300));
        }
    }

    #[test]
    fn phase_delay_shift_and_amplitude() {
        let m = model();
        assert!(matches!(m.apply_phase_delay(1, 1, 1.0), Err(Error::InvalidArgument(_))));
        let same = m.apply_phase_delay(0, 1, 0.0).unwrap();
        assert!(same.phase_delays().is_empty());
        let t0 = 1.3;
        let d = m.apply_phase_delay(0, 1, t0).unwrap();
        for &w in &[0.05, 0.2, 0.41] {
            assert!((d.psd_eval(w)[(0, 1)].norm() - m.psd_eval(w)[(0, 1)].norm()).abs() < 1e-12);
        }
        for &t in &[-3.0, 0.0, 0.9, 4.4] {
            let after = d.acf_eval(t).unwrap();
            let before = m.acf_eval(t - t0).unwrap();
            let before_t = m.acf_eval(t + t0).unwrap();
            assert!((after[(0, 1)] - before[(0, 1)]).norm() < 1e-9);
            assert!((after[(1, 0)] - before_t[(1, 0)]).norm() < 1e-9);
            assert!((after[(0, 0)] - m.acf_eval(t).unwrap()[(0, 0)]).norm() < 1e-15);
        }
    }

    #[test]
    fn diagonal_real_has_no_cross() {
        let c: Vec<DMatrix<f64>> = (0..3).map(|i| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0 + i as f64, 0.5]))).collect();
        let m = MatrixSplinePsdModel::from_real(basis(), c, true).unwrap();
        let g = m.acf_eval(2.2).unwrap();
        assert_eq!(g[(0, 1)], Complex64::new(0.0, 0.0));
    }
}
