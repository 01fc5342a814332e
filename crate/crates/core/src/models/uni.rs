use num_complex::Complex;

use crate::error::{Error, Result};
use crate::knots::KnotVector;
use crate::scalar::Real;
use crate::transform::AcfBasis;

/// Univariate spline PSD `f̂(ω) = Σ c_i B_{i,k}(ω)` and its ACF.
///
/// With `real_process` set the spectrum is mirrored about zero at
/// evaluation time, so `c_i` stays one-sided power and the ACF is `Re ρ`.
#[derive(Debug, Clone)]
pub struct SplinePsdModel<T = f64> {
    basis: AcfBasis<T>,
    coeffs: Vec<T>,
    real_process: bool,
}

impl<T: Real> SplinePsdModel<T> {
    pub fn new(basis: AcfBasis<T>, coeffs: Vec<T>, real_process: bool) -> Result<Self> {
        if coeffs.len() != basis.num_basis() {
            return Err(Error::DimensionMismatch {
                expected: basis.num_basis(),
                found: coeffs.len(),
            });
        }
        if let Some((i, c)) = coeffs.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(Error::NonFinite(format!("coefficient c_{i} = {c}")));
        }
        if let Some((i, c)) = coeffs.iter().enumerate().find(|(_, &c)| c < T::zero()) {
            return Err(Error::InvalidModel(format!("coefficient c_{i} = {c} is negative")));
        }
        Ok(Self { basis, coeffs, real_process })
    }

    pub fn from_knots(kv: KnotVector<T>, coeffs: Vec<T>, real_process: bool) -> Result<Self> {
        Self::new(AcfBasis::new(kv), coeffs, real_process)
    }

    pub fn basis(&self) -> &AcfBasis<T> {
        &self.basis
    }

    pub fn knots(&self) -> &KnotVector<T> {
        self.basis.knots()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn real_process(&self) -> bool {
        self.real_process
    }

    /// Same basis, new coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<T>) -> Result<Self> {
        Self::new(self.basis.clone(), coeffs, self.real_process)
    }

    fn one_sided(&self, omega: T) -> T {
        match self.knots().local_values(omega) {
            Some((start, vals)) => vals
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (q, &b)| acc + self.coeffs[start + q] * b),
            None => T::zero(),
        }
    }

    /// `f̂(ω)`, symmetrised as `½[f(ω) + f(−ω)]` for real processes.
    pub fn psd_eval(&self, omega: T) -> T {
        if self.real_process {
            (self.one_sided(omega) + self.one_sided(-omega)) / T::lit(2.0)
        } else {
            self.one_sided(omega)
        }
    }

    /// `γ̂(τ) = Σ c_i ρ_{i,k}(τ)`; the imaginary part is zero for real processes.
    pub fn acf_eval(&self, tau: T) -> Result<Complex<T>> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != T::zero() {
                acc = acc + self.basis.rho_eval(i, tau)? * c;
            }
        }
        if self.real_process {
            acc.im = T::zero();
        }
        Ok(acc)
    }

    /// Real part of [`acf_eval`](Self::acf_eval).
    pub fn acf_real(&self, tau: T) -> Result<T> {
        self.acf_eval(tau).map(|z| z.re)
    }

    /// `γ̂(0)`, the total spectral mass.
    pub fn variance(&self) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &c)| acc + c * self.basis.mass(i).expect("in range"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};
    use num_complex::Complex64;

    fn fig1(real: bool) -> SplinePsdModel {
        let kv = KnotVector::new(vec![-0.125, 0.125, 0.25, 0.375, 0.5], 1).unwrap();
        SplinePsdModel::from_knots(kv, vec![0.1, 0.3, 1.0], real).unwrap()
    }

    #[test]
    fn fig1_values() {
        let m = fig1(false);
        assert!((m.psd_eval(0.25) - 0.3).abs() < 1e-15);
        let expect = 0.1 * 0.1875 + 0.3 * 0.125 + 1.0 * 0.125;
        assert!((m.acf_eval(0.0).unwrap().re - expect).abs() < 1e-15);
        assert!((m.variance() - expect).abs() < 1e-15);
        assert_eq!(m.psd_eval(0.75), 0.0);
        assert_eq!(m.psd_eval(-0.2), 0.0);
    }

    #[test]
    fn validation() {
        let kv = KnotVector::uniform(0.0, 0.1, 5, 1).unwrap();
        assert!(matches!(
            SplinePsdModel::from_knots(kv.clone(), vec![1.0; 2], false),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
        assert!(SplinePsdModel::from_knots(kv.clone(), vec![1.0, -0.1, 1.0], false).is_err());
        assert!(SplinePsdModel::from_knots(kv, vec![1.0, f64::NAN, 1.0], false).is_err());
    }

    #[test]
    fn zero_model() {
        let kv = KnotVector::uniform(0.0, 0.1, 6, 2).unwrap();
        let m = SplinePsdModel::from_knots(kv, vec![0.0; 3], true).unwrap();
        assert_eq!(m.acf_eval(3.3).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(m.psd_eval(0.2), 0.0);
    }

    #[test]
    fn bochner_against_quadrature() {
        for real in [false, true] {
            let m = fig1(real);
            for &tau in &[0.0, 0.7, 3.1, 12.0] {
                let lam = 2.0 * std::f64::consts::PI * tau;
                let q = integrate(
                    |w| Complex64::from_polar(m.psd_eval(w), lam * w),
                    -0.5,
                    0.5,
                    &[-0.375, -0.25, -0.125, 0.125, 0.25, 0.375],
                    &QuadOptions::default(),
                )
                .unwrap();
                let a = m.acf_eval(tau).unwrap();
                assert!((a - q).norm() < 1e-8 * m.variance(), "real={real} τ={tau}");
            }
        }
    }

    #[test]
    fn real_process_is_even() {
        let m = fig1(true);
        for &tau in &[0.3, 1.7, 25.0] {
            assert_eq!(m.acf_real(tau).unwrap(), m.acf_real(-tau).unwrap());
            assert_eq!(m.acf_eval(tau).unwrap().im, 0.0);
        }
    }
}
