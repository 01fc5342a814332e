//! Closed-form inverse Fourier transforms of B-spline bases.
//!
//! For basis `i` with local knots `κ_0 < … < κ_{k+1}` and `λ = 2πιτ`,
//!
//! ```text
//! ρ_{i,k}(τ) = ∫ B_{i,k}(ω) e^{λω} dω = Σ_{j=0}^{k} α_j e^{λκ_j} J_k(λ, w_j),
//! J_k(λ, w)  = ∫_0^w u^k e^{λu} du,      w_j = κ_{k+1} − κ_j.
//! ```
//!
//! Integrating `J_k` by parts `k` times gives
//! `J_k = (−1)^k k! λ^{-(k+1)} [e^{λw} Σ_{l≤k} (−λw)^l / l! − 1]`. Because the
//! `α_j` annihilate every polynomial of degree ≤ k, the `e^{λκ_{k+1}}` part of
//! the sum collapses to a single term, leaving
//!
//! ```text
//! ρ_{i,k}(τ) = −(−1)^k k! λ^{-(k+1)} Σ_{j=0}^{k+1} α_j e^{λκ_j}.
//! ```
//!
//! That form is used when `|λ|·(κ_{k+1} − κ_0)` is at least the series
//! threshold; below it each `J_k` is summed as a power series in `λw`, where
//! the closed form would cancel catastrophically.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::knots::{KnotVector, TruncatedPowerRep};
use crate::scalar::{sinc, Real};

/// Default switch point on `|2πτ|·(κ_{i+k+1} − κ_i)` between the power
/// series and the closed form.
pub const DEFAULT_SERIES_THRESHOLD: f64 = 2.0;

/// Relative uniformity tolerance for [`AcfBasis::rho_eval_uniform`].
pub const UNIFORM_TOL: f64 = 1e-12;

/// ACF bases `ρ_{i,k}` for every B-spline of a knot vector.
#[derive(Debug, Clone)]
pub struct AcfBasis<T = f64> {
    kv: KnotVector<T>,
    reps: Vec<TruncatedPowerRep<T>>,
    series_threshold: T,
}

impl<T: Real> AcfBasis<T> {
    pub fn new(kv: KnotVector<T>) -> Self {
        Self::with_threshold(kv, T::lit(DEFAULT_SERIES_THRESHOLD))
    }

    pub fn with_threshold(kv: KnotVector<T>, series_threshold: T) -> Self {
        let reps = (0..kv.num_basis())
            .map(|i| kv.truncated_power(i).expect("index in range"))
            .collect();
        Self { kv, reps, series_threshold }
    }

    pub fn knots(&self) -> &KnotVector<T> {
        &self.kv
    }

    pub fn num_basis(&self) -> usize {
        self.kv.num_basis()
    }

    pub fn degree(&self) -> usize {
        self.kv.degree()
    }

    pub fn series_threshold(&self) -> T {
        self.series_threshold
    }

    pub fn rep(&self, i: usize) -> Result<&TruncatedPowerRep<T>> {
        self.reps.get(i).ok_or(Error::IndexOutOfRange { index: i, count: self.reps.len() })
    }

    /// `∫ B_{i,k} = (κ_{i+k+1} − κ_i)/(k+1)`.
    pub fn mass(&self, i: usize) -> Result<T> {
        let (a, b) = self.kv.support(i)?;
        Ok((b - a) / T::from_usize_lossy(self.degree() + 1))
    }

    /// Closed-form `ρ_{i,k}(τ)`.
    pub fn rho_eval(&self, i: usize, tau: T) -> Result<Complex<T>> {
        let rep = self.rep(i)?;
        if !tau.is_finite() {
            return Err(Error::NonFinite("lag".into()));
        }
        let k = rep.degree();
        let t = &rep.knots;
        let width = t[k + 1] - t[0];
        if tau == T::zero() {
            return Ok(Complex::new(width / T::from_usize_lossy(k + 1), T::zero()));
        }
        let two_pi = T::PI() + T::PI();
        let omega = two_pi * tau;
        if (omega * width).abs() < self.series_threshold {
            Ok(series_sum(rep, omega))
        } else {
            Ok(closed_form(rep, omega))
        }
    }

    /// `ρ_{i,k}(τ) = h sinc(hτ)^{k+1} e^{2πιτ(κ_i + (k+1)h/2)}` on uniform knots.
    pub fn rho_eval_uniform(&self, i: usize, tau: T) -> Result<Complex<T>> {
        let h = self.kv.uniform_spacing(T::lit(UNIFORM_TOL))?;
        let (start, _) = self.kv.support(i)?;
        if !tau.is_finite() {
            return Err(Error::NonFinite("lag".into()));
        }
        let k = self.degree();
        let kp1 = T::from_usize_lossy(k + 1);
        let amp = h * sinc(h * tau).powi(k as i32 + 1);
        let two_pi = T::PI() + T::PI();
        let phase = two_pi * tau * (start + kp1 * h / T::lit(2.0));
        Ok(Complex::from_polar(amp, phase))
    }

    /// `Re ρ_{i,k}(τ)`, the transform of `½[B_{i,k}(ω) + B_{i,k}(−ω)]`.
    pub fn rho_eval_real(&self, i: usize, tau: T) -> Result<T> {
        self.rho_eval(i, tau).map(|z| z.re)
    }

    /// `ρ_{i,k}(τ)` for every basis.
    pub fn rho_all(&self, tau: T) -> Result<Vec<Complex<T>>> {
        (0..self.num_basis()).map(|i| self.rho_eval(i, tau)).collect()
    }
}

impl<T: Real> From<KnotVector<T>> for AcfBasis<T> {
    fn from(kv: KnotVector<T>) -> Self {
        Self::new(kv)
    }
}

fn closed_form<T: Real>(rep: &TruncatedPowerRep<T>, omega: T) -> Complex<T> {
    let k = rep.degree();
    // Shift phases to the support centre to keep the exponentials well scaled.
    let centre = (rep.knots[0] + rep.knots[k + 1]) / T::lit(2.0);
    let mut acc = Complex::new(T::zero(), T::zero());
    for (&kj, &a) in rep.knots.iter().zip(&rep.alphas) {
        acc = acc + Complex::from_polar(a, omega * (kj - centre));
    }
    let lam = Complex::new(T::zero(), omega);
    let fact = (1..=k).fold(T::one(), |f, l| f * T::from_usize_lossy(l));
    let sign = if k % 2 == 0 { -T::one() } else { T::one() };
    let shift = Complex::from_polar(T::one(), omega * centre);
    acc * shift * Complex::new(sign * fact, T::zero()) / lam.powi(k as i32 + 1)
}

/// `Σ_{j≤k} α_j e^{λκ_j} Σ_n λ^n w_j^{k+n+1} / (n! (k+n+1))`.
fn series_sum<T: Real>(rep: &TruncatedPowerRep<T>, omega: T) -> Complex<T> {
    let k = rep.degree();
    let end = rep.knots[k + 1];
    let lam = Complex::new(T::zero(), omega);
    let eps = T::epsilon();
    let mut total = Complex::new(T::zero(), T::zero());
    for j in 0..=k {
        let w = end - rep.knots[j];
        // term_n = (λw)^n / n! · w^{k+1} / (k+n+1)
        let lw = lam * w;
        let base = w.powi(k as i32 + 1);
        let mut pow = Complex::new(T::one(), T::zero());
        let mut sum = Complex::new(T::zero(), T::zero());
        let mut n = 0usize;
        loop {
            let term = pow * base / T::from_usize_lossy(k + n + 1);
            sum = sum + term;
            if term.norm() <= eps * sum.norm() * T::lit(0.25) || n > 200 {
                break;
            }
            n += 1;
            pow = pow * lw / T::from_usize_lossy(n);
        }
        let phase = Complex::from_polar(rep.alphas[j], omega * rep.knots[j]);
        total = total + phase * sum;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::ift_quadrature_oracle;
    use num_complex::Complex64;

    fn basis(knots: Vec<f64>, k: usize) -> AcfBasis {
        AcfBasis::new(KnotVector::new(knots, k).unwrap())
    }

    #[test]
    fn zero_lag_is_mass() {
        let ab = basis(vec![0.0, 0.2, 0.5, 0.6, 1.3, 1.5], 3);
        for i in 0..ab.num_basis() {
            let (a, b) = ab.knots().support(i).unwrap();
            assert_eq!(ab.rho_eval(i, 0.0).unwrap(), Complex64::new((b - a) / 4.0, 0.0));
        }
    }

    #[test]
    fn boxcar_modulus() {
        let h = 0.3;
        let ab = basis(vec![0.0, h], 0);
        for &tau in &[0.37, 1.0, 4.2, -9.9] {
            let v = ab.rho_eval(0, tau).unwrap();
            let expect = h * (std::f64::consts::PI * h * tau).sin().abs()
                / (std::f64::consts::PI * h * tau).abs();
            assert!((v.norm() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_real_boxcar() {
        let h = 0.25;
        let ab = basis((0..6).map(|j| j as f64 * h).collect(), 0);
        let v = ab.rho_eval_real(1, 1.0).unwrap();
        let expect = h * (2.0 * std::f64::consts::PI * h * 1.5).cos() * crate::scalar::sinc(0.25);
        assert!((v - expect).abs() < 1e-15);
        let u = ab.rho_eval_uniform(0, 1.0 / h).unwrap();
        assert!(u.norm() < 1e-15);
        assert_eq!(ab.rho_eval_uniform(2, 0.0).unwrap().re, h);
    }

    #[test]
    fn uniform_rejects_nonuniform() {
        let ab = basis(vec![0.0, 0.1, 0.3], 0);
        assert!(matches!(ab.rho_eval_uniform(0, 1.0), Err(Error::NonUniformKnots { .. })));
    }

    #[test]
    fn hermitian_symmetry_and_bound() {
        let ab = basis(vec![-0.4, -0.1, 0.05, 0.3, 0.35, 0.6], 2);
        for i in 0..ab.num_basis() {
            let m = ab.mass(i).unwrap();
            for &tau in &[0.01, 0.3, 2.5, 11.0, 140.0] {
                let p = ab.rho_eval(i, tau).unwrap();
                let n = ab.rho_eval(i, -tau).unwrap();
                assert!((p - n.conj()).norm() < 1e-14);
                assert!(p.norm() <= m * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn oracle_agreement_k2() {
        let ab = basis(vec![0.0, 0.13, 0.2, 0.51, 0.7, 1.1], 2);
        for i in 0..ab.num_basis() {
            let scale = ab.mass(i).unwrap();
            for &tau in &[0.1, 1.0, 17.3] {
                let a = ab.rho_eval(i, tau).unwrap();
                let b = ift_quadrature_oracle(ab.knots(), i, tau).unwrap();
                assert!((a - b).norm() < 1e-8 * scale, "i={i} τ={tau}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn series_switch_is_continuous() {
        let ab = basis(vec![0.0, 0.21, 0.33, 0.6, 0.74, 1.0], 3);
        for i in 0..ab.num_basis() {
            let (a, b) = ab.knots().support(i).unwrap();
            let tau0 = DEFAULT_SERIES_THRESHOLD / (2.0 * std::f64::consts::PI * (b - a));
            let below = ab.rho_eval(i, tau0 * (1.0 - 1e-13)).unwrap();
            let above = ab.rho_eval(i, tau0 * (1.0 + 1e-13)).unwrap();
            assert!((below - above).norm() < 1e-12 * below.norm(), "{below} vs {above}");
        }
    }

    #[test]
    fn f32_instantiation() {
        let kv = KnotVector::<f32>::uniform(0.0, 0.25, 5, 1).unwrap();
        let ab = AcfBasis::new(kv);
        let a = ab.rho_eval(0, 1.3).unwrap();
        let b = ab.rho_eval_uniform(0, 1.3).unwrap();
        assert!((a - b).norm() < 1e-5);
    }
}
