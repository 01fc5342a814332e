//! Matérn autocovariances for the roughness values with cheap evaluations,
//! and the parsimonious bivariate Matérn family.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Roughness values supported by [`MaternSpec`].
pub const SUPPORTED_NU: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];

fn gamma_fn(x: f64) -> f64 {
    // Only half-integers and integers up to 3 are needed here.
    match (2.0 * x).round() as i64 {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        3 => 0.5 * std::f64::consts::PI.sqrt(),
        4 => 1.0,
        5 => 0.75 * std::f64::consts::PI.sqrt(),
        6 => 2.0,
        7 => 1.875 * std::f64::consts::PI.sqrt(),
        _ => f64::NAN,
    }
}

/// Modified Bessel function `K_ν(x)`, `x > 0`, from
/// `∫_0^∞ e^{−x cosh t} cosh(νt) dt` by the trapezoidal rule. The integrand
/// is analytic in the strip `|Im t| < π/2`, so step 0.2 already leaves an
/// error far below double precision.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let h = 0.2;
    // Beyond t_max the integrand is below e^{−40} of its value at 0.
    let t_max = (1.0 + (40.0 + nu * 20.0) / x).acosh() + 1.0;
    let steps = (t_max / h).ceil() as usize;
    let mut s = 0.5 * (-x).exp();
    for j in 1..=steps {
        let t = j as f64 * h;
        s += (-x * t.cosh()).exp() * (nu * t).cosh();
    }
    s * h
}

/// Normalized Matérn correlation `2^{1−ν}/Γ(ν) (r)^ν K_ν(r)` at `r ≥ 0`.
pub fn matern_correlation(nu: f64, r: f64) -> Result<f64> {
    let r = r.abs();
    if r == 0.0 {
        return if SUPPORTED_NU.contains(&nu) { Ok(1.0) } else { Err(Error::UnsupportedRoughness(nu)) };
    }
    let e = (-r).exp();
    Ok(match nu {
        0.5 => e,
        1.5 => (1.0 + r) * e,
        2.5 => (1.0 + r + r * r / 3.0) * e,
        1.0 | 2.0 => 2f64.powf(1.0 - nu) / gamma_fn(nu) * r.powf(nu) * bessel_k(nu, r),
        _ => return Err(Error::UnsupportedRoughness(nu)),
    })
}

/// Matérn ACF with variance `σ²`, length-scale `ℓ` and roughness `ν`,
/// `γ(τ) = σ² 2^{1−ν}/Γ(ν) (√(2ν)|τ|/ℓ)^ν K_ν(√(2ν)|τ|/ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternSpec {
    pub variance: f64,
    pub length_scale: f64,
    pub nu: f64,
}

impl MaternSpec {
    pub fn new(variance: f64, length_scale: f64, nu: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("Matérn variance must be positive, got {variance}")));
        }
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("Matérn length-scale must be positive, got {length_scale}")));
        }
        if !SUPPORTED_NU.contains(&nu) {
            return Err(Error::UnsupportedRoughness(nu));
        }
        Ok(Self { variance, length_scale, nu })
    }

    fn rate(&self) -> f64 {
        (2.0 * self.nu).sqrt() / self.length_scale
    }

    pub fn acf(&self, tau: f64) -> f64 {
        self.variance * matern_correlation(self.nu, self.rate() * tau).expect("ν validated")
    }

    /// Spectral density in cycles per unit,
    /// `σ² 2√π Γ(ν+½) a^{2ν} / Γ(ν) · (a² + 4π²ω²)^{−(ν+½)}`, `a = √(2ν)/ℓ`.
    pub fn psd(&self, omega: f64) -> f64 {
        matern_psd(self.variance, self.nu, self.rate(), omega)
    }
}

fn matern_psd(variance: f64, nu: f64, a: f64, omega: f64) -> f64 {
    let pi = std::f64::consts::PI;
    variance * 2.0 * pi.sqrt() * gamma_fn(nu + 0.5) * a.powf(2.0 * nu) / gamma_fn(nu)
        * (a * a + 4.0 * pi * pi * omega * omega).powf(-(nu + 0.5))
}

/// Bivariate Matérn with a common length-scale `ℓ`:
/// `γ_rs(τ) = ρ_rs σ_r σ_s M(a_rs|τ|; ν_rs)` with `a_rs = √(2ν_rs)/ℓ`,
/// `ρ_rr = 1` and `ρ_12 = λ_12`. Each entry uses the same length-scale
/// convention as [`MaternSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateMaternSpec {
    pub sigma: [f64; 2],
    pub length_scale: f64,
    pub nu11: f64,
    pub nu22: f64,
    pub nu12: f64,
    pub rho12: f64,
}

/// Largest `|λ_12|` for which the bivariate spectral matrix stays positive
/// semi-definite at every frequency. It depends on the roughness values
/// only, since all three rates scale with `1/ℓ`.
///
/// The squared bound is `inf_x K·(a12² + x)^{2ν12+1} / ((a11² + x)^{ν11+½}(a22² + x)^{ν22+½})`
/// over `x = 4π²ω² ≥ 0`. The infimum is located on a log grid and refined
/// by golden-section search on `ln x`.
pub fn bivariate_lambda_bound(nu: [f64; 3]) -> f64 {
    let [n11, n22, n12] = nu;
    let c = |v: f64| 2.0 * std::f64::consts::PI.sqrt() * gamma_fn(v + 0.5) / gamma_fn(v);
    let sq = |v: f64| 2.0 * v;
    let ln_k = c(n11).ln() + c(n22).ln() - 2.0 * c(n12).ln()
        + n11 * sq(n11).ln()
        + n22 * sq(n22).ln()
        - 2.0 * n12 * sq(n12).ln();
    let g = |x: f64| {
        ln_k + (2.0 * n12 + 1.0) * (sq(n12) + x).ln()
            - (n11 + 0.5) * (sq(n11) + x).ln()
            - (n22 + 0.5) * (sq(n22) + x).ln()
    };
    let tail = 2.0 * n12 - n11 - n22;
    if tail < 0.0 {
        return 0.0;
    }
    let mut best = g(0.0);
    if tail == 0.0 {
        best = best.min(ln_k);
    }
    let (lo, hi, steps) = (-12.0f64, 12.0f64, 480);
    let at = |j: usize| lo + (hi - lo) * j as f64 / steps as f64;
    let mut arg = 0;
    let mut grid_best = f64::INFINITY;
    for j in 0..=steps {
        let v = g(at(j).exp());
        if v < grid_best {
            grid_best = v;
            arg = j;
        }
    }
    let (mut a, mut b) = (at(arg.saturating_sub(1)), at((arg + 1).min(steps)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (u, w) = (b - phi * (b - a), a + phi * (b - a));
        if g(u.exp()) < g(w.exp()) {
            b = w;
        } else {
            a = u;
        }
    }
    best = best.min(grid_best).min(g((0.5 * (a + b)).exp()));
    (0.5 * best).exp().min(1.0)
}

impl BivariateMaternSpec {
    /// Validates parameters, including `|λ_12|` against
    /// [`bivariate_lambda_bound`].
    pub fn new(sigma: [f64; 2], length_scale: f64, nu: [f64; 3], rho12: f64) -> Result<Self> {
        for s in sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("marginal standard deviation must be positive, got {s}")));
            }
        }
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::InvalidArgument("length-scale must be positive".into()));
        }
        for v in nu {
            if !SUPPORTED_NU.contains(&v) {
                return Err(Error::UnsupportedRoughness(v));
            }
        }
        if !(-1.0..=1.0).contains(&rho12) {
            return Err(Error::InvalidArgument(format!("cross-correlation must lie in [−1, 1], got {rho12}")));
        }
        let bound = bivariate_lambda_bound(nu);
        if rho12.abs() > bound * (1.0 + 1e-12) {
            return Err(Error::InvalidModel(format!(
                "cross-correlation {rho12} exceeds the admissible bound {bound:.6} for these roughness values"
            )));
        }
        Ok(Self { sigma, length_scale, nu11: nu[0], nu22: nu[1], nu12: nu[2], rho12 })
    }

    /// Rates `[a11, a22, a12]`.
    pub fn rates(&self) -> [f64; 3] {
        [self.nu11, self.nu22, self.nu12].map(|v| (2.0 * v).sqrt() / self.length_scale)
    }

    /// Row-major 2×2 spectral density matrix at frequency `ω` (cycles per unit).
    pub fn psd(&self, omega: f64) -> [f64; 4] {
        let [a11, a22, a12] = self.rates();
        let [s1, s2] = self.sigma;
        let f12 = matern_psd(self.rho12 * s1 * s2, self.nu12, a12, omega);
        [matern_psd(s1 * s1, self.nu11, a11, omega), f12, f12, matern_psd(s2 * s2, self.nu22, a22, omega)]
    }

    /// Row-major 2×2 ACF block at lag `τ`.
    pub fn acf(&self, tau: f64) -> [f64; 4] {
        let [a11, a22, a12] = self.rates();
        let m = |nu: f64, a: f64| matern_correlation(nu, a * tau.abs()).expect("ν validated");
        let [s1, s2] = self.sigma;
        let c12 = if self.rho12 == 0.0 { 0.0 } else { self.rho12 * s1 * s2 * m(self.nu12, a12) };
        [s1 * s1 * m(self.nu11, a11), c12, c12, s2 * s2 * m(self.nu22, a22)]
    }

    pub fn acf_matrix(&self, tau: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &self.acf(tau))
    }
}
