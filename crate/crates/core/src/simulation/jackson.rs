//! Convergence of spline quasi-interpolants under knot refinement, and the
//! matching decay of ACF errors at large lags.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knots::KnotVector;
use crate::quadrature::{integrate_real, QuadOptions};
use crate::transform::AcfBasis;

/// Smooth test spectrum used by default: two Gaussian bumps on `[−0.5, 0.5]`.
pub fn bump_psd(omega: f64) -> f64 {
    (-(omega - 0.1).powi(2) / (2.0 * 0.08f64.powi(2))).exp()
        + 0.5 * (-(omega + 0.2).powi(2) / (2.0 * 0.12f64.powi(2))).exp()
}

/// Uniform knots of spacing close to `h` with `[a, b]` equal to `[κ_k, κ_m]`.
pub fn uniform_knots_covering(a: f64, b: f64, h: f64, degree: usize) -> Result<KnotVector> {
    if !(b > a) || !(h > 0.0) {
        return Err(Error::InvalidArgument("need a < b and h > 0".into()));
    }
    let cells = ((b - a) / h).round().max(1.0) as usize;
    let h = (b - a) / cells as f64;
    let mut knots: Vec<f64> = (0..cells + 2 * degree + 1)
        .map(|j| a + (j as f64 - degree as f64) * h)
        .collect();
    knots[degree] = a;
    knots[degree + cells] = b;
    KnotVector::new(knots, degree)
}

fn spline_value(kv: &KnotVector, coeffs: &[f64], omega: f64) -> f64 {
    match kv.local_values(omega) {
        Some((start, vals)) => vals.iter().enumerate().map(|(q, b)| coeffs[start + q] * b).sum(),
        None => 0.0,
    }
}

/// `‖f − Q_h f‖_{L¹[a,b]}` for the quasi-interpolant on uniform knots.
pub fn quasi_interpolation_error<F: Fn(f64) -> f64>(target: &F, a: f64, b: f64, h: f64, degree: usize) -> Result<f64> {
    let kv = uniform_knots_covering(a, b, h, degree)?;
    let coeffs = kv.quasi_interpolant(target)?;
    let breaks: Vec<f64> = kv.knots().iter().copied().filter(|&x| x > a && x < b).collect();
    let opts = QuadOptions { rel_tol: 1e-9, abs_tol: 1e-20, max_depth: 40 };
    integrate_real(|w| (target(w) - spline_value(&kv, &coeffs, w)).abs(), a, b, &breaks, &opts)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacksonReport {
    pub degree: usize,
    pub spacings: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`.
    pub slope: f64,
}

/// L¹ quasi-interpolation errors of `target` on `[a, b]` over a decreasing
/// sequence of knot spacings, with the fitted convergence slope.
pub fn jackson_rate_study<F: Fn(f64) -> f64>(target: F, a: f64, b: f64, degree: usize, spacings: &[f64]) -> Result<JacksonReport> {
    if spacings.len() < 2 || spacings.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("knot spacings must be a decreasing sequence of at least two values".into()));
    }
    let errors = spacings
        .iter()
        .map(|&h| quasi_interpolation_error(&target, a, b, h, degree))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    Ok(JacksonReport { degree, spacings: spacings.to_vec(), errors, slope: ls_slope(&xs, &ys) })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailScan {
    pub degree: usize,
    pub lags: Vec<f64>,
    /// `|γ_ref(τ) − γ̂(τ)|·τ^k` at each lag.
    pub weighted_errors: Vec<f64>,
    /// Maximum of the weighted error over each decade `[10^j, 10^{j+1})`.
    pub decade_maxima: Vec<f64>,
    /// Least-squares slope of `log` decade maxima against decade index;
    /// nonpositive when the weighted error does not grow.
    pub trend: f64,
}

fn spline_acf(basis: &AcfBasis, coeffs: &[f64], tau: f64) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &c) in coeffs.iter().enumerate() {
        acc += basis.rho_eval(i, tau)? * c;
    }
    Ok(acc)
}

/// Compares the ACF of the degree-`k` quasi-interpolant at spacing `h` with
/// that of a reference on spacing `h_ref`, weighting the error by `τ^k` over
/// log-spaced lags in `[lo, hi]`.
#[allow(clippy::too_many_arguments)]
pub fn tail_decay_scan<F: Fn(f64) -> f64>(
    target: F,
    a: f64,
    b: f64,
    degree: usize,
    h: f64,
    h_ref: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<TailScan> {
    if !(lo > 0.0 && hi > lo) || points < 2 {
        return Err(Error::InvalidArgument("tail scan needs 0 < lo < hi and at least two lags".into()));
    }
    let coarse = uniform_knots_covering(a, b, h, degree)?;
    let fine = uniform_knots_covering(a, b, h_ref, degree)?;
    let cc = coarse.quasi_interpolant(&target)?;
    let cf = fine.quasi_interpolant(&target)?;
    let (bc, bf) = (AcfBasis::new(coarse), AcfBasis::new(fine));
    let ratio = (hi / lo).ln();
    let lags: Vec<f64> = (0..points).map(|j| lo * (ratio * j as f64 / (points - 1) as f64).exp()).collect();
    let weighted_errors = lags
        .iter()
        .map(|&t| Ok((spline_acf(&bf, &cf, t)? - spline_acf(&bc, &cc, t)?).norm() * t.powi(degree as i32)))
        .collect::<Result<Vec<f64>>>()?;
    let first = lo.log10().floor() as i32;
    let last = hi.log10().ceil() as i32;
    let mut decade_maxima = Vec::new();
    for d in first..last {
        let (l, u) = (10f64.powi(d), 10f64.powi(d + 1));
        let m = lags
            .iter()
            .zip(&weighted_errors)
            .filter(|(t, _)| **t >= l && **t < u)
            .map(|(_, e)| *e)
            .fold(0.0f64, f64::max);
        if m > 0.0 {
            decade_maxima.push(m);
        }
    }
    let trend = if decade_maxima.len() >= 2 {
        let xs: Vec<f64> = (0..decade_maxima.len()).map(|j| j as f64).collect();
        let ys: Vec<f64> = decade_maxima.iter().map(|v| v.log10()).collect();
        ls_slope(&xs, &ys)
    } else {
        0.0
    };
    Ok(TailScan { degree, lags, weighted_errors, decade_maxima, trend })
}
