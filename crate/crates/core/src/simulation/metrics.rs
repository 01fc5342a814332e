//! Empirical autocovariances and the integrated absolute error.

use crate::error::{Error, Result};

/// Default IAE trapezoid step.
pub const IAE_STEP: f64 = 0.1;

fn centred(y: &[f64], demean: bool) -> Vec<f64> {
    if !demean {
        return y.to_vec();
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| v - mean).collect()
}

/// Unbiased empirical ACF `γ̂(τ) = (n−τ)⁻¹ Σ_t y_t y_{t+τ}`, `τ = 0..=max_lag`.
pub fn empirical_acf(y: &[f64], max_lag: usize, demean: bool) -> Result<Vec<f64>> {
    let n = y.len();
    if max_lag >= n {
        return Err(Error::InvalidArgument(format!("max lag {max_lag} must be below the series length {n}")));
    }
    let y = centred(y, demean);
    Ok((0..=max_lag)
        .map(|tau| y.iter().zip(&y[tau..]).map(|(a, b)| a * b).sum::<f64>() / (n - tau) as f64)
        .collect())
}

/// Cross version `γ̂_rs(τ) = (n−τ)⁻¹ Σ_t y_{r,t+τ} y_{s,t}` for a time-major
/// series with `m` components.
pub fn empirical_cross_acf(y: &[f64], m: usize, r: usize, s: usize, max_lag: usize, demean: bool) -> Result<Vec<f64>> {
    if m == 0 || y.len() % m != 0 {
        return Err(Error::DimensionMismatch { expected: m.max(1), found: y.len() });
    }
    if r >= m || s >= m {
        return Err(Error::IndexOutOfRange { index: r.max(s), count: m });
    }
    let n = y.len() / m;
    if max_lag >= n {
        return Err(Error::InvalidArgument(format!("max lag {max_lag} must be below the series length {n}")));
    }
    let a = centred(&(0..n).map(|t| y[t * m + r]).collect::<Vec<_>>(), demean);
    let b = centred(&(0..n).map(|t| y[t * m + s]).collect::<Vec<_>>(), demean);
    Ok((0..=max_lag)
        .map(|tau| a[tau..].iter().zip(&b).map(|(x, z)| x * z).sum::<f64>() / (n - tau) as f64)
        .collect())
}

/// Piecewise-linear interpolant of lag-indexed values `v[j] = γ̂(jΔ)`,
/// zero beyond the last lag.
pub fn interpolate_lags(values: &[f64], delta: f64, tau: f64) -> f64 {
    let x = tau.abs() / delta;
    let j = x.floor() as usize;
    if j + 1 < values.len() {
        let w = x - j as f64;
        values[j] * (1.0 - w) + values[j + 1] * w
    } else if j + 1 == values.len() && x == j as f64 {
        values[j]
    } else {
        0.0
    }
}

/// Trapezoidal `∫_0^upper |γ(τ) − γ̂(τ)| dτ` on a grid of spacing close to
/// `step` that ends exactly at `upper`.
pub fn iae<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(truth: F, estimate: G, upper: f64, step: f64) -> f64 {
    let steps = ((upper / step).round() as usize).max(1);
    let h = upper / steps as f64;
    let mut s = 0.0;
    for j in 0..=steps {
        let t = j as f64 * h;
        let w = if j == 0 || j == steps { 0.5 } else { 1.0 };
        s += w * (truth(t) - estimate(t)).abs();
    }
    s * h
}

/// IAE divided by the interval length, the scale on which tables report
/// `×10²` values.
pub fn normalized_iae<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(truth: F, estimate: G, upper: f64, step: f64) -> f64 {
    iae(truth, estimate, upper, step) / upper
}
