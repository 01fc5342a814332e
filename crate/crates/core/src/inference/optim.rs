use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Optimizer and likelihood settings shared by the Whittle and Gaussian fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Converged once `‖∇‖ < grad_tol · max(1, |objective|)`.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Whittle PSD floor relative to `max_l I(ω_l)`.
    pub floor_rel: f64,
    /// Optional `[lo, hi]` restriction on `|ω|` per axis for the Whittle sum.
    pub band: Option<[f64; 2]>,
    /// Fold `f(ω + j/Δ)` aliases into the Whittle spectrum.
    pub alias: bool,
    /// First jitter rung, relative to `trace / n`.
    pub jitter_start: f64,
    /// Last jitter rung, relative to `trace / n`.
    pub jitter_max: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iter: 500,
            floor_rel: 1e-12,
            band: None,
            alias: true,
            jitter_start: 1e-10,
            jitter_max: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Half-bandwidth of the Whittle Hessian in coefficient index.
    pub hessian_bandwidth: Option<usize>,
    /// Frequencies where the PSD floor was active at the optimum.
    pub floor_activations: usize,
    /// Largest diagonal jitter used by a Gaussian factorization.
    pub jitter: f64,
    /// Objective evaluations, including line-search trials.
    pub evaluations: usize,
}

/// Outcome of a fit. `grad_norm` is measured in the optimizer's own
/// (reparameterized) coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub coeffs: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial point.
    pub trajectory: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of [`bfgs`]: minimizer, value, gradient norm, iteration count,
/// convergence flag, accepted objective values and evaluation count.
#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trajectory: Vec<f64>,
    pub evaluations: usize,
}

/// BFGS with Armijo backtracking. Every accepted step strictly decreases
/// the objective. Evaluation errors during the line search count as
/// rejected trials; an error at the starting point is returned.
pub fn bfgs<F>(mut fg: F, x0: Vec<f64>, grad_tol: f64, max_iter: usize) -> Result<BfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = fg(&x)?;
    let mut evaluations = 1;
    let mut trajectory = vec![f];
    // Inverse Hessian approximation, row-major.
    let mut h = identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    let converged_at = |f: f64, g: &[f64]| norm(g) < grad_tol * f.abs().max(1.0);
    while !converged_at(f, &g) && iterations < max_iter {
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            h = identity(n);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = dot(&d, &g);
        }
        let mut step = if fresh { 1.0f64.min(1.0 / norm(&g).max(1e-300)) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            evaluations += 1;
            if let Ok((ft, gt)) = fg(&trial) {
                if ft.is_finite() && ft <= f + 1e-4 * step * slope && ft < f {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if fresh {
                break;
            }
            h = identity(n);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if fresh {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
            }
            bfgs_update(&mut h, &s, &y, sy);
            fresh = false;
        }
        x = xn;
        f = fn_;
        g = gn;
        trajectory.push(f);
        iterations += 1;
    }
    Ok(BfgsOutcome {
        grad_norm: norm(&g),
        converged: converged_at(f, &g),
        x,
        value: f,
        iterations,
        trajectory,
        evaluations,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

/// `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`, `ρ = 1/sᵀy`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Central-difference gradient with per-coordinate step `h·max(1, |x_i|)`.
pub fn numerical_gradient<F: FnMut(&[f64]) -> Result<f64>>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let step = h * x[i].abs().max(1.0);
        xp[i] = x[i] + step;
        let fp = f(&xp)?;
        xp[i] = x[i] - step;
        let fm = f(&xp)?;
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * step);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let out = bfgs(
            |x| {
                let (a, b) = (x[0], x[1]);
                let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
                Ok((f, g))
            },
            vec![-1.2, 1.0],
            1e-10,
            500,
        )
        .unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
        assert!(out.trajectory.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn quadratic_with_numerical_gradient() {
        let f = |x: &[f64]| Ok(3.0 * (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2) + x[0] * x[1]);
        let out = bfgs(|x| Ok((f(x)?, numerical_gradient(f, x, 1e-6)?)), vec![0.0, 0.0], 1e-8, 200).unwrap();
        assert!(out.converged);
        // ∇ = 0: 6(x−2) + y = 0, 2(y+1) + x = 0
        let (x, y) = (out.x[0], out.x[1]);
        assert!((6.0 * (x - 2.0) + y).abs() < 1e-6 && (2.0 * (y + 1.0) + x).abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let out = bfgs(
            |x| Ok(((x[0] - 5.0).powi(4), vec![4.0 * (x[0] - 5.0).powi(3)])),
            vec![0.0],
            1e-14,
            2,
        )
        .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
