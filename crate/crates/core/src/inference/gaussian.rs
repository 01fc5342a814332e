//! Exact Gaussian likelihood and maximum-likelihood fits of spline models.
//!
//! Equispaced series go through the Toeplitz solvers with analytic
//! gradients; irregular sampling falls back to a dense Cholesky and central
//! differences.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::inference::optim::{bfgs, numerical_gradient, FitDiagnostics, FitOptions, FitReport};
use crate::inference::periodogram::Periodogram;
use crate::inference::toeplitz::{block_toeplitz_nll, toeplitz_nll, JitterLadder};
use crate::inference::whittle::{fit_whittle, SpectralBasis};
use crate::models::{covariance_matrix, real_part, StationaryKernel};
use crate::transform::AcfBasis;

fn ladder(opts: &FitOptions) -> JitterLadder {
    JitterLadder { start: opts.jitter_start, max: opts.jitter_max }
}

/// `½[log det Σ + yᵀΣ⁻¹y + n log 2π]` by Cholesky, with the jitter ladder
/// on failure. Returns the value and the jitter used.
pub fn gaussian_nll_dense(cov: &DMatrix<f64>, y: &[f64], jitter: &JitterLadder) -> Result<(f64, f64)> {
    let n = y.len();
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: cov.nrows() });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty series".into()));
    }
    if y.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Gaussian likelihood input".into()));
    }
    let scale = cov.trace().abs() / n as f64;
    let (chol, used) = jitter.run(scale, |j| {
        let mut c = cov.clone();
        for i in 0..n {
            c[(i, i)] += j;
        }
        let lo = (0..n).map(|i| c[(i, i)]).fold(f64::INFINITY, f64::min);
        c.cholesky().ok_or(lo)
    })?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    Ok((0.5 * (logdet + yv.dot(&alpha) + n as f64 * (2.0 * std::f64::consts::PI).ln()), used))
}

/// Gaussian NLL of data observed at `points` under a stationary kernel.
/// `y` is point-major: the `M` components of point `a` sit at `a·M..(a+1)·M`.
pub fn gaussian_nll<K: StationaryKernel + ?Sized>(kernel: &K, y: &[f64], points: &[Vec<f64>]) -> Result<f64> {
    let expected = points.len() * kernel.components();
    if y.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: y.len() });
    }
    let cov = real_part(&covariance_matrix(kernel, points)?)?;
    gaussian_nll_dense(&cov, y, &JitterLadder::default()).map(|(v, _)| v)
}

/// Lag table `R_{d,i} = Re ρ_i(dΔ)`, `d = 0..n`.
pub fn lag_table(basis: &AcfBasis, n: usize, delta: f64) -> Result<Vec<Vec<f64>>> {
    (0..n)
        .map(|d| (0..basis.num_basis()).map(|i| basis.rho_eval_real(i, d as f64 * delta)).collect())
        .collect()
}

fn check_series(y: &[f64], delta: f64) -> Result<()> {
    if y.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 observations".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument("sample spacing must be positive".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("series value".into()));
    }
    Ok(())
}

/// Whittle estimate used to start the univariate ML fit.
pub fn whittle_start(y: &[f64], delta: f64, basis: &AcfBasis, opts: &FitOptions) -> Result<Vec<f64>> {
    let pg = Periodogram::from_series(y, delta, false)?;
    let fit = fit_whittle(&pg, SpectralBasis::univariate(basis.clone(), true), None, opts)?;
    Ok(fit.coeffs)
}

fn positive_theta(c: &[f64]) -> Result<Vec<f64>> {
    if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("initial coefficients must be finite and nonnegative".into()));
    }
    let top = c.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    Ok(c.iter().map(|v| v.max(1e-6 * top).sqrt()).collect())
}

/// ML fit of a real-process univariate spline model to an equispaced series.
/// Coefficients are `c = θ²`; gradients are exact (Toeplitz adjoint).
pub fn fit_mle_univariate(
    y: &[f64],
    delta: f64,
    basis: &AcfBasis,
    init: Option<Vec<f64>>,
    opts: &FitOptions,
) -> Result<FitReport> {
    check_series(y, delta)?;
    let m = basis.num_basis();
    let c0 = match init {
        Some(c) if c.len() != m => return Err(Error::DimensionMismatch { expected: m, found: c.len() }),
        Some(c) => c,
        None => whittle_start(y, delta, basis, opts)?,
    };
    let theta0 = positive_theta(&c0)?;
    let n = y.len();
    let table = lag_table(basis, n, delta)?;
    let lad = ladder(opts);
    let jitter = Cell::new(0.0f64);
    let out = bfgs(
        |theta| {
            let c: Vec<f64> = theta.iter().map(|t| t * t).collect();
            let r: Vec<f64> = table.iter().map(|row| row.iter().zip(&c).map(|(a, b)| a * b).sum()).collect();
            let lik = toeplitz_nll(&r, y, true, &lad)?;
            jitter.set(lik.jitter);
            let mut g = vec![0.0; m];
            for (row, gb) in table.iter().zip(&lik.grad_blocks) {
                for (gi, rdi) in g.iter_mut().zip(row) {
                    *gi += gb[0] * rdi;
                }
            }
            let g_theta = g.iter().zip(theta).map(|(gi, t)| 2.0 * t * gi).collect();
            Ok((lik.value, g_theta))
        },
        theta0,
        opts.grad_tol,
        opts.max_iter,
    )?;
    Ok(FitReport {
        coeffs: out.x.iter().map(|t| t * t).collect(),
        objective: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: out.converged,
        trajectory: out.trajectory,
        diagnostics: FitDiagnostics { jitter: jitter.get(), evaluations: out.evaluations, ..Default::default() },
    })
}

/// ML fit for irregular sampling times, dense covariance and central
/// differences in `θ`.
pub fn fit_mle_irregular(
    y: &[f64],
    times: &[f64],
    basis: &AcfBasis,
    init: Vec<f64>,
    opts: &FitOptions,
) -> Result<FitReport> {
    let n = y.len();
    if times.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: times.len() });
    }
    if init.len() != basis.num_basis() {
        return Err(Error::DimensionMismatch { expected: basis.num_basis(), found: init.len() });
    }
    let lad = ladder(opts);
    let rho: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|a| {
            (0..=a)
                .map(|b| (0..basis.num_basis()).map(|i| basis.rho_eval_real(i, times[a] - times[b])).collect())
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .collect::<Result<_>>()?;
    let jitter = Cell::new(0.0f64);
    let objective = |theta: &[f64]| -> Result<f64> {
        let c: Vec<f64> = theta.iter().map(|t| t * t).collect();
        let cov = DMatrix::from_fn(n, n, |a, b| {
            let (a, b) = if a >= b { (a, b) } else { (b, a) };
            rho[a][b].iter().zip(&c).map(|(r, ci)| r * ci).sum()
        });
        let (v, j) = gaussian_nll_dense(&cov, y, &lad)?;
        jitter.set(j);
        Ok(v)
    };
    let out = bfgs(
        |theta| Ok((objective(theta)?, numerical_gradient(objective, theta, 1e-6)?)),
        positive_theta(&init)?,
        opts.grad_tol,
        opts.max_iter,
    )?;
    Ok(FitReport {
        coeffs: out.x.iter().map(|t| t * t).collect(),
        objective: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: out.converged,
        trajectory: out.trajectory,
        diagnostics: FitDiagnostics { jitter: jitter.get(), evaluations: out.evaluations, ..Default::default() },
    })
}

/// Fitted multivariate coefficients `C_i = L_i L_iᵀ` and the report (whose
/// `coeffs` are the row-major entries of every `C_i`).
#[derive(Debug, Clone)]
pub struct MultiFit {
    pub coeffs: Vec<DMatrix<f64>>,
    pub report: FitReport,
}

fn tri_len(m: usize) -> usize {
    m * (m + 1) / 2
}

fn unpack_lower(p: &[f64], m: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(m, m);
    let mut k = 0;
    for r in 0..m {
        for s in 0..=r {
            l[(r, s)] = p[k];
            k += 1;
        }
    }
    l
}

/// ML fit of a real-process matrix spline model to an `M`-component series
/// (`y` time-major, `M` values per time step).
pub fn fit_mle_multivariate(
    y: &[f64],
    m: usize,
    delta: f64,
    basis: &AcfBasis,
    init: Option<Vec<DMatrix<f64>>>,
    opts: &FitOptions,
) -> Result<MultiFit> {
    if m == 0 || y.len() % m != 0 {
        return Err(Error::DimensionMismatch { expected: m.max(1), found: y.len() });
    }
    let n = y.len() / m;
    check_series(&y[..n.min(y.len())], delta)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("series value".into()));
    }
    let nb = basis.num_basis();
    let init = match init {
        Some(c) => {
            if c.len() != nb || c.iter().any(|ci| ci.shape() != (m, m)) {
                return Err(Error::DimensionMismatch { expected: nb, found: c.len() });
            }
            c
        }
        None => {
            let mut diag = vec![DMatrix::zeros(m, m); nb];
            for r in 0..m {
                let comp: Vec<f64> = (0..n).map(|t| y[t * m + r]).collect();
                let c = whittle_start(&comp, delta, basis, opts)?;
                for (ci, v) in diag.iter_mut().zip(c) {
                    ci[(r, r)] = v;
                }
            }
            diag
        }
    };
    let mut p0 = Vec::with_capacity(nb * tri_len(m));
    for c in &init {
        let top = (0..m).map(|r| c[(r, r)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut reg = c.clone();
        for r in 0..m {
            reg[(r, r)] += 1e-6 * top;
        }
        let l = reg
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("initial coefficient matrices must be positive semi-definite".into()))?
            .l();
        for r in 0..m {
            for s in 0..=r {
                p0.push(l[(r, s)]);
            }
        }
    }
    let table = lag_table(basis, n, delta)?;
    let lad = ladder(opts);
    let jitter = Cell::new(0.0f64);
    let tl = tri_len(m);
    let coeffs_of = |p: &[f64]| -> Vec<DMatrix<f64>> {
        (0..nb)
            .map(|i| {
                let l = unpack_lower(&p[i * tl..(i + 1) * tl], m);
                &l * l.transpose()
            })
            .collect()
    };
    let out = bfgs(
        |p| {
            let cs = coeffs_of(p);
            let blocks: Vec<Vec<f64>> = table
                .iter()
                .map(|row| {
                    let mut g = vec![0.0; m * m];
                    for (c, &w) in cs.iter().zip(row) {
                        for r in 0..m {
                            for s in 0..m {
                                g[r * m + s] += w * c[(r, s)];
                            }
                        }
                    }
                    g
                })
                .collect();
            let lik = block_toeplitz_nll(&blocks, m, y, true, &lad)?;
            jitter.set(lik.jitter);
            let mut grad = Vec::with_capacity(p.len());
            for i in 0..nb {
                let mut gc = DMatrix::<f64>::zeros(m, m);
                for (row, gb) in table.iter().zip(&lik.grad_blocks) {
                    for r in 0..m {
                        for s in 0..m {
                            gc[(r, s)] += row[i] * gb[r * m + s];
                        }
                    }
                }
                let l = unpack_lower(&p[i * tl..(i + 1) * tl], m);
                let gl = (&gc + gc.transpose()) * l;
                for r in 0..m {
                    for s in 0..=r {
                        grad.push(gl[(r, s)]);
                    }
                }
            }
            Ok((lik.value, grad))
        },
        p0,
        opts.grad_tol,
        opts.max_iter,
    )?;
    let coeffs = coeffs_of(&out.x);
    Ok(MultiFit {
        report: FitReport {
            coeffs: coeffs.iter().flat_map(|c| c.transpose().iter().copied().collect::<Vec<f64>>()).collect(),
            objective: out.value,
            grad_norm: out.grad_norm,
            iterations: out.iterations,
            converged: out.converged,
            trajectory: out.trajectory,
            diagnostics: FitDiagnostics { jitter: jitter.get(), evaluations: out.evaluations, ..Default::default() },
        },
        coeffs,
    })
}

/// ML fit of a parametric family given through its lag blocks
/// `p ↦ [G_0, …, G_{N−1}]`. Parameter derivatives of the blocks are taken by
/// central differences and contracted with the exact block gradient.
pub fn fit_parametric<F>(y: &[f64], m: usize, blocks: F, p0: Vec<f64>, opts: &FitOptions) -> Result<FitReport>
where
    F: Fn(&[f64]) -> Result<Vec<Vec<f64>>>,
{
    let lad = ladder(opts);
    let jitter = Cell::new(0.0f64);
    let out = bfgs(
        |p| {
            let g = blocks(p)?;
            let lik = block_toeplitz_nll(&g, m, y, true, &lad)?;
            jitter.set(lik.jitter);
            let mut grad = vec![0.0; p.len()];
            let mut q = p.to_vec();
            for j in 0..p.len() {
                let h = 1e-6 * p[j].abs().max(1.0);
                q[j] = p[j] + h;
                let gp = blocks(&q)?;
                q[j] = p[j] - h;
                let gm = blocks(&q)?;
                q[j] = p[j];
                let mut acc = 0.0;
                for d in 0..g.len() {
                    for e in 0..m * m {
                        acc += lik.grad_blocks[d][e] * (gp[d][e] - gm[d][e]) / (2.0 * h);
                    }
                }
                grad[j] = acc;
            }
            Ok((lik.value, grad))
        },
        p0,
        opts.grad_tol,
        opts.max_iter,
    )?;
    Ok(FitReport {
        coeffs: out.x,
        objective: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: out.converged,
        trajectory: out.trajectory,
        diagnostics: FitDiagnostics { jitter: jitter.get(), evaluations: out.evaluations, ..Default::default() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::KnotVector;
    use crate::models::{ScalarAcf, SplinePsdModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_gaussian_cases() {
        let k = ScalarAcf(|_t: f64| 1.0);
        let v = gaussian_nll(&k, &[0.0], &[vec![0.0]]).unwrap();
        assert!((v - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        let v = gaussian_nll(&k, &[2.0], &[vec![0.0]]).unwrap();
        assert!((v - 0.5 * ((2.0 * std::f64::consts::PI).ln() + 4.0)).abs() < 1e-15);
    }

    #[test]
    fn dense_matches_naive_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 50;
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..30.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let k = ScalarAcf(|t: f64| (-(t / 3.0).powi(2)).exp() + if t == 0.0 { 0.1 } else { 0.0 });
        let pts: Vec<Vec<f64>> = times.iter().map(|&t| vec![t]).collect();
        let v = gaussian_nll(&k, &y, &pts).unwrap();
        let cov = real_part(&covariance_matrix(&k, &pts).unwrap()).unwrap();
        let inv = cov.clone().try_inverse().unwrap();
        let yv = DVector::from_column_slice(&y);
        let naive = 0.5 * (cov.determinant().ln() + (yv.transpose() * inv * &yv)[0] + n as f64 * (2.0 * std::f64::consts::PI).ln());
        assert!((v - naive).abs() < 1e-9 * naive.abs());
    }

    #[test]
    fn toeplitz_path_agrees_with_dense_model_likelihood() {
        let kv = KnotVector::new(vec![-0.05, 0.0, 0.1, 0.3, 0.5, 0.55], 1).unwrap();
        let model = SplinePsdModel::from_knots(kv.clone(), vec![3.0, 1.0, 0.4, 0.1], true).unwrap();
        let y: Vec<f64> = (0..60).map(|t| ((t * t) as f64 * 0.1).sin()).collect();
        let pts: Vec<Vec<f64>> = (0..60).map(|t| vec![t as f64]).collect();
        let dense = gaussian_nll(&model, &y, &pts).unwrap();
        let basis = AcfBasis::new(kv);
        let table = lag_table(&basis, 60, 1.0).unwrap();
        let r: Vec<f64> = table.iter().map(|row| row.iter().zip(model.coeffs()).map(|(a, b)| a * b).sum()).collect();
        let fast = toeplitz_nll(&r, &y, false, &JitterLadder::default()).unwrap().value;
        assert!((dense - fast).abs() < 1e-9 * dense.abs());
    }

    #[test]
    fn multivariate_fit_lowers_objective_and_stays_psd() {
        let kv = KnotVector::new(vec![-0.25, 0.0, 0.25, 0.5, 0.75], 1).unwrap();
        let basis = AcfBasis::new(kv);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 80;
        let mut y = vec![0.0; 2 * n];
        let mut prev = (0.0, 0.0);
        for t in 0..n {
            let e1: f64 = rng.random_range(-1.0..1.0);
            let e2: f64 = rng.random_range(-1.0..1.0);
            prev = (0.5 * prev.0 + e1, 0.3 * prev.1 + 0.5 * e1 + e2);
            y[2 * t] = prev.0;
            y[2 * t + 1] = prev.1;
        }
        let opts = FitOptions { max_iter: 200, ..Default::default() };
        let fit = fit_mle_multivariate(&y, 2, 1.0, &basis, None, &opts).unwrap();
        let t = &fit.report.trajectory;
        assert!(t.windows(2).all(|w| w[1] < w[0]));
        for c in &fit.coeffs {
            assert!(c.clone().symmetric_eigenvalues().min() >= -1e-12);
        }
        assert!(fit.coeffs.iter().map(|c| c[(1, 0)]).sum::<f64>() > 0.0);
    }

    #[test]
    fn irregular_fit_runs_and_decreases() {
        let kv = KnotVector::new(vec![-0.1, 0.0, 0.2, 0.5, 0.6], 1).unwrap();
        let basis = AcfBasis::new(kv);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let times: Vec<f64> = (0..30).map(|i| i as f64 + rng.random_range(0.0..0.5)).collect();
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fit = fit_mle_irregular(&y, &times, &basis, vec![1.0, 1.0, 1.0], &FitOptions { max_iter: 100, ..Default::default() }).unwrap();
        assert!(fit.objective <= fit.trajectory[0]);
    }
}
