//! Whittle likelihood for spline PSD models.
//!
//! The objective over the Fourier grid `Ω_n` (every axis index in `1..n`) is
//! `L(c) = Σ_l log f_l + I_l / f_l`, `f_l = max(Σ_i c_i φ_i(ω_l), ε_f)`.
//! `φ_i` is the basis function the model actually evaluates: the B-spline
//! (or tensor product), mirrored for real processes and optionally summed
//! over the aliases `ω + j/Δ`. Each design row has at most a handful of
//! nonzeros, so the Hessian is banded in coefficient index.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::inference::banded::BandedSym;
use crate::inference::optim::{norm, FitDiagnostics, FitOptions, FitReport};
use crate::inference::periodogram::Periodogram;
use crate::models::{SplinePsdModel, TensorCoeffs, TensorPsdModel};
use crate::transform::AcfBasis;

/// Per-axis spline bases plus the real-process flag; coefficients are
/// flattened row-major over the axes (last axis fastest).
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    axes: Vec<AcfBasis<f64>>,
    real_process: bool,
}

impl SpectralBasis {
    pub fn new(axes: Vec<AcfBasis<f64>>, real_process: bool) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidModel("spectral basis needs at least one axis".into()));
        }
        Ok(Self { axes, real_process })
    }

    pub fn univariate(basis: AcfBasis<f64>, real_process: bool) -> Self {
        Self { axes: vec![basis], real_process }
    }

    pub fn axes(&self) -> &[AcfBasis<f64>] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn real_process(&self) -> bool {
        self.real_process
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(AcfBasis::num_basis).collect()
    }

    pub fn num_coeffs(&self) -> usize {
        self.shape().iter().product()
    }

    /// Sparse row `φ(ω)` sorted by coefficient index.
    pub fn row(&self, omega: &[f64], delta: &[f64], alias: bool) -> Vec<(usize, f64)> {
        let shape = self.shape();
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        let shifts: Vec<Vec<f64>> = self
            .axes
            .iter()
            .zip(omega.iter().zip(delta))
            .map(|(ax, (&w, &d))| {
                if !alias {
                    return vec![w];
                }
                let (lo, hi) = (ax.knots().first(), ax.knots().last());
                let (lo, hi) = if self.real_process { (lo.min(-hi), hi.max(-lo)) } else { (lo, hi) };
                // j = 0 always; other aliases only when strictly inside the span,
                // so a knot span ending exactly at ±1/(2Δ) is not counted twice.
                let j0 = ((lo - w) * d).floor() as i64;
                let j1 = ((hi - w) * d).ceil() as i64;
                (j0.min(0)..=j1.max(0))
                    .map(|j| w + j as f64 / d)
                    .enumerate()
                    .filter(|&(q, v)| q as i64 + j0.min(0) == 0 || (v > lo && v < hi))
                    .map(|(_, v)| v)
                    .collect()
            })
            .collect();
        let signs: &[f64] = if self.real_process { &[1.0, -1.0] } else { &[1.0] };
        let weight = 1.0 / signs.len() as f64;
        let mut pick = vec![0usize; shifts.len()];
        'combos: loop {
            for &s in signs {
                let mut locals = Vec::with_capacity(shifts.len());
                for (ax, basis) in self.axes.iter().enumerate() {
                    match basis.knots().local_values(s * shifts[ax][pick[ax]]) {
                        Some(lv) if !lv.1.is_empty() => locals.push(lv),
                        _ => break,
                    }
                }
                if locals.len() == shifts.len() {
                    add_tensor_terms(&mut acc, &locals, &shape, weight);
                }
            }
            for ax in (0..pick.len()).rev() {
                pick[ax] += 1;
                if pick[ax] < shifts[ax].len() {
                    continue 'combos;
                }
                pick[ax] = 0;
            }
            break;
        }
        acc.into_iter().filter(|&(_, v)| v != 0.0).collect()
    }
}

fn add_tensor_terms(acc: &mut BTreeMap<usize, f64>, locals: &[(usize, Vec<f64>)], shape: &[usize], weight: f64) {
    let mut pos = vec![0usize; locals.len()];
    loop {
        let mut flat = 0;
        let mut prod = weight;
        for (ax, (start, vals)) in locals.iter().enumerate() {
            flat = flat * shape[ax] + start + pos[ax];
            prod *= vals[pos[ax]];
        }
        *acc.entry(flat).or_insert(0.0) += prod;
        let mut ax = locals.len();
        loop {
            if ax == 0 {
                return;
            }
            ax -= 1;
            pos[ax] += 1;
            if pos[ax] < locals[ax].1.len() {
                break;
            }
            pos[ax] = 0;
        }
    }
}

/// Models the Whittle routines can read a basis and coefficients from.
pub trait WhittleModel {
    fn spectral_basis(&self) -> SpectralBasis;
    fn flat_coeffs(&self) -> Vec<f64>;
}

impl WhittleModel for SplinePsdModel<f64> {
    fn spectral_basis(&self) -> SpectralBasis {
        SpectralBasis::univariate(self.basis().clone(), self.real_process())
    }
    fn flat_coeffs(&self) -> Vec<f64> {
        self.coeffs().to_vec()
    }
}

impl WhittleModel for TensorPsdModel<f64> {
    fn spectral_basis(&self) -> SpectralBasis {
        SpectralBasis { axes: self.axes().to_vec(), real_process: self.real_process() }
    }
    fn flat_coeffs(&self) -> Vec<f64> {
        match self.coeffs() {
            TensorCoeffs::Dense { data, .. } => data.clone(),
            TensorCoeffs::Sparse { shape, entries } => {
                let mut out = vec![0.0; shape.iter().product()];
                for (idx, &v) in entries {
                    let flat = idx.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i);
                    out[flat] = v;
                }
                out
            }
        }
    }
}

/// Value, gradient and banded Hessian of the Whittle objective in `c`.
#[derive(Debug, Clone)]
pub struct WhittleEvaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: BandedSym,
    pub floor_activations: usize,
}

/// Design rows and periodogram ordinates over `Ω_n`, ready for repeated
/// objective evaluations.
#[derive(Debug, Clone)]
pub struct WhittleProblem {
    basis: SpectralBasis,
    rows: Vec<Vec<(usize, f64)>>,
    values: Vec<f64>,
    floor: f64,
    bandwidth: usize,
}

impl WhittleProblem {
    pub fn new(basis: SpectralBasis, pg: &Periodogram, opts: &FitOptions) -> Result<Self> {
        if pg.dim() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: pg.dim() });
        }
        if !(opts.floor_rel >= 0.0 && opts.floor_rel.is_finite()) {
            return Err(Error::InvalidArgument("PSD floor must be nonnegative".into()));
        }
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for (p, &v) in pg.values().iter().enumerate() {
            if pg.index(p).contains(&0) {
                continue;
            }
            let omega = pg.omega(p);
            if let Some([lo, hi]) = opts.band {
                if omega.iter().any(|w| w.abs() < lo || w.abs() > hi) {
                    continue;
                }
            }
            rows.push(basis.row(&omega, pg.delta(), opts.alias));
            values.push(v);
        }
        if rows.is_empty() {
            return Err(Error::InvalidArgument("no Fourier frequencies left in the Whittle sum".into()));
        }
        let max_i = values.iter().cloned().fold(0.0, f64::max);
        let floor = if max_i > 0.0 { opts.floor_rel * max_i } else { opts.floor_rel.max(f64::MIN_POSITIVE) };
        let bandwidth = rows
            .iter()
            .filter(|r| !r.is_empty())
            .map(|r| r[r.len() - 1].0 - r[0].0)
            .max()
            .unwrap_or(0);
        Ok(Self { basis, rows, values, floor, bandwidth })
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn num_frequencies(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn periodogram_values(&self) -> &[f64] {
        &self.values
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn check(&self, c: &[f64]) -> Result<()> {
        let m = self.basis.num_coeffs();
        if c.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: c.len() });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Whittle coefficients".into()));
        }
        Ok(())
    }

    fn psd(row: &[(usize, f64)], c: &[f64]) -> f64 {
        row.iter().map(|&(i, b)| c[i] * b).sum()
    }

    /// Objective value and number of floored frequencies.
    pub fn nll(&self, c: &[f64]) -> Result<(f64, usize)> {
        self.check(c)?;
        let mut total = 0.0;
        let mut act = 0;
        for (row, &i_l) in self.rows.iter().zip(&self.values) {
            let mut f = Self::psd(row, c);
            if !(f > self.floor) {
                f = self.floor;
                act += 1;
            }
            total += f.ln() + i_l / f;
        }
        Ok((total, act))
    }

    /// Objective, gradient and Hessian. Floored frequencies contribute a
    /// constant, so they add nothing to the derivatives.
    pub fn evaluate(&self, c: &[f64]) -> Result<WhittleEvaluation> {
        self.check(c)?;
        let m = c.len();
        let mut value = 0.0;
        let mut gradient = vec![0.0; m];
        let mut hessian = BandedSym::zeros(m, self.bandwidth);
        let mut floor_activations = 0;
        for (row, &i_l) in self.rows.iter().zip(&self.values) {
            let f = Self::psd(row, c);
            if !(f > self.floor) {
                value += self.floor.ln() + i_l / self.floor;
                floor_activations += 1;
                continue;
            }
            value += f.ln() + i_l / f;
            let g1 = 1.0 / f - i_l / (f * f);
            let h1 = 2.0 * i_l / (f * f * f) - 1.0 / (f * f);
            for (a, &(i, bi)) in row.iter().enumerate() {
                gradient[i] += g1 * bi;
                for &(j, bj) in &row[..=a] {
                    hessian.add(i, j, h1 * bi * bj);
                }
            }
        }
        Ok(WhittleEvaluation { value, gradient, hessian, floor_activations })
    }

    /// Starting coefficients `c_i = Σ_l φ_il I_l / Σ_l φ_il s_l` with
    /// `s_l = Σ_j φ_jl`, exact when `I` is a constant multiple of `s`.
    pub fn default_init(&self) -> Vec<f64> {
        let m = self.basis.num_coeffs();
        let mut num = vec![0.0; m];
        let mut den = vec![0.0; m];
        for (row, &i_l) in self.rows.iter().zip(&self.values) {
            let s: f64 = row.iter().map(|&(_, b)| b).sum();
            for &(i, b) in row {
                num[i] += b * i_l;
                den[i] += b * s;
            }
        }
        let mean_i = self.values.iter().sum::<f64>() / self.values.len() as f64;
        let raw: Vec<f64> = num.iter().zip(&den).map(|(n, d)| if *d > 0.0 { n / d } else { 0.0 }).collect();
        let pos: Vec<f64> = raw.iter().copied().filter(|v| *v > 0.0).collect();
        let base = if pos.is_empty() { mean_i.max(1.0) } else { pos.iter().sum::<f64>() / pos.len() as f64 };
        raw.into_iter().map(|v| v.max(1e-3 * base)).collect()
    }
}

/// Whittle objective of a model against a periodogram, with default options.
pub fn whittle_nll<M: WhittleModel>(model: &M, pg: &Periodogram) -> Result<f64> {
    let problem = WhittleProblem::new(model.spectral_basis(), pg, &FitOptions::default())?;
    problem.nll(&model.flat_coeffs()).map(|(v, _)| v)
}

/// Gradient and banded Hessian of [`whittle_nll`] in the coefficients.
pub fn whittle_grad_hess<M: WhittleModel>(model: &M, pg: &Periodogram) -> Result<WhittleEvaluation> {
    let problem = WhittleProblem::new(model.spectral_basis(), pg, &FitOptions::default())?;
    problem.evaluate(&model.flat_coeffs())
}

/// Minimizes the Whittle objective over `c = θ²` by Levenberg-damped Newton
/// steps, solving each damped system with a band Cholesky.
pub fn fit_whittle(pg: &Periodogram, basis: SpectralBasis, init: Option<Vec<f64>>, opts: &FitOptions) -> Result<FitReport> {
    let problem = WhittleProblem::new(basis, pg, opts)?;
    fit_whittle_problem(&problem, init, opts)
}

/// [`fit_whittle`] on a prepared problem.
pub fn fit_whittle_problem(problem: &WhittleProblem, init: Option<Vec<f64>>, opts: &FitOptions) -> Result<FitReport> {
    let c0 = match init {
        Some(c) => {
            problem.check(&c)?;
            if c.iter().any(|v| *v < 0.0) {
                return Err(Error::InvalidArgument("initial coefficients must be nonnegative".into()));
            }
            c
        }
        None => problem.default_init(),
    };
    let m = c0.len();
    let mut theta: Vec<f64> = c0.iter().map(|c| c.sqrt()).collect();
    let sq = |t: &[f64]| t.iter().map(|v| v * v).collect::<Vec<f64>>();
    let mut eval = problem.evaluate(&sq(&theta))?;
    let mut evaluations = 1;
    let mut trajectory = vec![eval.value];
    let mut mu = 0.0f64;
    let mut iterations = 0;
    let grad_theta = |theta: &[f64], g: &[f64]| theta.iter().zip(g).map(|(t, g)| 2.0 * t * g).collect::<Vec<f64>>();
    let mut g_theta = grad_theta(&theta, &eval.gradient);
    let converged = |value: f64, g: &[f64]| norm(g) < opts.grad_tol * value.abs().max(1.0);
    // Set when the model's predicted decrease falls below the rounding level
    // of the objective: no step can then be resolved in floating point.
    let mut stationary = false;
    'outer: while !converged(eval.value, &g_theta) && iterations < opts.max_iter {
        let bw = eval.hessian.bandwidth();
        let mut h_theta = BandedSym::zeros(m, bw);
        let mut diag_scale = 0.0f64;
        for i in 0..m {
            for j in i.saturating_sub(bw)..=i {
                let mut v = 4.0 * theta[i] * theta[j] * eval.hessian.get(i, j);
                if i == j {
                    v += 2.0 * eval.gradient[i];
                    diag_scale = diag_scale.max(v.abs());
                }
                if v != 0.0 {
                    h_theta.add(i, j, v);
                }
            }
        }
        let mu_floor = 1e-12 * diag_scale.max(f64::MIN_POSITIVE);
        for _ in 0..80 {
            let mut damped = h_theta.clone();
            for i in 0..m {
                damped.add_diagonal(i, mu);
            }
            let Some(factor) = damped.cholesky() else {
                mu = (mu * 10.0).max(mu_floor);
                continue;
            };
            let rhs: Vec<f64> = g_theta.iter().map(|v| -v).collect();
            let step = BandedSym::cholesky_solve(&factor, &rhs);
            let predicted = -0.5 * step.iter().zip(&g_theta).map(|(s, g)| s * g).sum::<f64>();
            if predicted <= 8.0 * f64::EPSILON * eval.value.abs().max(1.0) {
                stationary = true;
                break 'outer;
            }
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + s).collect();
            evaluations += 1;
            let next = problem.evaluate(&sq(&trial))?;
            if next.value < eval.value {
                theta = trial;
                eval = next;
                g_theta = grad_theta(&theta, &eval.gradient);
                trajectory.push(eval.value);
                iterations += 1;
                mu = if mu / 10.0 < mu_floor { 0.0 } else { mu / 10.0 };
                continue 'outer;
            }
            mu = (mu * 10.0).max(mu_floor);
        }
        break;
    }
    Ok(FitReport {
        coeffs: sq(&theta),
        objective: eval.value,
        grad_norm: norm(&g_theta),
        iterations,
        converged: stationary || converged(eval.value, &g_theta),
        trajectory,
        diagnostics: FitDiagnostics {
            hessian_bandwidth: Some(problem.bandwidth()),
            floor_activations: eval.floor_activations,
            jitter: 0.0,
            evaluations,
        },
    })
}
