//! Monte Carlo benchmarks: univariate Matérn-3/2 recovery and bivariate
//! Matérn recovery with varying cross-correlation.
//!
//! Every replication draws from its own ChaCha stream (master seed, stream
//! `cell << 32 | rep`), and per-replication scores are collected in index
//! order before aggregation, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::gaussian::{fit_mle_multivariate, fit_mle_univariate, fit_parametric};
use crate::inference::optim::FitOptions;
use crate::knots::KnotVector;
use crate::simulation::matern::{bivariate_lambda_bound, matern_correlation, BivariateMaternSpec, MaternSpec};
use crate::simulation::metrics::{empirical_acf, empirical_cross_acf, interpolate_lags, normalized_iae};
use crate::simulation::sample::{rng_for, GpSampler};
use crate::transform::AcfBasis;

/// Offset used for the offset-log knot placement.
pub const KNOT_OFFSET: f64 = 0.01;

fn bench_fit_options() -> FitOptions {
    FitOptions { grad_tol: 1e-6, ..FitOptions::default() }
}

/// Settings for the univariate benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Table1Config {
    pub length_scales: Vec<f64>,
    pub degrees: Vec<usize>,
    /// Interior offset-log knots strictly inside `(0, 0.5)`.
    pub n_knots: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub n: usize,
    pub delta: f64,
    pub nu: f64,
    pub variance: f64,
    pub knot_offset: f64,
    pub iae_step: f64,
    /// Subtract the sample mean before fitting and before the empirical ACF.
    pub demean: bool,
    pub fit: FitOptions,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            length_scales: vec![2.0],
            degrees: vec![0, 1, 2],
            n_knots: vec![4],
            reps: 100,
            seed: 20240601,
            n: 2000,
            delta: 1.0,
            nu: 1.5,
            variance: 1.0,
            knot_offset: KNOT_OFFSET,
            iae_step: 0.1,
            demean: false,
            fit: bench_fit_options(),
        }
    }
}

/// Settings for the bivariate benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Table2Config {
    pub lambdas: Vec<f64>,
    pub degrees: Vec<usize>,
    /// Interior offset-log knots strictly inside `(0, 0.5)`.
    pub n_knots: usize,
    pub reps: usize,
    pub seed: u64,
    pub n: usize,
    pub delta: f64,
    pub length_scale: f64,
    /// `[ν11, ν22, ν12]`.
    pub nu: [f64; 3],
    pub sigma: [f64; 2],
    pub knot_offset: f64,
    pub iae_step: f64,
    pub demean: bool,
    /// Include the maximum-likelihood fit of the true parametric family.
    pub parametric: bool,
    pub fit: FitOptions,
}

impl Default for Table2Config {
    fn default() -> Self {
        Self {
            lambdas: vec![-0.5, 0.0, 0.5],
            degrees: vec![1, 2],
            n_knots: 3,
            reps: 100,
            seed: 20240601,
            n: 1024,
            delta: 1.0,
            length_scale: 2.0,
            nu: [2.0, 1.0, 1.5],
            sigma: [1.0, 1.0],
            knot_offset: KNOT_OFFSET,
            iae_step: 0.1,
            demean: false,
            parametric: true,
            fit: bench_fit_options(),
        }
    }
}

/// One aggregated cell. IAE values are normalized by the interval length
/// and scaled by 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub length_scale: f64,
    pub lambda12: Option<f64>,
    pub component: String,
    pub estimator: String,
    pub degree: Option<usize>,
    pub n_knots: Option<usize>,
    pub mean: f64,
    pub sd: f64,
    /// Replications that produced a score.
    pub reps: usize,
    /// Replications whose fit returned an error (excluded from mean/sd).
    pub failures: usize,
    /// Scored replications whose optimizer stopped before convergence.
    pub nonconverged: usize,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str =
        "length_scale,lambda12,component,estimator,degree,n_knots,mean,sd,reps,failures,nonconverged";

    pub fn csv_line(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{:.6},{:.6},{},{},{}",
            self.length_scale,
            opt(self.lambda12.map(|v| v.to_string())),
            self.component,
            self.estimator,
            opt(self.degree.map(|v| v.to_string())),
            opt(self.n_knots.map(|v| v.to_string())),
            self.mean,
            self.sd,
            self.reps,
            self.failures,
            self.nonconverged
        )
    }
}

/// Renders rows as CSV text with a header line.
pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(BenchRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

/// Score of one estimator in one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Score {
    Ok { value: f64, converged: bool },
    Failed,
}

#[derive(Debug, Clone)]
struct CellKey {
    component: &'static str,
    estimator: &'static str,
    degree: Option<usize>,
    n_knots: Option<usize>,
}

fn aggregate(key: &CellKey, scores: &[Score], length_scale: f64, lambda12: Option<f64>) -> BenchRow {
    let vals: Vec<f64> = scores
        .iter()
        .filter_map(|s| match s {
            Score::Ok { value, .. } => Some(100.0 * value),
            Score::Failed => None,
        })
        .collect();
    let failures = scores.len() - vals.len();
    let nonconverged = scores.iter().filter(|s| matches!(s, Score::Ok { converged: false, .. })).count();
    let n = vals.len();
    let mean = if n > 0 { vals.iter().sum::<f64>() / n as f64 } else { f64::NAN };
    let sd = if n > 1 {
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    BenchRow {
        length_scale,
        lambda12,
        component: key.component.into(),
        estimator: key.estimator.into(),
        degree: key.degree,
        n_knots: key.n_knots,
        mean,
        sd,
        reps: n,
        failures,
        nonconverged,
    }
}

/// Offset-log basis with `interior` knots between the endpoints 0 and 0.5.
fn offset_log_basis(interior: usize, degree: usize, offset: f64) -> Result<AcfBasis> {
    Ok(AcfBasis::new(KnotVector::offset_log(0.0, 0.5, interior + 2, offset, degree)?))
}

fn demeaned(y: &mut [f64], m: usize) {
    let n = y.len() / m;
    for r in 0..m {
        let mean = (0..n).map(|t| y[t * m + r]).sum::<f64>() / n as f64;
        for t in 0..n {
            y[t * m + r] -= mean;
        }
    }
}

fn max_lag(upper: f64, delta: f64, n: usize) -> usize {
    ((upper / delta).ceil() as usize + 1).min(n - 1)
}

fn spline_acf(basis: &AcfBasis, coeffs: &[f64], tau: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * basis.rho_eval_real(i, tau).expect("index in range"))
        .sum()
}

fn check_reps(reps: usize, n: usize, delta: f64) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidArgument("benchmark needs at least one replication".into()));
    }
    if n < 2 || !(delta > 0.0) {
        return Err(Error::InvalidArgument("benchmark series needs n ≥ 2 and Δ > 0".into()));
    }
    Ok(())
}

/// Univariate benchmark: spline ML fits for every (degree, knot count) and
/// the empirical ACF, scored by normalized IAE on `[0, 10ℓ]`.
pub fn run_table1_benchmark(cfg: &Table1Config) -> Result<Vec<BenchRow>> {
    check_reps(cfg.reps, cfg.n, cfg.delta)?;
    let mut bases = Vec::new();
    let mut keys = vec![CellKey { component: "gamma", estimator: "empirical", degree: None, n_knots: None }];
    for &nk in &cfg.n_knots {
        for &k in &cfg.degrees {
            bases.push(offset_log_basis(nk, k, cfg.knot_offset)?);
            keys.push(CellKey { component: "gamma", estimator: "spline", degree: Some(k), n_knots: Some(nk) });
        }
    }
    let mut rows = Vec::new();
    for (cell, &ell) in cfg.length_scales.iter().enumerate() {
        let spec = MaternSpec::new(cfg.variance, ell, cfg.nu)?;
        let sampler = GpSampler::scalar(cfg.n, cfg.delta, |t| spec.acf(t))?;
        let upper = 10.0 * ell;
        let lags = max_lag(upper, cfg.delta, cfg.n);
        let truth = |t: f64| spec.acf(t);
        let per_rep: Vec<Vec<Score>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = rng_for(cfg.seed, ((cell as u64) << 32) | rep as u64);
                let mut y = sampler.sample(&mut rng);
                if cfg.demean {
                    demeaned(&mut y, 1);
                }
                let mut out = Vec::with_capacity(keys.len());
                out.push(match empirical_acf(&y, lags, false) {
                    Ok(g) => Score::Ok {
                        value: normalized_iae(truth, |t| interpolate_lags(&g, cfg.delta, t), upper, cfg.iae_step),
                        converged: true,
                    },
                    Err(_) => Score::Failed,
                });
                for basis in &bases {
                    out.push(match fit_mle_univariate(&y, cfg.delta, basis, None, &cfg.fit) {
                        Ok(fit) => Score::Ok {
                            value: normalized_iae(truth, |t| spline_acf(basis, &fit.coeffs, t), upper, cfg.iae_step),
                            converged: fit.converged,
                        },
                        Err(_) => Score::Failed,
                    });
                }
                out
            })
            .collect();
        for (j, key) in keys.iter().enumerate() {
            let scores: Vec<Score> = per_rep.iter().map(|r| r[j]).collect();
            rows.push(aggregate(key, &scores, ell, None));
        }
    }
    Ok(rows)
}

fn bivariate_spec(p: &[f64], nu: [f64; 3], bound: f64) -> BivariateMaternSpec {
    BivariateMaternSpec {
        sigma: [p[0].exp(), p[1].exp()],
        length_scale: p[2].exp(),
        nu11: nu[0],
        nu22: nu[1],
        nu12: nu[2],
        rho12: bound * p[3].tanh(),
    }
}

fn bivariate_blocks(p: &[f64], nu: [f64; 3], bound: f64, n: usize, delta: f64) -> Vec<Vec<f64>> {
    let spec = bivariate_spec(p, nu, bound);
    (0..n).map(|d| spec.acf(d as f64 * delta).to_vec()).collect()
}

/// Starting point `[ln σ1, ln σ2, ln ℓ, atanh(λ/bound)]` from sample moments;
/// `ℓ` matches the lag-1 correlation of the first component.
fn parametric_start(y: &[f64], nu: [f64; 3], bound: f64, delta: f64) -> Vec<f64> {
    let g11 = empirical_cross_acf(y, 2, 0, 0, 1, false).expect("n ≥ 2");
    let g22 = empirical_cross_acf(y, 2, 1, 1, 0, false).expect("n ≥ 2");
    let g12 = empirical_cross_acf(y, 2, 0, 1, 0, false).expect("n ≥ 2");
    let (v1, v2) = (g11[0].max(1e-12), g22[0].max(1e-12));
    let target = (g11[1] / v1).clamp(1e-3, 1.0 - 1e-9);
    // corr(Δ/ℓ) decreases in Δ/ℓ; bisect on ln ℓ.
    let (mut lo, mut hi) = ((delta * 1e-3).ln(), (delta * 1e4).ln());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let c = matern_correlation(nu[0], (2.0 * nu[0]).sqrt() * delta / mid.exp()).expect("ν validated");
        if c < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = (g12[0] / (v1 * v2).sqrt()).clamp(-0.95 * bound, 0.95 * bound);
    vec![0.5 * v1.ln(), 0.5 * v2.ln(), 0.5 * (lo + hi), (lam / bound).atanh()]
}

/// Bivariate benchmark: matrix spline ML fits, the empirical estimator and
/// optionally the parametric ML fit, scored on `γ11` and `γ12`.
pub fn run_table2_benchmark(cfg: &Table2Config) -> Result<Vec<BenchRow>> {
    check_reps(cfg.reps, cfg.n, cfg.delta)?;
    let bases = cfg
        .degrees
        .iter()
        .map(|&k| offset_log_basis(cfg.n_knots, k, cfg.knot_offset))
        .collect::<Result<Vec<_>>>()?;
    let mut keys = Vec::new();
    for comp in ["gamma11", "gamma12"] {
        keys.push(CellKey { component: comp, estimator: "empirical", degree: None, n_knots: None });
        for &k in &cfg.degrees {
            keys.push(CellKey { component: comp, estimator: "spline", degree: Some(k), n_knots: Some(cfg.n_knots) });
        }
        if cfg.parametric {
            keys.push(CellKey { component: comp, estimator: "parametric", degree: None, n_knots: None });
        }
    }
    let per_comp = keys.len() / 2;
    let bound = bivariate_lambda_bound(cfg.nu);
    let ell = cfg.length_scale;
    let upper = 10.0 * ell;
    let lags = max_lag(upper, cfg.delta, cfg.n);
    let mut rows = Vec::new();
    for (cell, &lambda) in cfg.lambdas.iter().enumerate() {
        let spec = BivariateMaternSpec::new(cfg.sigma, ell, cfg.nu, lambda)?;
        let sampler = GpSampler::new(2, cfg.n, cfg.delta, |t| spec.acf(t).to_vec())?;
        let truth = |c: usize| move |t: f64| spec.acf(t)[c];
        let per_rep: Vec<Vec<Score>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = rng_for(cfg.seed, ((cell as u64) << 32) | rep as u64);
                let mut y = sampler.sample(&mut rng);
                if cfg.demean {
                    demeaned(&mut y, 2);
                }
                let mut out = vec![Score::Failed; keys.len()];
                for (c, (r, s)) in [(0usize, 0usize), (0, 1)].into_iter().enumerate() {
                    if let Ok(g) = empirical_cross_acf(&y, 2, r, s, lags, false) {
                        out[c * per_comp] = Score::Ok {
                            value: normalized_iae(truth(c), |t| interpolate_lags(&g, cfg.delta, t), upper, cfg.iae_step),
                            converged: true,
                        };
                    }
                }
                for (j, basis) in bases.iter().enumerate() {
                    if let Ok(fit) = fit_mle_multivariate(&y, 2, cfg.delta, basis, None, &cfg.fit) {
                        for (c, (r, s)) in [(0usize, 0usize), (0, 1)].into_iter().enumerate() {
                            let coeffs: Vec<f64> = fit.coeffs.iter().map(|m| m[(r, s)]).collect();
                            out[c * per_comp + 1 + j] = Score::Ok {
                                value: normalized_iae(truth(c), |t| spline_acf(basis, &coeffs, t), upper, cfg.iae_step),
                                converged: fit.report.converged,
                            };
                        }
                    }
                }
                if cfg.parametric {
                    let p0 = parametric_start(&y, cfg.nu, bound, cfg.delta);
                    let fit = fit_parametric(
                        &y,
                        2,
                        |p| Ok(bivariate_blocks(p, cfg.nu, bound, cfg.n, cfg.delta)),
                        p0,
                        &cfg.fit,
                    );
                    if let Ok(fit) = fit {
                        let est = bivariate_spec(&fit.coeffs, cfg.nu, bound);
                        for c in 0..2 {
                            out[c * per_comp + per_comp - 1] = Score::Ok {
                                value: normalized_iae(truth(c), |t| est.acf(t)[c], upper, cfg.iae_step),
                                converged: fit.converged,
                            };
                        }
                    }
                }
                out
            })
            .collect();
        for (j, key) in keys.iter().enumerate() {
            let scores: Vec<Score> = per_rep.iter().map(|r| r[j]).collect();
            rows.push(aggregate(key, &scores, ell, Some(lambda)));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregation_counts() {
        let key = CellKey { component: "gamma", estimator: "spline", degree: Some(1), n_knots: Some(4) };
        let scores = [
            Score::Ok { value: 0.01, converged: true },
            Score::Failed,
            Score::Ok { value: 0.03, converged: false },
        ];
        let row = aggregate(&key, &scores, 2.0, None);
        assert_eq!((row.reps, row.failures, row.nonconverged), (2, 1, 1));
        assert!((row.mean - 2.0).abs() < 1e-12);
        assert!((row.sd - 2f64.sqrt()).abs() < 1e-12);
        assert!(row.csv_line().starts_with("2,,gamma,spline,1,4,2.000000,1.414214,2,1,1"));
    }

    #[test]
    fn small_table1_is_deterministic_across_threads() {
        let cfg = Table1Config { reps: 3, n: 200, degrees: vec![1], ..Default::default() };
        let a = run_table1_benchmark(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_table1_benchmark(&cfg)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|r| r.mean.is_finite() && r.failures == 0));
    }

    #[test]
    fn small_table2_runs() {
        let cfg = Table2Config { reps: 2, n: 128, lambdas: vec![0.5], degrees: vec![1], ..Default::default() };
        let rows = run_table2_benchmark(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.mean.is_finite() && r.failures == 0), "{rows:?}");
    }
}
