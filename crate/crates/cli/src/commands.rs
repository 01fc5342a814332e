use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use splinekernel::inference::gaussian::{fit_mle_multivariate, fit_mle_univariate};
use splinekernel::inference::periodogram::Periodogram;
use splinekernel::inference::whittle::{fit_whittle, SpectralBasis};
use splinekernel::inference::{FitOptions, FitReport};
use splinekernel::io::{
    export_grid, export_points, fmt_f64, read_series_csv, series_to_csv, unix_now, write_atomic, AxisGrid, Degrees,
    ExportKind, InputRecord, Model, ModelFile, ModelMetadata, ModelSpec, SeriesData, TensorCoeffsJson,
};
use splinekernel::simulation::{
    bump_psd, jackson_rate_study, rng_for, rows_to_csv, run_table1_benchmark, run_table2_benchmark,
    BivariateMaternSpec, GpSampler, MaternSpec, Table1Config, Table2Config,
};
use splinekernel::{AcfBasis, Error, KnotVector};

use crate::args::*;

/// Exit status and message of a failed command.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite(_) | Error::QuadratureNonConvergence { .. } | Error::NotPositiveDefinite { .. } => {
                Failure::numeric(e.to_string())
            }
            _ => Failure::usage(e.to_string()),
        }
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

/// Files and seed a command touched, for the run manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
}

impl Outcome {
    fn input(&mut self, path: &Path) -> CmdResult<()> {
        let rec = InputRecord::from_path(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        self.inputs.push(rec);
        Ok(())
    }

    /// Writes `text` atomically to `out`, or prints it when there is no file.
    fn emit(&mut self, out: Option<&PathBuf>, text: &str) -> CmdResult<()> {
        match out {
            Some(p) => {
                write_atomic(p, text.as_bytes())
                    .map_err(|e| Failure::numeric(format!("cannot write {}: {e}", p.display())))?;
                self.outputs.push(p.clone());
            }
            None => print!("{text}"),
        }
        Ok(())
    }
}

pub fn run(cmd: &Command) -> CmdResult<Outcome> {
    let mut o = Outcome::default();
    match cmd {
        Command::Simulate(a) => simulate(a, &mut o)?,
        Command::FitWhittle(a) => fit_whittle_cmd(a, &mut o)?,
        Command::FitMle(a) => fit_mle_cmd(a, &mut o)?,
        Command::EvalAcf(a) => eval(a, ExportKind::Acf, &mut o)?,
        Command::EvalPsd(a) => eval(a, ExportKind::Psd, &mut o)?,
        Command::Periodogram(a) => periodogram(a, &mut o)?,
        Command::BenchTable1(a) => bench1(a, &mut o)?,
        Command::BenchTable2(a) => bench2(a, &mut o)?,
        Command::Jackson(a) => jackson(a, &mut o)?,
        Command::Separability(a) => separability(a, &mut o)?,
    }
    Ok(o)
}

/// Parses `key=value,key=value` into numbers, rejecting keys outside `allowed`.
fn parse_params(spec: &str, allowed: &[&str]) -> CmdResult<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("expected key=value, got `{part}`")))?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(Failure::usage(format!("unknown parameter `{k}` (expected one of {})", allowed.join(", "))));
        }
        let v: f64 = v.trim().parse().map_err(|_| Failure::usage(format!("`{v}` is not a number")))?;
        out.insert(k.to_string(), v);
    }
    Ok(out)
}

fn param(p: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> CmdResult<f64> {
    p.get(key).copied().or(default).ok_or_else(|| Failure::usage(format!("missing parameter `{key}`")))
}

fn parse_grid(spec: &str) -> CmdResult<AxisGrid> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Failure::usage(format!("grid `{spec}` is not start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(AxisGrid { start, stop, count })
}

fn read_model(path: &Path, o: &mut Outcome) -> CmdResult<ModelFile> {
    o.input(path)?;
    ModelFile::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_series(path: &Path, dims: usize, o: &mut Outcome) -> CmdResult<SeriesData> {
    o.input(path)?;
    read_series_csv(path, dims).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn simulate(a: &SimulateArgs, o: &mut Outcome) -> CmdResult<()> {
    if a.n == 0 {
        return Err(Failure::usage("--n must be positive"));
    }
    let sampler = if let Some(spec) = &a.matern {
        let p = parse_params(spec, &["nu", "ell", "var"])?;
        let k = MaternSpec::new(param(&p, "var", Some(1.0))?, param(&p, "ell", None)?, param(&p, "nu", None)?)?;
        GpSampler::scalar(a.n, a.delta, |t| k.acf(t))?
    } else if let Some(spec) = &a.bivariate {
        let p = parse_params(spec, &["sigma1", "sigma2", "ell", "nu11", "nu22", "nu12", "rho"])?;
        let k = BivariateMaternSpec::new(
            [param(&p, "sigma1", Some(1.0))?, param(&p, "sigma2", Some(1.0))?],
            param(&p, "ell", None)?,
            [param(&p, "nu11", None)?, param(&p, "nu22", None)?, param(&p, "nu12", None)?],
            param(&p, "rho", None)?,
        )?;
        GpSampler::new(2, a.n, a.delta, |t| k.acf(t).to_vec())?
    } else if let Some(path) = &a.model {
        let model = read_model(path, o)?.model.build()?;
        if model.dim() != 1 {
            return Err(Failure::usage(format!("simulation needs a one-dimensional model, got dimension {}", model.dim())));
        }
        let m = model.components();
        // Grid lags are evaluated up front so the sampler sees plain numbers.
        let lags = (0..a.n)
            .map(|d| model.acf(&[d as f64 * a.delta]).map(|v| v.iter().map(|c| c.re).collect::<Vec<f64>>()))
            .collect::<Result<Vec<_>, _>>()?;
        GpSampler::new(m, a.n, a.delta, |t| {
            let d = (t.abs() / a.delta).round() as usize;
            let block = &lags[d.min(lags.len() - 1)];
            if t >= 0.0 {
                block.clone()
            } else {
                (0..m * m).map(|j| block[(j % m) * m + j / m]).collect()
            }
        })?
    } else {
        return Err(Failure::usage("give one of --matern, --bivariate or --model"));
    };
    let values = sampler.sample(&mut rng_for(a.seed, 0));
    o.seed = Some(a.seed);
    o.emit(a.out.as_ref(), &series_to_csv(&values, sampler.components(), a.delta))
}

fn fit_options(f: &FitCommon) -> FitOptions {
    FitOptions { grad_tol: f.grad_tol, max_iter: f.max_iter, ..FitOptions::default() }
}

/// Basis for one axis with sample spacing `delta`.
fn axis_basis(k: &KnotArgs, delta: f64, dims: usize) -> CmdResult<AcfBasis> {
    let kv = match &k.knots {
        Some(knots) => KnotVector::new(knots.clone(), k.degree)?,
        None if dims == 1 => KnotVector::offset_log(0.0, 0.5 / delta, k.n_knots + 2, k.knot_offset, k.degree)?,
        None => {
            let nyq = 0.5 / delta;
            let h = 2.0 * nyq / (k.n_knots + 1) as f64;
            KnotVector::uniform(-nyq - k.degree as f64 * h, h, k.n_knots + 2 + 2 * k.degree, k.degree)?
        }
    };
    Ok(AcfBasis::new(kv))
}

fn report_metadata(kind: &str, data: &Path, report: &FitReport) -> ModelMetadata {
    let mut extra = BTreeMap::new();
    extra.insert("objective".into(), serde_json::json!(report.objective));
    extra.insert("converged".into(), serde_json::json!(report.converged));
    extra.insert("iterations".into(), serde_json::json!(report.iterations));
    extra.insert("grad_norm".into(), serde_json::json!(report.grad_norm));
    extra.insert("diagnostics".into(), serde_json::to_value(&report.diagnostics).unwrap_or_default());
    ModelMetadata {
        created_unix: Some(unix_now()),
        provenance: Some(format!("{kind} fit of {}", data.display())),
        seed: None,
        extra,
    }
}

fn warn_unconverged(report: &FitReport) {
    if !report.converged {
        eprintln!(
            "warning: optimizer stopped after {} iterations without meeting the gradient tolerance (|grad| = {:e})",
            report.iterations, report.grad_norm
        );
    }
}

fn fit_whittle_cmd(a: &FitWhittleArgs, o: &mut Outcome) -> CmdResult<()> {
    let f = &a.fit;
    if !(1..=2).contains(&f.dims) {
        return Err(Failure::usage("--dims must be 1 or 2"));
    }
    let series = read_series(&f.data, f.dims, o)?;
    if a.component >= series.components() {
        return Err(Error::IndexOutOfRange { index: a.component, count: series.components() }.into());
    }
    let y = series.component(a.component);
    let axes = series.delta.iter().map(|&d| axis_basis(&f.knots, d, f.dims)).collect::<CmdResult<Vec<_>>>()?;
    let pg = if f.dims == 1 {
        Periodogram::from_series(&y, series.delta[0], f.demean)?
    } else {
        Periodogram::from_grid(&y, &series.shape, &series.delta, f.demean)?
    };
    let opts = FitOptions { alias: !a.no_alias, ..fit_options(f) };
    let basis = SpectralBasis::new(axes.clone(), true)?;
    let shape = basis.shape();
    let report = fit_whittle(&pg, basis, None, &opts)?;
    warn_unconverged(&report);
    let model = if f.dims == 1 {
        ModelSpec::uni(&axes[0], report.coeffs.clone(), true)
    } else {
        ModelSpec::Tensor {
            degree: Degrees::Shared(f.knots.degree),
            knots: axes.iter().map(|b| b.knots().knots().to_vec()).collect(),
            coeffs: TensorCoeffsJson { shape, values: Some(report.coeffs.clone()), entries: None },
            real_process: true,
        }
    };
    let file = ModelFile { model, metadata: Some(report_metadata("whittle", &f.data, &report)) };
    o.emit(f.out.as_ref(), &(file.to_json()? + "\n"))
}

fn fit_mle_cmd(a: &FitMleArgs, o: &mut Outcome) -> CmdResult<()> {
    let f = &a.fit;
    if f.dims != 1 {
        return Err(Failure::usage("exact likelihood fits need a one-dimensional series (--dims 1)"));
    }
    let series = read_series(&f.data, 1, o)?;
    let delta = series.delta[0];
    let basis = axis_basis(&f.knots, delta, 1)?;
    let m = series.components();
    let mut y = series.values.clone();
    if f.demean {
        for r in 0..m {
            let n = y.len() / m;
            let mean = y.iter().skip(r).step_by(m).sum::<f64>() / n as f64;
            y.iter_mut().skip(r).step_by(m).for_each(|v| *v -= mean);
        }
    }
    let opts = fit_options(f);
    let (model, report) = if m == 1 {
        let report = fit_mle_univariate(&y, delta, &basis, None, &opts)?;
        (ModelSpec::uni(&basis, report.coeffs.clone(), true), report)
    } else {
        let fit = fit_mle_multivariate(&y, m, delta, &basis, None, &opts)?;
        (ModelSpec::multi_real(&basis, &fit.coeffs, true), fit.report)
    };
    warn_unconverged(&report);
    let file = ModelFile { model, metadata: Some(report_metadata("maximum-likelihood", &f.data, &report)) };
    o.emit(f.out.as_ref(), &(file.to_json()? + "\n"))
}

fn eval(a: &EvalArgs, what: ExportKind, o: &mut Outcome) -> CmdResult<()> {
    let model = read_model(&a.model, o)?.model.build()?;
    let csv = match (&a.at, a.grid.is_empty()) {
        (Some(points), _) => {
            if model.dim() != 1 {
                return Err(Failure::usage(format!(
                    "point lists are for one-dimensional models; use --grid once per axis for dimension {}",
                    model.dim()
                )));
            }
            let pts: Vec<Vec<f64>> = points.iter().map(|&x| vec![x]).collect();
            export_points(&model, &pts, what)?
        }
        (None, false) => {
            let grid = a.grid.iter().map(|g| parse_grid(g)).collect::<CmdResult<Vec<_>>>()?;
            if grid.len() != model.dim() {
                return Err(Failure::usage(format!(
                    "the model has dimension {} but {} grid axes were given",
                    model.dim(),
                    grid.len()
                )));
            }
            export_grid(&model, &grid, what, a.max_points)?
        }
        (None, true) => return Err(Failure::usage("give evaluation points with --at/--tau/--omega or --grid")),
    };
    o.emit(a.out.as_ref(), &csv)
}

fn periodogram(a: &PeriodogramArgs, o: &mut Outcome) -> CmdResult<()> {
    let series = read_series(&a.data, a.dims, o)?;
    if a.component >= series.components() {
        return Err(Error::IndexOutOfRange { index: a.component, count: series.components() }.into());
    }
    let y = series.component(a.component);
    let pg = Periodogram::from_grid(&y, &series.shape, &series.delta, a.demean)?;
    let d = pg.dim();
    let mut csv = String::new();
    for ax in 0..d {
        csv.push_str(&if d == 1 { "omega,".to_string() } else { format!("omega{},", ax + 1) });
    }
    csv.push_str("value\n");
    for (p, v) in pg.values().iter().enumerate() {
        for w in pg.omega(p) {
            csv.push_str(&fmt_f64(w));
            csv.push(',');
        }
        csv.push_str(&fmt_f64(*v));
        csv.push('\n');
    }
    o.emit(a.out.as_ref(), &csv)
}

fn read_config<T: serde::de::DeserializeOwned + Default>(path: Option<&PathBuf>, o: &mut Outcome) -> CmdResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            o.input(p)?;
            let text = std::fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))
        }
    }
}

fn bench1(a: &BenchTable1Args, o: &mut Outcome) -> CmdResult<()> {
    let mut cfg: Table1Config = read_config(a.config.as_ref(), o)?;
    if let Some(v) = &a.ell {
        cfg.length_scales = v.clone();
    }
    if let Some(v) = &a.k {
        cfg.degrees = v.clone();
    }
    if let Some(v) = &a.knots {
        cfg.n_knots = v.clone();
    }
    cfg.reps = a.reps.unwrap_or(cfg.reps);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.n = a.n.unwrap_or(cfg.n);
    o.seed = Some(cfg.seed);
    let rows = run_table1_benchmark(&cfg)?;
    o.emit(a.out.as_ref(), &rows_to_csv(&rows))
}

fn bench2(a: &BenchTable2Args, o: &mut Outcome) -> CmdResult<()> {
    let mut cfg: Table2Config = read_config(a.config.as_ref(), o)?;
    if let Some(v) = &a.lambda {
        cfg.lambdas = v.clone();
    }
    if let Some(v) = &a.k {
        cfg.degrees = v.clone();
    }
    cfg.n_knots = a.knots.unwrap_or(cfg.n_knots);
    cfg.reps = a.reps.unwrap_or(cfg.reps);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.n = a.n.unwrap_or(cfg.n);
    if a.no_parametric {
        cfg.parametric = false;
    }
    o.seed = Some(cfg.seed);
    let rows = run_table2_benchmark(&cfg)?;
    o.emit(a.out.as_ref(), &rows_to_csv(&rows))
}

fn jackson(a: &JacksonArgs, o: &mut Outcome) -> CmdResult<()> {
    if a.levels < 2 || !(a.h0 > 0.0) {
        return Err(Failure::usage("need --levels ≥ 2 and a positive --h0"));
    }
    let spacings: Vec<f64> = (0..a.levels).map(|j| a.h0 / 2f64.powi(j as i32)).collect();
    let mut csv = String::from("degree,h,l1_error,slope\n");
    for &k in &a.k {
        let rep = jackson_rate_study(bump_psd, a.lo, a.hi, k, &spacings)?;
        eprintln!("k = {k}: log-log slope of error against h {:.3} (expected {})", rep.slope, k + 1);
        for (h, e) in rep.spacings.iter().zip(&rep.errors) {
            csv.push_str(&format!("{k},{},{},{}\n", fmt_f64(*h), fmt_f64(*e), fmt_f64(rep.slope)));
        }
    }
    o.emit(a.out.as_ref(), &csv)
}

fn separability(a: &SeparabilityArgs, o: &mut Outcome) -> CmdResult<()> {
    let model = read_model(&a.model, o)?.model.build()?;
    if !matches!(model, Model::Tensor(_)) || model.dim() != 2 {
        return Err(Failure::usage("separability needs a two-dimensional tensor model"));
    }
    let grid = a.grid.iter().map(|g| parse_grid(g)).collect::<CmdResult<Vec<_>>>()?;
    if grid.len() != 2 {
        return Err(Failure::usage(format!("separability needs two grid axes, got {}", grid.len())));
    }
    let csv = export_grid(&model, &grid, ExportKind::SeparabilityDiff, a.max_points)?;
    o.emit(a.out.as_ref(), &csv)
}
