use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "splinekernel", version, about = "Spline kernels for stationary Gaussian processes")]
pub struct Cli {
    /// Worker threads for parallel work (benchmarks); 0 picks the number of CPUs.
    #[arg(long, global = true, env = "SPLINEKERNEL_THREADS")]
    pub threads: Option<usize>,

    /// Where to write the run manifest. Defaults to `<out>.manifest.json`,
    /// or `<command>.manifest.json` in the working directory when there is
    /// no output file.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Draw a stationary Gaussian series by circulant embedding.
    Simulate(SimulateArgs),
    /// Fit a spline PSD by minimizing the Whittle likelihood.
    FitWhittle(FitWhittleArgs),
    /// Fit a spline PSD by exact Gaussian maximum likelihood.
    FitMle(FitMleArgs),
    /// Evaluate a model's autocovariance.
    EvalAcf(EvalArgs),
    /// Evaluate a model's spectral density.
    EvalPsd(EvalArgs),
    /// Periodogram of a series.
    Periodogram(PeriodogramArgs),
    /// Univariate Matérn benchmark (spline and empirical ACF estimators).
    BenchTable1(BenchTable1Args),
    /// Bivariate Matérn benchmark.
    BenchTable2(BenchTable2Args),
    /// Quasi-interpolation convergence rates under knot refinement.
    Jackson(JacksonArgs),
    /// Difference between a tensor model's ACF and its separable surrogate.
    Separability(SeparabilityArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::FitWhittle(_) => "fit-whittle",
            Command::FitMle(_) => "fit-mle",
            Command::EvalAcf(_) => "eval-acf",
            Command::EvalPsd(_) => "eval-psd",
            Command::Periodogram(_) => "periodogram",
            Command::BenchTable1(_) => "bench-table1",
            Command::BenchTable2(_) => "bench-table2",
            Command::Jackson(_) => "jackson",
            Command::Separability(_) => "separability",
        }
    }

    /// Primary output file, if the command writes one.
    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            Command::Simulate(a) => a.out.as_ref(),
            Command::FitWhittle(a) => a.fit.out.as_ref(),
            Command::FitMle(a) => a.fit.out.as_ref(),
            Command::EvalAcf(a) | Command::EvalPsd(a) => a.out.as_ref(),
            Command::Periodogram(a) => a.out.as_ref(),
            Command::BenchTable1(a) => a.out.as_ref(),
            Command::BenchTable2(a) => a.out.as_ref(),
            Command::Jackson(a) => a.out.as_ref(),
            Command::Separability(a) => a.out.as_ref(),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Univariate Matérn kernel, e.g. `nu=1.5,ell=2,var=1`.
    #[arg(long, conflicts_with_all = ["bivariate", "model"])]
    pub matern: Option<String>,
    /// Bivariate Matérn kernel, e.g.
    /// `sigma1=1,sigma2=1,ell=2,nu11=2,nu22=1,nu12=1.5,rho=0.5`.
    #[arg(long, conflicts_with = "model")]
    pub bivariate: Option<String>,
    /// One-dimensional spline model (JSON).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Number of time points.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Knot layout shared by the fit commands.
#[derive(Debug, Args, Serialize)]
pub struct KnotArgs {
    /// Spline degree.
    #[arg(long, short = 'k', default_value_t = 1)]
    pub degree: usize,
    /// Explicit knot vector (comma separated, already extended by the degree).
    #[arg(long, value_delimiter = ',', conflicts_with = "n_knots")]
    pub knots: Option<Vec<f64>>,
    /// Number of interior knots of an offset-log layout on `[0, 1/(2Δ)]`
    /// (one dimension) or uniform knots on `[−1/(2Δ), 1/(2Δ)]` (two dimensions).
    #[arg(long, default_value_t = 4)]
    pub n_knots: usize,
    /// Offset of the offset-log layout.
    #[arg(long, default_value_t = 0.01)]
    pub knot_offset: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FitCommon {
    /// Series CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of coordinate columns in the CSV.
    #[arg(long, default_value_t = 1)]
    pub dims: usize,
    #[command(flatten)]
    pub knots: KnotArgs,
    /// Subtract the sample mean first.
    #[arg(long)]
    pub demean: bool,
    #[arg(long, default_value_t = 1e-8)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Output model JSON; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitWhittleArgs {
    #[command(flatten)]
    pub fit: FitCommon,
    /// Value column to fit (0-based).
    #[arg(long, default_value_t = 0)]
    pub component: usize,
    /// Do not fold aliased frequencies into the model spectrum.
    #[arg(long)]
    pub no_alias: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct FitMleArgs {
    #[command(flatten)]
    pub fit: FitCommon,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated points (one-dimensional models).
    #[arg(long, alias = "tau", alias = "omega", value_delimiter = ',', allow_negative_numbers = true)]
    pub at: Option<Vec<f64>>,
    /// Grid per axis as `start:stop:count`; repeat once per dimension.
    #[arg(long, conflicts_with = "at", allow_hyphen_values = true)]
    pub grid: Vec<String>,
    /// Maximum number of grid points.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_points: usize,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PeriodogramArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub dims: usize,
    #[arg(long, default_value_t = 0)]
    pub component: usize,
    #[arg(long)]
    pub demean: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchTable1Args {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub ell: Option<Vec<f64>>,
    #[arg(long, short = 'k', value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Interior knot counts.
    #[arg(long, value_delimiter = ',')]
    pub knots: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchTable2Args {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, short = 'k', value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Interior knot count.
    #[arg(long)]
    pub knots: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Skip the parametric Matérn fit.
    #[arg(long)]
    pub no_parametric: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct JacksonArgs {
    #[arg(long, short = 'k', value_delimiter = ',', default_value = "0,1,2")]
    pub k: Vec<usize>,
    /// Coarsest knot spacing.
    #[arg(long, default_value_t = 0.05)]
    pub h0: f64,
    /// Number of spacings (each half the previous).
    #[arg(long, default_value_t = 6)]
    pub levels: usize,
    /// Interval of the L¹ norm.
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.5)]
    pub hi: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SeparabilityArgs {
    /// Two-dimensional tensor model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Grid per axis as `start:stop:count`; give it twice.
    #[arg(long, num_args = 1, required = true, allow_hyphen_values = true)]
    pub grid: Vec<String>,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_points: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
