//! Model files, series CSVs, grid exports, run manifests and atomic writes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adaptive::{HierarchicalBasis, HierarchicalJson, HierarchicalModel, TMesh, TMeshJson, TMeshModel};
use crate::error::{Error, Result};
use crate::knots::KnotVector;
use crate::models::{separable_surrogate, MatrixSplinePsdModel, PhaseDelay, SplinePsdModel, TensorCoeffs, TensorPsdModel};
use crate::transform::AcfBasis;

/// Relative tolerance on the spacing of series coordinates.
pub const SPACING_TOL: f64 = 1e-9;
/// Default cap on the number of points in an exported grid.
pub const DEFAULT_GRID_CAP: usize = 1_000_000;

/// Writes `bytes` to a sibling temporary file, syncs it, then renames it
/// over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?
        .to_string_lossy()
        .into_owned();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Formats a double with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

// ---- model files -----------------------------------------------------------

/// Spline degree shared by all axes, or one per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Degrees {
    Shared(usize),
    PerAxis(Vec<usize>),
}

impl Degrees {
    fn for_axis(&self, axis: usize, count: usize) -> Result<usize> {
        match self {
            Degrees::Shared(k) => Ok(*k),
            Degrees::PerAxis(v) if v.len() == count => Ok(v[axis]),
            Degrees::PerAxis(v) => Err(Error::DimensionMismatch { expected: count, found: v.len() }),
        }
    }
}

/// Tensor coefficients: dense row-major values, or sparse `[index, value]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCoeffsJson {
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<(Vec<usize>, f64)>>,
}

/// Model description, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Uni {
        degree: usize,
        knots: Vec<f64>,
        coeffs: Vec<f64>,
        real_process: bool,
    },
    /// Coefficient matrices as `coeffs[i][r][s] = [re, im]`.
    Multi {
        degree: usize,
        knots: Vec<f64>,
        coeffs: Vec<Vec<Vec<[f64; 2]>>>,
        real_process: bool,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        phase_delays: Vec<PhaseDelay>,
    },
    Tensor {
        degree: Degrees,
        knots: Vec<Vec<f64>>,
        coeffs: TensorCoeffsJson,
        real_process: bool,
    },
    Hierarchical {
        basis: HierarchicalJson,
        coeffs: Vec<f64>,
        real_process: bool,
    },
    Tmesh {
        mesh: TMeshJson,
        coeffs: Vec<f64>,
        real_process: bool,
    },
}

/// Provenance stored next to a model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<ModelMetadata>,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.model.build()?;
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// A model ready for evaluation.
#[derive(Debug, Clone)]
pub enum Model {
    Uni(SplinePsdModel),
    Multi(MatrixSplinePsdModel),
    Tensor(TensorPsdModel),
    Hierarchical(HierarchicalModel),
    Tmesh(TMeshModel),
}

impl Model {
    /// Number of lag coordinates.
    pub fn dim(&self) -> usize {
        match self {
            Model::Uni(_) | Model::Multi(_) => 1,
            Model::Tensor(t) => t.dim(),
            Model::Hierarchical(h) => h.basis().dim(),
            Model::Tmesh(_) => 2,
        }
    }

    /// Number of process components.
    pub fn components(&self) -> usize {
        match self {
            Model::Multi(m) => m.dim(),
            _ => 1,
        }
    }

    /// ACF at a lag vector, as a row-major `M×M` block.
    pub fn acf(&self, tau: &[f64]) -> Result<Vec<Complex64>> {
        if tau.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: tau.len() });
        }
        Ok(match self {
            Model::Uni(m) => vec![m.acf_eval(tau[0])?],
            Model::Multi(m) => {
                let g = m.acf_eval(tau[0])?;
                let d = m.dim();
                (0..d * d).map(|j| g[(j / d, j % d)]).collect()
            }
            Model::Tensor(m) => vec![m.acf_eval(tau)?],
            Model::Hierarchical(m) => vec![m.acf_eval(tau)?],
            Model::Tmesh(m) => vec![m.acf_eval([tau[0], tau[1]])?],
        })
    }

    /// PSD at a frequency vector, as a row-major `M×M` block.
    pub fn psd(&self, omega: &[f64]) -> Result<Vec<Complex64>> {
        if omega.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: omega.len() });
        }
        let re = |v: f64| vec![Complex64::new(v, 0.0)];
        Ok(match self {
            Model::Uni(m) => re(m.psd_eval(omega[0])),
            Model::Multi(m) => {
                let f = m.psd_eval(omega[0]);
                let d = m.dim();
                (0..d * d).map(|j| f[(j / d, j % d)]).collect()
            }
            Model::Tensor(m) => re(m.psd_eval(omega)?),
            Model::Hierarchical(m) => re(m.psd_eval(omega)?),
            Model::Tmesh(m) => re(m.psd_eval([omega[0], omega[1]])),
        })
    }

    /// Whether ACF values are real by construction.
    pub fn real_process(&self) -> bool {
        match self {
            Model::Uni(m) => m.real_process(),
            Model::Multi(m) => m.real_process(),
            Model::Tensor(m) => m.real_process(),
            Model::Hierarchical(m) => m.real_process(),
            Model::Tmesh(_) => false,
        }
    }
}

fn basis(knots: &[f64], degree: usize) -> Result<AcfBasis> {
    Ok(AcfBasis::new(KnotVector::new(knots.to_vec(), degree)?))
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSpec::Uni { degree, knots, coeffs, real_process } => {
                Ok(Model::Uni(SplinePsdModel::new(basis(knots, *degree)?, coeffs.clone(), *real_process)?))
            }
            ModelSpec::Multi { degree, knots, coeffs, real_process, phase_delays } => {
                let mats = coeffs
                    .iter()
                    .map(|rows| {
                        let d = rows.len();
                        if rows.iter().any(|r| r.len() != d) {
                            return Err(Error::InvalidModel("coefficient matrices must be square".into()));
                        }
                        Ok(DMatrix::from_fn(d, d, |r, s| Complex64::new(rows[r][s][0], rows[r][s][1])))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut m = MatrixSplinePsdModel::new(basis(knots, *degree)?, mats, *real_process)?;
                for d in phase_delays {
                    m = m.apply_phase_delay(d.r, d.s, d.t0)?;
                }
                Ok(Model::Multi(m))
            }
            ModelSpec::Tensor { degree, knots, coeffs, real_process } => {
                let axes = knots
                    .iter()
                    .enumerate()
                    .map(|(a, kv)| basis(kv, degree.for_axis(a, knots.len())?))
                    .collect::<Result<Vec<_>>>()?;
                let c = match (&coeffs.values, &coeffs.entries) {
                    (Some(v), None) => TensorCoeffs::Dense { shape: coeffs.shape.clone(), data: v.clone() },
                    (None, Some(e)) => TensorCoeffs::Sparse {
                        shape: coeffs.shape.clone(),
                        entries: e.iter().cloned().collect(),
                    },
                    _ => {
                        return Err(Error::InvalidModel(
                            "tensor coefficients need exactly one of `values` or `entries`".into(),
                        ))
                    }
                };
                Ok(Model::Tensor(TensorPsdModel::new(axes, c, *real_process)?))
            }
            ModelSpec::Hierarchical { basis, coeffs, real_process } => Ok(Model::Hierarchical(HierarchicalModel::new(
                HierarchicalBasis::from_json(basis)?,
                coeffs.clone(),
                *real_process,
            )?)),
            ModelSpec::Tmesh { mesh, coeffs, real_process } => {
                Ok(Model::Tmesh(TMeshModel::new(&TMesh::from_json(mesh)?, coeffs.clone(), *real_process)?))
            }
        }
    }

    /// Univariate spec from a fitted basis and coefficients.
    pub fn uni(basis: &AcfBasis, coeffs: Vec<f64>, real_process: bool) -> Self {
        ModelSpec::Uni { degree: basis.degree(), knots: basis.knots().knots().to_vec(), coeffs, real_process }
    }

    /// Multivariate spec from real coefficient matrices.
    pub fn multi_real(basis: &AcfBasis, coeffs: &[DMatrix<f64>], real_process: bool) -> Self {
        ModelSpec::Multi {
            degree: basis.degree(),
            knots: basis.knots().knots().to_vec(),
            coeffs: coeffs
                .iter()
                .map(|c| (0..c.nrows()).map(|r| (0..c.ncols()).map(|s| [c[(r, s)], 0.0]).collect()).collect())
                .collect(),
            real_process,
            phase_delays: Vec::new(),
        }
    }
}

// ---- series files ----------------------------------------------------------

/// A series read from CSV: coordinates on a regular grid and `M` values per point.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesData {
    pub coord_names: Vec<String>,
    pub value_names: Vec<String>,
    /// Grid size per axis.
    pub shape: Vec<usize>,
    /// Spacing per axis.
    pub delta: Vec<f64>,
    /// Origin per axis.
    pub origin: Vec<f64>,
    /// Point-major values (row-major over the grid, `M` per point).
    pub values: Vec<f64>,
}

impl SeriesData {
    pub fn components(&self) -> usize {
        self.value_names.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One component as a flat row-major array.
    pub fn component(&self, r: usize) -> Vec<f64> {
        let m = self.components();
        self.values.iter().skip(r).step_by(m).copied().collect()
    }
}

fn parse_field(s: &str, row: usize, col: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("row {row}, column `{col}`: `{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("row {row}, column `{col}`: non-finite value")));
    }
    Ok(v)
}

fn axis_grid(values: &[f64], name: &str) -> Result<(f64, f64, usize)> {
    let mut u: Vec<f64> = values.to_vec();
    u.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    u.dedup();
    if u.len() < 2 {
        return Err(Error::Parse(format!("coordinate `{name}` needs at least two distinct values")));
    }
    let h = (u[u.len() - 1] - u[0]) / (u.len() - 1) as f64;
    for (j, w) in u.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > SPACING_TOL * h {
            return Err(Error::Parse(format!(
                "coordinate `{name}` is not uniformly spaced (gap {} after index {j}, expected {h})",
                w[1] - w[0]
            )));
        }
    }
    Ok((u[0], h, u.len()))
}

/// Parses a series CSV with a header whose first `dims` columns are
/// coordinates and whose remaining columns are process components. Rows must
/// cover the full regular grid in row-major order (last axis fastest).
pub fn parse_series_csv(text: &str, dims: usize) -> Result<SeriesData> {
    if dims == 0 {
        return Err(Error::InvalidArgument("series need at least one coordinate column".into()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() <= dims {
        return Err(Error::Parse(format!(
            "header needs {dims} coordinate column(s) and at least one value column, found {} column(s)",
            header.len()
        )));
    }
    let mut coords: Vec<Vec<f64>> = vec![Vec::new(); dims];
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let row = i + 2;
        if rec.len() != header.len() {
            return Err(Error::Parse(format!("row {row} has {} fields, expected {}", rec.len(), header.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            if field.is_empty() {
                return Err(Error::Parse(format!("row {row}, column `{}`: missing value", header[j])));
            }
            let v = parse_field(field, row, &header[j])?;
            if j < dims {
                coords[j].push(v);
            } else {
                values.push(v);
            }
        }
    }
    if coords[0].is_empty() {
        return Err(Error::Parse("series file has no data rows".into()));
    }
    let mut shape = Vec::with_capacity(dims);
    let mut delta = Vec::with_capacity(dims);
    let mut origin = Vec::with_capacity(dims);
    for (a, c) in coords.iter().enumerate() {
        let (o, h, n) = axis_grid(c, &header[a])?;
        origin.push(o);
        delta.push(h);
        shape.push(n);
    }
    let total: usize = shape.iter().product();
    if total != coords[0].len() {
        return Err(Error::Parse(format!(
            "rows do not form a complete grid: {} rows for a {:?} grid",
            coords[0].len(),
            shape
        )));
    }
    for p in 0..total {
        let mut rem = p;
        for a in (0..dims).rev() {
            let idx = rem % shape[a];
            rem /= shape[a];
            let expect = origin[a] + idx as f64 * delta[a];
            if (coords[a][p] - expect).abs() > SPACING_TOL * delta[a] * (1.0 + idx as f64) {
                return Err(Error::Parse(format!(
                    "row {} is out of grid order on `{}` (found {}, expected {expect})",
                    p + 2,
                    header[a],
                    coords[a][p]
                )));
            }
        }
    }
    Ok(SeriesData {
        coord_names: header[..dims].to_vec(),
        value_names: header[dims..].to_vec(),
        shape,
        delta,
        origin,
        values,
    })
}

pub fn read_series_csv(path: &Path, dims: usize) -> Result<SeriesData> {
    parse_series_csv(&fs::read_to_string(path)?, dims)
}

/// Renders an equispaced univariate or multivariate series (time-major).
pub fn series_to_csv(values: &[f64], m: usize, delta: f64) -> String {
    let mut s = String::from("t");
    for r in 0..m {
        s.push_str(&format!(",y{}", r + 1));
    }
    s.push('\n');
    for (t, chunk) in values.chunks(m).enumerate() {
        s.push_str(&fmt_f64(t as f64 * delta));
        for v in chunk {
            s.push(',');
            s.push_str(&fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

// ---- grid exports ----------------------------------------------------------

/// Quantity exported on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportKind {
    Psd,
    Acf,
    SeparabilityDiff,
}

/// Evenly spaced points `start..=stop` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AxisGrid {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|j| self.start + (self.stop - self.start) * j as f64 / (n - 1) as f64).collect(),
        }
    }
}

/// Long-format CSV of `what` over the product grid: coordinate columns, then
/// component indices for matrix models, then real and imaginary parts.
pub fn export_grid(model: &Model, grid: &[AxisGrid], what: ExportKind, cap: usize) -> Result<String> {
    let d = model.dim();
    if grid.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: grid.len() });
    }
    if grid.iter().any(|g| !(g.start.is_finite() && g.stop.is_finite())) {
        return Err(Error::NonFinite("grid bounds".into()));
    }
    let total = grid.iter().map(|g| g.count).try_fold(1usize, |a, n| a.checked_mul(n)).unwrap_or(usize::MAX);
    if total > cap {
        return Err(Error::InvalidArgument(format!("grid has {total} points, above the cap of {cap}")));
    }
    let axes: Vec<Vec<f64>> = grid.iter().map(AxisGrid::points).collect();
    if what == ExportKind::SeparabilityDiff {
        let Model::Tensor(t) = model else {
            return Err(Error::InvalidArgument("separability differences need a tensor model".into()));
        };
        if d != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: d });
        }
        let sur = separable_surrogate(t)?;
        let mut out = header(model, "tau");
        for p in sur.difference_field(&axes[0], &axes[1])? {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(p.tau1),
                fmt_f64(p.tau2),
                fmt_f64(p.value.re),
                fmt_f64(p.value.im)
            ));
        }
        return Ok(out);
    }
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        points.push(idx.iter().enumerate().map(|(a, &i)| axes[a][i]).collect());
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
    export_points(model, &points, what)
}

fn header(model: &Model, coord: &str) -> String {
    let d = model.dim();
    let mut out = String::new();
    for a in 0..d {
        out.push_str(&if d == 1 { coord.to_string() } else { format!("{coord}{}", a + 1) });
        out.push(',');
    }
    if model.components() > 1 {
        out.push_str("r,s,");
    }
    out.push_str("re,im\n");
    out
}

/// Same long format as [`export_grid`] at an explicit list of points.
pub fn export_points(model: &Model, points: &[Vec<f64>], what: ExportKind) -> Result<String> {
    let d = model.dim();
    let m = model.components();
    let mut out = header(model, if what == ExportKind::Psd { "omega" } else { "tau" });
    for x in points {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x.len() });
        }
        let vals = match what {
            ExportKind::Psd => model.psd(x)?,
            ExportKind::Acf => model.acf(x)?,
            ExportKind::SeparabilityDiff => {
                return Err(Error::InvalidArgument("separability differences are only defined on grids".into()))
            }
        };
        for (j, v) in vals.iter().enumerate() {
            for xa in x {
                out.push_str(&fmt_f64(*xa));
                out.push(',');
            }
            if m > 1 {
                out.push_str(&format!("{},{},", j / m, j % m));
            }
            out.push_str(&format!("{},{}\n", fmt_f64(v.re), fmt_f64(v.im)));
        }
    }
    Ok(out)
}

// ---- run manifests ---------------------------------------------------------

/// Identity of an input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub bytes: u64,
    /// FNV-1a 64-bit digest, hex.
    pub fnv1a64: String,
}

impl InputRecord {
    pub fn from_path(path: &Path) -> Result<Self> {
        let data = fs::read(path)?;
        Ok(Self { path: path.display().to_string(), bytes: data.len() as u64, fnv1a64: format!("{:016x}", fnv1a64(&data)) })
    }
}

fn fnv1a64(data: &[u8]) -> u64 {
    data.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Effective settings after defaults were applied.
    pub settings: serde_json::Value,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }
}

/// Seconds since the Unix epoch.
pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"{"kind":"uni","degree":1,"knots":[-0.125,0,0.125,0.25,0.5,0.5625],"coeffs":[0.1,0.3,1,2],"real_process":false}"#;

    #[test]
    fn model_round_trip_is_fixpoint() {
        let f = ModelFile::parse(FIG1).unwrap();
        let a = f.to_json().unwrap();
        let b = ModelFile::parse(&a).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let g = ModelFile::parse(&a).unwrap();
        assert_eq!(f, g);
        let tricky = r#"{"kind":"uni","degree":0,"knots":[0,0.1,0.30000000000000004],"coeffs":[1e-300,0.7],"real_process":true}"#;
        let t = ModelFile::parse(tricky).unwrap();
        assert_eq!(ModelFile::parse(&t.to_json().unwrap()).unwrap(), t);
    }

    #[test]
    fn malformed_models_rejected() {
        assert!(matches!(ModelFile::parse("{"), Err(Error::Parse(_))));
        let neg = FIG1.replace("0.1,0.3", "-0.1,0.3");
        assert!(matches!(ModelFile::parse(&neg), Err(Error::InvalidModel(_))));
        let short = FIG1.replace("[0.1,0.3,1,2]", "[0.1,0.3,1]");
        assert!(matches!(ModelFile::parse(&short), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn multi_and_tensor_specs() {
        let multi = r#"{"kind":"multi","degree":0,"knots":[0,0.5],"coeffs":[[[[2,0],[0.5,0.5]],[[0.5,-0.5],[1,0]]]],
            "real_process":false,"phase_delays":[{"r":0,"s":1,"t0":0.25}],"metadata":{"seed":3}}"#;
        let f = ModelFile::parse(multi).unwrap();
        let m = f.model.build().unwrap();
        assert_eq!(m.components(), 2);
        assert_eq!(m.acf(&[0.0]).unwrap()[0], Complex64::new(1.0, 0.0));
        assert_eq!(ModelFile::parse(&f.to_json().unwrap()).unwrap(), f);
        let tensor = r#"{"kind":"tensor","degree":[0,1],"knots":[[0,0.5],[0,0.25,0.5]],"coeffs":{"shape":[1,1],"values":[3]},"real_process":true}"#;
        let t = ModelFile::parse(tensor).unwrap().model.build().unwrap();
        assert_eq!(t.dim(), 2);
        assert!((t.acf(&[0.0, 0.0]).unwrap()[0].re - 3.0 * 0.5 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn series_parsing() {
        let s = parse_series_csv("t,y\n0,1\n0.5,2\n1.0,3\n", 1).unwrap();
        assert_eq!(s.shape, vec![3]);
        assert_eq!(s.delta, vec![0.5]);
        assert_eq!(s.values, vec![1.0, 2.0, 3.0]);
        assert!(parse_series_csv("t,y\n0,1\n0.5,2\n1.1,3\n", 1).is_err());
        assert!(parse_series_csv("t,y\n0,1\n0.5,\n1.0,3\n", 1).is_err());
        assert!(parse_series_csv("t,y\n0,1\n0.5,x\n1.0,3\n", 1).is_err());
        let g = parse_series_csv("x,y,v\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n2,0,5\n2,1,6\n", 2).unwrap();
        assert_eq!(g.shape, vec![3, 2]);
        assert!(parse_series_csv("x,y,v\n0,0,1\n1,0,3\n0,1,2\n1,1,4\n", 2).is_err());
        let text = series_to_csv(&[0.25, -1.0, 3.0, 1e-17], 2, 0.1);
        let back = parse_series_csv(&text, 1).unwrap();
        assert_eq!(back.values, vec![0.25, -1.0, 3.0, 1e-17]);
        assert_eq!(back.component(1), vec![-1.0, 1e-17]);
    }

    #[test]
    fn exports() {
        let m = ModelFile::parse(FIG1).unwrap().model.build().unwrap();
        let one = export_grid(&m, &[AxisGrid { start: 0.0, stop: 0.0, count: 1 }], ExportKind::Acf, 10).unwrap();
        assert_eq!(one.lines().count(), 2);
        assert!(export_grid(&m, &[AxisGrid { start: 0.0, stop: 1.0, count: 11 }], ExportKind::Psd, 10).is_err());
        let rank1 = r#"{"kind":"tensor","degree":1,"knots":[[0,0.1,0.3,0.5],[-0.2,0,0.4,0.5]],
            "coeffs":{"shape":[2,2],"values":[0.5,1.0,1.5,3.0]},"real_process":false}"#;
        let t = ModelFile::parse(rank1).unwrap().model.build().unwrap();
        let g = AxisGrid { start: -5.0, stop: 5.0, count: 9 };
        let csv = export_grid(&t, &[g.clone(), g], ExportKind::SeparabilityDiff, 1000).unwrap();
        for line in csv.lines().skip(1) {
            let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert!(f[2].abs() < 1e-10 && f[3].abs() < 1e-10, "{line}");
        }
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("sk-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn fnv_reference() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }
}
