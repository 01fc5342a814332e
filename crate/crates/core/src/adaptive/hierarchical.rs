use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knots::KnotVector;
use crate::transform::AcfBasis;

/// Axis-aligned box `Π_j [lo_j, hi_j]`.
pub type BoxRegion = Vec<(f64, f64)>;

/// A refinement box assigned to a hierarchy level (`level ≥ 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRegion {
    pub level: usize,
    pub region: BoxRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalLevelJson {
    pub level: usize,
    #[serde(rename = "box")]
    pub region: Vec<[f64; 2]>,
}

/// `{"degree", "base_knots": [[..] per axis], "levels": [{"level", "box"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalJson {
    pub degree: usize,
    pub base_knots: Vec<Vec<f64>>,
    #[serde(default)]
    pub levels: Vec<HierarchicalLevelJson>,
}

#[derive(Debug, Clone)]
struct Level {
    axes: Vec<AcfBasis>,
    regions: Vec<BoxRegion>,
    active: Vec<Vec<usize>>,
}

/// Hierarchical B-spline basis over dyadically refined tensor grids with
/// plain (non-truncated) support-based selection: a level-ℓ function is
/// active when its support lies in `Ω_ℓ` but not in `Ω_{ℓ+1}`, where `Ω_0`
/// is the whole domain and `Ω_ℓ` the union of the level-ℓ boxes.
#[derive(Debug, Clone)]
pub struct HierarchicalBasis {
    levels: Vec<Level>,
}

fn midpoint_refine(kv: &KnotVector) -> Result<KnotVector> {
    let t = kv.knots();
    let mut out = Vec::with_capacity(2 * t.len() - 1);
    for w in t.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(t[t.len() - 1]);
    KnotVector::new(out, kv.degree())
}

/// Whether `b` is covered by the union of `boxes`, tested on the cells cut
/// out of `b` by every box face.
fn box_in_union(b: &BoxRegion, boxes: &[BoxRegion]) -> bool {
    if boxes.is_empty() {
        return false;
    }
    let d = b.len();
    let cuts: Vec<Vec<f64>> = (0..d)
        .map(|ax| {
            let (lo, hi) = b[ax];
            let mut c = vec![lo, hi];
            for bx in boxes {
                for v in [bx[ax].0, bx[ax].1] {
                    if v > lo && v < hi {
                        c.push(v);
                    }
                }
            }
            c.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
            c.dedup();
            c
        })
        .collect();
    let counts: Vec<usize> = cuts.iter().map(|c| c.len() - 1).collect();
    let total: usize = counts.iter().product();
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let centre: Vec<f64> = (0..d).map(|ax| 0.5 * (cuts[ax][idx[ax]] + cuts[ax][idx[ax] + 1])).collect();
        let covered = boxes
            .iter()
            .any(|bx| centre.iter().zip(bx).all(|(&x, &(lo, hi))| x >= lo && x <= hi));
        if !covered {
            return false;
        }
        for ax in (0..d).rev() {
            idx[ax] += 1;
            if idx[ax] < counts[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    true
}

fn multi_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in shape {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

impl HierarchicalBasis {
    pub fn build(base: Vec<KnotVector>, regions: Vec<LevelRegion>) -> Result<Self> {
        if base.is_empty() {
            return Err(Error::InvalidArgument("hierarchical basis needs at least one axis".into()));
        }
        let d = base.len();
        for r in &regions {
            if r.level == 0 {
                return Err(Error::InvalidArgument("refinement regions start at level 1".into()));
            }
            if r.region.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: r.region.len() });
            }
            if r.region.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
                return Err(Error::InvalidArgument(format!("degenerate refinement box {:?}", r.region)));
            }
        }
        let depth = regions.iter().map(|r| r.level).max().unwrap_or(0);
        let domain: BoxRegion = base.iter().map(|kv| (kv.first(), kv.last())).collect();
        let mut omegas: Vec<Vec<BoxRegion>> = vec![vec![domain]];
        for l in 1..=depth {
            let boxes: Vec<BoxRegion> =
                regions.iter().filter(|r| r.level == l).map(|r| r.region.clone()).collect();
            for b in &boxes {
                if !box_in_union(b, &omegas[l - 1]) {
                    return Err(Error::InvalidArgument(format!(
                        "level-{l} region {b:?} is not nested inside the level-{} regions",
                        l - 1
                    )));
                }
            }
            omegas.push(boxes);
        }
        let mut levels = Vec::with_capacity(depth + 1);
        let mut knots = base;
        for l in 0..=depth {
            if l > 0 {
                knots = knots.iter().map(midpoint_refine).collect::<Result<_>>()?;
            }
            let axes: Vec<AcfBasis> = knots.iter().cloned().map(AcfBasis::new).collect();
            let shape: Vec<usize> = axes.iter().map(AcfBasis::num_basis).collect();
            let finer: &[BoxRegion] = omegas.get(l + 1).map(Vec::as_slice).unwrap_or(&[]);
            let active = multi_indices(&shape)
                .into_iter()
                .filter(|idx| {
                    let supp: BoxRegion = idx
                        .iter()
                        .zip(&axes)
                        .map(|(&i, a)| a.knots().support(i).expect("in range"))
                        .collect();
                    box_in_union(&supp, &omegas[l]) && !box_in_union(&supp, finer)
                })
                .collect();
            levels.push(Level { axes, regions: omegas[l].clone(), active });
        }
        Ok(Self { levels })
    }

    pub fn from_json(json: &HierarchicalJson) -> Result<Self> {
        let base = json
            .base_knots
            .iter()
            .map(|k| KnotVector::new(k.clone(), json.degree))
            .collect::<Result<_>>()?;
        let regions = json
            .levels
            .iter()
            .map(|l| LevelRegion { level: l.level, region: l.region.iter().map(|p| (p[0], p[1])).collect() })
            .collect();
        Self::build(base, regions)
    }

    pub fn dim(&self) -> usize {
        self.levels[0].axes.len()
    }

    /// Number of levels `L + 1`.
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Active multi-indices at level `l`, lexicographic.
    pub fn active(&self, l: usize) -> &[Vec<usize>] {
        &self.levels[l].active
    }

    pub fn level_axes(&self, l: usize) -> &[AcfBasis] {
        &self.levels[l].axes
    }

    /// Boxes making up `Ω_l`.
    pub fn level_regions(&self, l: usize) -> &[BoxRegion] {
        &self.levels[l].regions
    }

    pub fn active_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.active.len()).collect()
    }

    pub fn num_active(&self) -> usize {
        self.levels.iter().map(|l| l.active.len()).sum()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim(), found: n })
        }
    }

    /// Every active basis function evaluated at `ω`, in coefficient order.
    pub fn eval_all(&self, omega: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(omega.len())?;
        let mut out = Vec::with_capacity(self.num_active());
        for lvl in &self.levels {
            let rows: Vec<Vec<f64>> = lvl.axes.iter().zip(omega).map(|(a, &w)| a.knots().eval_all(w)).collect();
            for idx in &lvl.active {
                out.push(idx.iter().enumerate().map(|(ax, &i)| rows[ax][i]).product());
            }
        }
        Ok(out)
    }

    /// Every active `ρ_𝐢^{(ℓ)}(𝛕)`, in coefficient order.
    pub fn rho_all(&self, tau: &[f64]) -> Result<Vec<Complex64>> {
        self.check_dim(tau.len())?;
        let mut out = Vec::with_capacity(self.num_active());
        for lvl in &self.levels {
            let rhos: Vec<Vec<Complex64>> =
                lvl.axes.iter().zip(tau).map(|(a, &t)| a.rho_all(t)).collect::<Result<_>>()?;
            for idx in &lvl.active {
                out.push(
                    idx.iter()
                        .enumerate()
                        .fold(Complex64::new(1.0, 0.0), |p, (ax, &i)| p * rhos[ax][i]),
                );
            }
        }
        Ok(out)
    }

    /// Per-function masses `Π_j ∫B`, in coefficient order.
    pub fn masses(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_active());
        for lvl in &self.levels {
            for idx in &lvl.active {
                out.push(idx.iter().enumerate().map(|(ax, &i)| lvl.axes[ax].mass(i).expect("in range")).product());
            }
        }
        out
    }
}

/// Hierarchical spline PSD with nonnegative coefficients.
#[derive(Debug, Clone)]
pub struct HierarchicalModel {
    basis: HierarchicalBasis,
    coeffs: Vec<f64>,
    real_process: bool,
}

impl HierarchicalModel {
    pub fn new(basis: HierarchicalBasis, coeffs: Vec<f64>, real_process: bool) -> Result<Self> {
        if coeffs.len() != basis.num_active() {
            return Err(Error::DimensionMismatch { expected: basis.num_active(), found: coeffs.len() });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("hierarchical coefficient".into()));
        }
        if coeffs.iter().any(|&c| c < 0.0) {
            return Err(Error::InvalidModel("hierarchical coefficients must be nonnegative".into()));
        }
        Ok(Self { basis, coeffs, real_process })
    }

    pub fn basis(&self) -> &HierarchicalBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn real_process(&self) -> bool {
        self.real_process
    }

    pub fn psd_eval(&self, omega: &[f64]) -> Result<f64> {
        let dot = |w: &[f64]| -> Result<f64> {
            Ok(self.basis.eval_all(w)?.iter().zip(&self.coeffs).map(|(b, c)| b * c).sum())
        };
        if self.real_process {
            let neg: Vec<f64> = omega.iter().map(|w| -w).collect();
            Ok(0.5 * (dot(omega)? + dot(&neg)?))
        } else {
            dot(omega)
        }
    }

    /// `γ̂_HB(𝛕) = Σ_ℓ Σ_{𝐢∈𝒜_ℓ} c_𝐢^{(ℓ)} ρ_𝐢^{(ℓ)}(𝛕)`.
    pub fn acf_eval(&self, tau: &[f64]) -> Result<Complex64> {
        let mut acc: Complex64 = self.basis.rho_all(tau)?.iter().zip(&self.coeffs).map(|(r, &c)| r * c).sum();
        if self.real_process {
            acc.im = 0.0;
        }
        Ok(acc)
    }

    pub fn variance(&self) -> f64 {
        self.basis.masses().iter().zip(&self.coeffs).map(|(m, c)| m * c).sum()
    }
}

impl crate::models::StationaryKernel for HierarchicalModel {
    fn components(&self) -> usize {
        1
    }
    fn lag_dim(&self) -> usize {
        self.basis.dim()
    }
    fn acf_block(&self, lag: &[f64]) -> Result<nalgebra::DMatrix<Complex64>> {
        Ok(nalgebra::DMatrix::from_element(1, 1, self.acf_eval(lag)?))
    }
}
