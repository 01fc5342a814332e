use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adaptive::{rank_report, RankReport};
use crate::error::{Error, Result};
use crate::knots::{extend_mirrored, KnotVector};
use crate::transform::AcfBasis;

const GEOM_TOL: f64 = 1e-12;

/// `{"degree", "vertices": [[x, y], ..], "edges": [[a, b], ..], "anchors"?: [[x, y], ..]}`.
/// Anchors default to the vertex list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TMeshJson {
    pub degree: usize,
    pub vertices: Vec<[f64; 2]>,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    /// Fixed coordinate (y for horizontal, x for vertical).
    at: f64,
    lo: f64,
    hi: f64,
}

/// Two-dimensional axis-aligned T-mesh with anchors.
#[derive(Debug, Clone)]
pub struct TMesh {
    degree: usize,
    vertices: Vec<[f64; 2]>,
    horizontal: Vec<Segment>,
    vertical: Vec<Segment>,
    anchors: Vec<[f64; 2]>,
}

/// One T-mesh basis function `B[𝒦¹](ω_1) B[𝒦²](ω_2)` on its knot cross.
#[derive(Debug, Clone)]
pub struct TMeshBasisFunction {
    pub anchor: [f64; 2],
    pub x: AcfBasis,
    pub y: AcfBasis,
}

impl TMeshBasisFunction {
    pub fn eval(&self, omega: [f64; 2]) -> f64 {
        self.x.knots().eval(0, omega[0]).expect("single basis")
            * self.y.knots().eval(0, omega[1]).expect("single basis")
    }

    pub fn rho(&self, tau: [f64; 2]) -> Result<Complex64> {
        Ok(self.x.rho_eval(0, tau[0])? * self.y.rho_eval(0, tau[1])?)
    }

    pub fn mass(&self) -> f64 {
        self.x.mass(0).expect("single basis") * self.y.mass(0).expect("single basis")
    }
}

fn crosses(a: &Segment, b: &Segment) -> bool {
    // a horizontal, b vertical: proper crossing means the intersection point
    // is interior to both segments.
    b.at > a.lo + GEOM_TOL && b.at < a.hi - GEOM_TOL && a.at > b.lo + GEOM_TOL && a.at < b.hi - GEOM_TOL
}

fn overlaps(a: &Segment, b: &Segment) -> bool {
    (a.at - b.at).abs() <= GEOM_TOL && a.lo.max(b.lo) < a.hi.min(b.hi) - GEOM_TOL
}

impl TMesh {
    pub fn new(degree: usize, vertices: Vec<[f64; 2]>, edges: Vec<[usize; 2]>, anchors: Option<Vec<[f64; 2]>>) -> Result<Self> {
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("T-mesh vertex".into()));
        }
        let mut horizontal = Vec::new();
        let mut vertical = Vec::new();
        for (e, &[a, b]) in edges.iter().enumerate() {
            let n = vertices.len();
            if a >= n || b >= n {
                return Err(Error::IndexOutOfRange { index: a.max(b), count: n });
            }
            let (p, q) = (vertices[a], vertices[b]);
            if (p[1] - q[1]).abs() <= GEOM_TOL && (p[0] - q[0]).abs() > GEOM_TOL {
                horizontal.push(Segment { at: p[1], lo: p[0].min(q[0]), hi: p[0].max(q[0]) });
            } else if (p[0] - q[0]).abs() <= GEOM_TOL && (p[1] - q[1]).abs() > GEOM_TOL {
                vertical.push(Segment { at: p[0], lo: p[1].min(q[1]), hi: p[1].max(q[1]) });
            } else {
                return Err(Error::InvalidArgument(format!("edge {e} is not axis-aligned or has zero length")));
            }
        }
        for h in &horizontal {
            for v in &vertical {
                if crosses(h, v) {
                    return Err(Error::InvalidArgument(format!(
                        "edges cross at ({}, {}); split them at a vertex",
                        v.at, h.at
                    )));
                }
            }
        }
        for group in [&horizontal, &vertical] {
            for (i, a) in group.iter().enumerate() {
                if group[i + 1..].iter().any(|b| overlaps(a, b)) {
                    return Err(Error::InvalidArgument("collinear edges overlap".into()));
                }
            }
        }
        let anchors = anchors.unwrap_or_else(|| vertices.clone());
        if anchors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("T-mesh anchor".into()));
        }
        Ok(Self { degree, vertices, horizontal, vertical, anchors })
    }

    pub fn from_json(json: &TMeshJson) -> Result<Self> {
        Self::new(json.degree, json.vertices.clone(), json.edges.clone(), json.anchors.clone())
    }

    /// Full tensor grid over the given coordinates (every grid line complete).
    pub fn grid(degree: usize, xs: &[f64], ys: &[f64]) -> Result<Self> {
        let nx = xs.len();
        let mut vertices = Vec::new();
        for &y in ys {
            for &x in xs {
                vertices.push([x, y]);
            }
        }
        let mut edges = Vec::new();
        for j in 0..ys.len() {
            for i in 0..nx {
                if i + 1 < nx {
                    edges.push([j * nx + i, j * nx + i + 1]);
                }
                if j + 1 < ys.len() {
                    edges.push([j * nx + i, (j + 1) * nx + i]);
                }
            }
        }
        Self::new(degree, vertices, edges, None)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn anchors(&self) -> &[[f64; 2]] {
        &self.anchors
    }

    /// Coordinates where mesh lines perpendicular to `axis` meet the line
    /// through `anchor` parallel to `axis`.
    fn line_hits(&self, anchor: [f64; 2], axis: usize) -> Vec<f64> {
        let (segs, along) = if axis == 0 { (&self.vertical, anchor[1]) } else { (&self.horizontal, anchor[0]) };
        let mut hits: Vec<f64> = segs
            .iter()
            .filter(|s| along >= s.lo - GEOM_TOL && along <= s.hi + GEOM_TOL)
            .map(|s| s.at)
            .collect();
        hits.push(anchor[axis]);
        hits.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        hits.dedup_by(|a, b| (*a - *b).abs() <= GEOM_TOL);
        hits
    }

    fn window(&self, anchor: [f64; 2], axis: usize) -> Result<Vec<f64>> {
        let k = self.degree;
        let hits = self.line_hits(anchor, axis);
        if hits.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "mesh too small: no mesh line meets the anchor ({}, {}) along axis {axis}",
                anchor[0], anchor[1]
            )));
        }
        let i = hits
            .iter()
            .position(|&h| (h - anchor[axis]).abs() <= GEOM_TOL)
            .expect("anchor coordinate inserted");
        let left = k.div_ceil(2);
        let right = k / 2 + 1;
        let pad = left.max(right);
        let ext = extend_mirrored(&hits, pad);
        let centre = i + pad;
        Ok(ext[centre - left..=centre + right].to_vec())
    }

    /// Local knot vectors `(𝒦¹, 𝒦²)` of `k + 2` knots each for an anchor.
    pub fn local_knot_vectors(&self, anchor: [f64; 2]) -> Result<(KnotVector, KnotVector)> {
        let kx = KnotVector::new(self.window(anchor, 0)?, self.degree)?;
        let ky = KnotVector::new(self.window(anchor, 1)?, self.degree)?;
        Ok((kx, ky))
    }

    /// One basis function per anchor, in anchor order.
    pub fn basis_functions(&self) -> Result<Vec<TMeshBasisFunction>> {
        self.anchors
            .iter()
            .map(|&a| {
                let (kx, ky) = self.local_knot_vectors(a)?;
                Ok(TMeshBasisFunction { anchor: a, x: AcfBasis::new(kx), y: AcfBasis::new(ky) })
            })
            .collect()
    }

    /// Numerical rank of the basis evaluated on `grid`.
    pub fn basis_diagnostics(&self, grid: &[[f64; 2]]) -> Result<RankReport> {
        let fns = self.basis_functions()?;
        let mat = DMatrix::from_fn(grid.len(), fns.len(), |r, c| fns[c].eval(grid[r]));
        Ok(rank_report(&mat))
    }

    pub fn to_json(&self) -> TMeshJson {
        let mut edges = Vec::new();
        let find = |p: [f64; 2]| {
            self.vertices
                .iter()
                .position(|v| (v[0] - p[0]).abs() <= GEOM_TOL && (v[1] - p[1]).abs() <= GEOM_TOL)
                .expect("edge endpoints are vertices")
        };
        for s in &self.horizontal {
            edges.push([find([s.lo, s.at]), find([s.hi, s.at])]);
        }
        for s in &self.vertical {
            edges.push([find([s.at, s.lo]), find([s.at, s.hi])]);
        }
        TMeshJson {
            degree: self.degree,
            vertices: self.vertices.clone(),
            edges,
            anchors: Some(self.anchors.clone()),
        }
    }
}

/// T-mesh spline PSD `Σ_a c_a B_a(𝛚)` with nonnegative coefficients.
#[derive(Debug, Clone)]
pub struct TMeshModel {
    functions: Vec<TMeshBasisFunction>,
    coeffs: Vec<f64>,
    real_process: bool,
}

impl TMeshModel {
    pub fn new(mesh: &TMesh, coeffs: Vec<f64>, real_process: bool) -> Result<Self> {
        let functions = mesh.basis_functions()?;
        if coeffs.len() != functions.len() {
            return Err(Error::DimensionMismatch { expected: functions.len(), found: coeffs.len() });
        }
        if coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidModel("T-mesh coefficients must be finite and nonnegative".into()));
        }
        Ok(Self { functions, coeffs, real_process })
    }

    pub fn functions(&self) -> &[TMeshBasisFunction] {
        &self.functions
    }

    pub fn psd_eval(&self, omega: [f64; 2]) -> f64 {
        let one = |w: [f64; 2]| self.functions.iter().zip(&self.coeffs).map(|(f, c)| c * f.eval(w)).sum::<f64>();
        if self.real_process {
            0.5 * (one(omega) + one([-omega[0], -omega[1]]))
        } else {
            one(omega)
        }
    }

    pub fn acf_eval(&self, tau: [f64; 2]) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (f, &c) in self.functions.iter().zip(&self.coeffs) {
            if c != 0.0 {
                acc += f.rho(tau)? * c;
            }
        }
        if self.real_process {
            acc.im = 0.0;
        }
        Ok(acc)
    }

    pub fn variance(&self) -> f64 {
        self.functions.iter().zip(&self.coeffs).map(|(f, c)| c * f.mass()).sum()
    }
}

impl crate::models::StationaryKernel for TMeshModel {
    fn components(&self) -> usize {
        1
    }
    fn lag_dim(&self) -> usize {
        2
    }
    fn acf_block(&self, lag: &[f64]) -> Result<DMatrix<Complex64>> {
        if lag.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: lag.len() });
        }
        Ok(DMatrix::from_element(1, 1, self.acf_eval([lag[0], lag[1]])?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Right-panel mesh: full rows y ∈ {0, 2, 3}, a half row y = 1 on [0, 1];
    /// full columns x ∈ {0, 1, 3}, a half column x = 2 on [2, 3].
    pub(crate) fn fig2_mesh(k: usize) -> TMesh {
        let v = vec![
            [0.0, 0.0], [1.0, 0.0], [3.0, 0.0],
            [0.0, 1.0], [1.0, 1.0],
            [0.0, 2.0], [1.0, 2.0], [2.0, 2.0], [3.0, 2.0],
            [0.0, 3.0], [1.0, 3.0], [2.0, 3.0], [3.0, 3.0],
        ];
        let e = vec![
            [0, 1], [1, 2], [3, 4], [5, 6], [6, 7], [7, 8], [9, 10], [10, 11], [11, 12],
            [0, 3], [3, 5], [5, 9], [1, 4], [4, 6], [6, 10], [7, 11], [2, 8], [8, 12],
        ];
        TMesh::new(k, v, e, None).unwrap()
    }

    #[test]
    fn fig2_knot_cross() {
        let mesh = fig2_mesh(1);
        let (kx, ky) = mesh.local_knot_vectors([1.0, 1.0]).unwrap();
        assert_eq!(kx.knots(), &[0.0, 1.0, 3.0]);
        assert_eq!(ky.knots(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn anchor_next_to_t_junction_skips_line() {
        let mesh = fig2_mesh(1);
        // Along y = 1 the half column x = 2 is absent.
        let (kx, _) = mesh.local_knot_vectors([0.0, 1.0]).unwrap();
        assert_eq!(kx.knots(), &[-1.0, 0.0, 1.0]);
        // Along x = 3 the half row y = 1 is absent.
        let (_, ky) = mesh.local_knot_vectors([3.0, 2.0]).unwrap();
        assert_eq!(ky.knots(), &[0.0, 2.0, 3.0]);
        // The half column x = 2 is seen along y = 2.
        let (kx, _) = mesh.local_knot_vectors([1.0, 2.0]).unwrap();
        assert_eq!(kx.knots(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn grid_reduces_to_tensor_windows() {
        let xs = [0.0, 0.5, 1.0, 2.0, 2.5, 4.0];
        let mesh = TMesh::grid(2, &xs, &xs).unwrap();
        let (kx, ky) = mesh.local_knot_vectors([1.0, 2.0]).unwrap();
        // k = 2: indices i−1 ..= i+2 around the anchor.
        assert_eq!(kx.knots(), &[0.5, 1.0, 2.0, 2.5]);
        assert_eq!(ky.knots(), &[1.0, 2.0, 2.5, 4.0]);
    }

    #[test]
    fn rejects_bad_geometry() {
        let v = vec![[0.0, 0.0], [1.0, 1.0]];
        assert!(TMesh::new(1, v, vec![[0, 1]], None).is_err());
        let v = vec![[0.0, 1.0], [2.0, 1.0], [1.0, 0.0], [1.0, 2.0]];
        assert!(TMesh::new(1, v, vec![[0, 1], [2, 3]], None).is_err());
        let lonely = TMesh::new(1, vec![[0.0, 0.0], [1.0, 0.0]], vec![[0, 1]], None).unwrap();
        assert!(lonely.local_knot_vectors([0.0, 0.0]).is_err());
    }

    #[test]
    fn rank_diagnostics() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let grid: Vec<[f64; 2]> = (0..31).flat_map(|a| (0..31).map(move |b| [a as f64 * 0.1, b as f64 * 0.1])).collect();
        let mesh = TMesh::grid(1, &xs, &xs).unwrap();
        let r = mesh.basis_diagnostics(&grid).unwrap();
        assert_eq!(r.rank, 16);
        assert!(!r.rank_deficient);
        let mut anchors = mesh.anchors().to_vec();
        anchors.push(anchors[5]);
        let dup = TMesh::new(1, mesh.vertices().to_vec(), mesh.to_json().edges, Some(anchors)).unwrap();
        let r = dup.basis_diagnostics(&grid).unwrap();
        assert!(r.rank_deficient);
        assert_eq!(r.rank, 16);
    }

    #[test]
    fn fig2_rank_fixture() {
        let grid: Vec<[f64; 2]> = (0..31).flat_map(|a| (0..31).map(move |b| [a as f64 * 0.1, b as f64 * 0.1])).collect();
        let r = fig2_mesh(1).basis_diagnostics(&grid).unwrap();
        assert_eq!(r.basis_count, 13);
        assert_eq!(r.rank, FIG2_RANK);
    }

    const FIG2_RANK: usize = 13;

    #[test]
    fn model_acf_mass_and_symmetry() {
        let mesh = fig2_mesh(1);
        let c: Vec<f64> = (0..13).map(|j| 0.1 * (j % 4) as f64 + 0.05).collect();
        let m = TMeshModel::new(&mesh, c, true).unwrap();
        assert!((m.acf_eval([0.0, 0.0]).unwrap().re - m.variance()).abs() < 1e-14);
        assert_eq!(m.acf_eval([1.2, -0.4]).unwrap(), m.acf_eval([-1.2, 0.4]).unwrap());
    }
}
