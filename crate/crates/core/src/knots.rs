//! Spectral knot vectors and B-spline bases.
//!
//! A [`KnotVector`] of length `m + k + 1` spans `m` B-splines of degree `k`
//! on the frequency axis. Supports are half-open, `[κ_i, κ_{i+k+1})`, except
//! that the right end of the knot span is closed so the design matrix covers
//! the whole band.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative spacing below which two knots count as coincident.
pub const COINCIDENT_KNOT_TOL: f64 = 1e-12;

/// Strictly increasing knot sequence with its spline degree.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector<T = f64> {
    knots: Vec<T>,
    degree: usize,
}

/// JSON form `{"degree": k, "knots": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVectorJson {
    pub degree: usize,
    pub knots: Vec<f64>,
}

impl<T: Real> KnotVector<T> {
    /// Validates and wraps a knot sequence.
    pub fn new(knots: Vec<T>, degree: usize) -> Result<Self> {
        if knots.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("knot vector contains a non-finite value".into()));
        }
        if knots.len() < degree + 2 {
            return Err(Error::InvalidKnots(format!(
                "degree {degree} needs at least {} knots, got {}",
                degree + 2,
                knots.len()
            )));
        }
        let span = knots[knots.len() - 1] - knots[0];
        let min_gap = T::lit(COINCIDENT_KNOT_TOL) * span.abs();
        for (j, w) in knots.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidKnots(format!(
                    "knots must be strictly increasing (κ_{j} = {}, κ_{} = {})",
                    w[0],
                    j + 1,
                    w[1]
                )));
            }
            if w[1] - w[0] <= min_gap {
                return Err(Error::InvalidKnots(format!(
                    "knots {j} and {} are coincident within tolerance",
                    j + 1
                )));
            }
        }
        Ok(Self { knots, degree })
    }

    /// Knots equally spaced in `log(ω + b)` on `[lo, hi]`, with `n` knots
    /// (endpoints included). For `degree > 0` the sequence is extended by
    /// `degree` knots past each end, mirroring the adjacent spacings.
    pub fn offset_log(lo: T, hi: T, n: usize, offset: T, degree: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && offset.is_finite()) {
            return Err(Error::NonFinite("offset-log knot parameters".into()));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "offset-log knots need at least 2 points, got {n}"
            )));
        }
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if !(offset > T::zero()) || !(lo + offset > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "offset must be positive with lo + b > 0 (b = {offset})"
            )));
        }
        let u0 = (lo + offset).ln();
        let u1 = (hi + offset).ln();
        let steps = T::from_usize_lossy(n - 1);
        let mut core: Vec<T> = (0..n)
            .map(|j| (u0 + (u1 - u0) * T::from_usize_lossy(j) / steps).exp() - offset)
            .collect();
        core[0] = lo;
        core[n - 1] = hi;
        Self::new(extend_mirrored(&core, degree), degree)
    }

    /// Uniform knots `start + j·h`, `j = 0..count`.
    pub fn uniform(start: T, spacing: T, count: usize, degree: usize) -> Result<Self> {
        if !(spacing > T::zero()) {
            return Err(Error::InvalidArgument("uniform spacing must be positive".into()));
        }
        Self::new(
            (0..count)
                .map(|j| start + spacing * T::from_usize_lossy(j))
                .collect(),
            degree,
        )
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions `m`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn first(&self) -> T {
        self.knots[0]
    }

    pub fn last(&self) -> T {
        self.knots[self.knots.len() - 1]
    }

    pub fn h_max(&self) -> T {
        self.knots
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn h_min(&self) -> T {
        self.knots
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::infinity(), |a, b| a.min(b))
    }

    pub fn mesh_ratio(&self) -> T {
        self.h_max() / self.h_min()
    }

    /// Common spacing when the knots are uniform to `rel_tol`.
    pub fn uniform_spacing(&self, rel_tol: T) -> Result<T> {
        let n = self.knots.len() - 1;
        let h = (self.last() - self.first()) / T::from_usize_lossy(n);
        let spread = self
            .knots
            .windows(2)
            .map(|w| ((w[1] - w[0]) - h).abs() / h)
            .fold(T::zero(), |a, b| a.max(b));
        if spread <= rel_tol {
            Ok(h)
        } else {
            Err(Error::NonUniformKnots { spread: spread.to_f64_lossy() })
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        let count = self.num_basis();
        if i >= count {
            Err(Error::IndexOutOfRange { index: i, count })
        } else {
            Ok(())
        }
    }

    /// Support `[κ_i, κ_{i+k+1}]` of basis `i`.
    pub fn support(&self, i: usize) -> Result<(T, T)> {
        self.check_index(i)?;
        Ok((self.knots[i], self.knots[i + self.degree + 1]))
    }

    /// Local knots `κ_i..=κ_{i+k+1}` of basis `i`.
    pub fn local_knots(&self, i: usize) -> Result<&[T]> {
        self.check_index(i)?;
        Ok(&self.knots[i..i + self.degree + 2])
    }

    /// Index `μ` of the knot interval `[κ_μ, κ_{μ+1})` containing `ω`, with
    /// the right end of the span folded into the last interval.
    fn interval(&self, omega: T) -> Option<usize> {
        let n = self.knots.len();
        if !(omega >= self.knots[0]) || omega > self.knots[n - 1] {
            return None;
        }
        if omega == self.knots[n - 1] {
            return Some(n - 2);
        }
        // First knot strictly greater than omega.
        let upper = self.knots.partition_point(|&x| x <= omega);
        Some(upper - 1)
    }

    /// Cox–de Boor value `B_{i,k}(ω)`.
    pub fn eval(&self, i: usize, omega: T) -> Result<T> {
        self.check_index(i)?;
        Ok(match self.local_values(omega) {
            Some((start, vals)) if i >= start && i < start + vals.len() => vals[i - start],
            _ => T::zero(),
        })
    }

    /// Nonzero basis values at `ω`: `(first index, values)`. At most `k + 1`
    /// entries; `None` outside the knot span.
    pub fn local_values(&self, omega: T) -> Option<(usize, Vec<T>)> {
        let mu = self.interval(omega)?;
        let k = self.degree;
        let t = &self.knots;
        let last_knot = t.len() - 1;
        // vals[q] holds B_{lo+q, d} for q in 0..=k, lo = mu - k (may be negative).
        let lo = mu as isize - k as isize;
        let mut vals = vec![T::zero(); k + 1];
        vals[k] = T::one();
        for d in 1..=k {
            for q in 0..=k {
                let j = lo + q as isize;
                if j < 0 || (j as usize) + d + 1 > last_knot {
                    vals[q] = T::zero();
                    continue;
                }
                let j = j as usize;
                let mut v = T::zero();
                let left = vals[q];
                if left != T::zero() {
                    v = v + (omega - t[j]) / (t[j + d] - t[j]) * left;
                }
                if q < k {
                    let right = vals[q + 1];
                    if right != T::zero() {
                        v = v + (t[j + d + 1] - omega) / (t[j + d + 1] - t[j + 1]) * right;
                    }
                }
                vals[q] = v;
            }
        }
        let m = self.num_basis() as isize;
        let first = lo.max(0);
        let end = (mu as isize + 1).min(m);
        if first >= end {
            return Some((0, Vec::new()));
        }
        let out = vals[(first - lo) as usize..(end - lo) as usize].to_vec();
        Some((first as usize, out))
    }

    /// Dense evaluation of every basis function at `ω`.
    pub fn eval_all(&self, omega: T) -> Vec<T> {
        let mut row = vec![T::zero(); self.num_basis()];
        if let Some((start, vals)) = self.local_values(omega) {
            row[start..start + vals.len()].copy_from_slice(&vals);
        }
        row
    }

    /// Basis values over a frequency grid.
    pub fn design_matrix(&self, grid: &[T]) -> Result<DesignMatrix<T>> {
        if grid.is_empty() {
            return Err(Error::InvalidArgument("design matrix needs a non-empty grid".into()));
        }
        if grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("design-matrix grid".into()));
        }
        let rows = grid
            .iter()
            .map(|&w| match self.local_values(w) {
                Some((start, values)) => SparseRow { start, values },
                None => SparseRow { start: 0, values: Vec::new() },
            })
            .collect();
        Ok(DesignMatrix { ncols: self.num_basis(), rows })
    }

    /// Greville abscissae `k⁻¹ Σ_{j=i+1}^{i+k} κ_j` (midpoints for `k = 0`).
    pub fn greville_sites(&self) -> Vec<T> {
        let k = self.degree;
        (0..self.num_basis())
            .map(|i| {
                if k == 0 {
                    (self.knots[i] + self.knots[i + 1]) / T::lit(2.0)
                } else {
                    self.knots[i + 1..=i + k]
                        .iter()
                        .fold(T::zero(), |a, &b| a + b)
                        / T::from_usize_lossy(k)
                }
            })
            .collect()
    }

    /// Shifted truncated-power coefficients of basis `i`.
    pub fn truncated_power(&self, i: usize) -> Result<TruncatedPowerRep<T>> {
        let local = self.local_knots(i)?.to_vec();
        let alphas = truncated_power_alphas(&local);
        Ok(TruncatedPowerRep { index: i, knots: local, alphas })
    }

    /// Spline coefficients approximating `f`.
    ///
    /// Degrees 0 and 1 sample `f` at the Greville sites (midpoints for k = 0).
    /// Higher degrees use a local-interpolation quasi-interpolant: each
    /// coefficient comes from interpolating `f` at `k + 1` points of one knot
    /// interval inside the basis support, so polynomials of degree ≤ k are
    /// reproduced on `[κ_k, κ_m]`.
    pub fn quasi_interpolant<F: Fn(T) -> T>(&self, f: F) -> Result<Vec<T>> {
        let k = self.degree;
        let m = self.num_basis();
        let sample = |x: T| -> Result<T> {
            let v = f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("quasi-interpolant target at ω = {x}")))
            }
        };
        if k <= 1 {
            return self.greville_sites().into_iter().map(sample).collect();
        }
        if m < k + 1 {
            return Err(Error::InvalidKnots(format!(
                "local quasi-interpolant of degree {k} needs at least {} basis functions",
                k + 1
            )));
        }
        let mut coeffs = Vec::with_capacity(m);
        for i in 0..m {
            let mu = (i + (k + 1) / 2).clamp(k, m - 1);
            let (a, b) = (self.knots[mu], self.knots[mu + 1]);
            let first = mu - k;
            let n = k + 1;
            let mut mat = vec![T::zero(); n * n];
            let mut rhs = vec![T::zero(); n];
            for p in 0..n {
                let x = a + (b - a) * (T::from_usize_lossy(p) + T::lit(0.5)) / T::from_usize_lossy(n);
                rhs[p] = sample(x)?;
                let (start, vals) = self
                    .local_values(x)
                    .expect("interpolation point lies inside the span");
                for (q, v) in vals.iter().enumerate() {
                    let col = start + q;
                    if col >= first && col < first + n {
                        mat[p * n + (col - first)] = *v;
                    }
                }
            }
            let sol = solve_dense(&mut mat, &mut rhs, n).ok_or_else(|| {
                Error::InvalidKnots("singular local interpolation system".into())
            })?;
            coeffs.push(sol[i - first]);
        }
        Ok(coeffs)
    }

    /// Same knots in another scalar type.
    pub fn cast<U: Real>(&self) -> KnotVector<U> {
        KnotVector {
            knots: self.knots.iter().map(|x| U::lit(x.to_f64_lossy())).collect(),
            degree: self.degree,
        }
    }

    pub fn to_json(&self) -> KnotVectorJson {
        KnotVectorJson {
            degree: self.degree,
            knots: self.knots.iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }
}

impl KnotVector<f64> {
    pub fn from_json(json: &KnotVectorJson) -> Result<Self> {
        Self::new(json.knots.clone(), json.degree)
    }
}

/// Extends a core knot list by `extra` knots on each side, mirroring the
/// spacings adjacent to each end (reusing the outermost available spacing
/// when the core is too short).
pub fn extend_mirrored<T: Real>(core: &[T], extra: usize) -> Vec<T> {
    let n = core.len();
    let gaps: Vec<T> = core.windows(2).map(|w| w[1] - w[0]).collect();
    let mut left = Vec::with_capacity(extra);
    let mut x = core[0];
    for j in 0..extra {
        x = x - gaps[j.min(gaps.len() - 1)];
        left.push(x);
    }
    left.reverse();
    let mut out = left;
    out.extend_from_slice(core);
    let mut x = core[n - 1];
    for j in 0..extra {
        x = x + gaps[gaps.len() - 1 - j.min(gaps.len() - 1)];
        out.push(x);
    }
    out
}

/// Coefficients `α_j` with `B(ω) = Σ_j α_j (ω − κ_j)^k_+` for the B-spline on
/// the local knots `κ_0 < … < κ_{k+1}`.
pub fn truncated_power_alphas<T: Real>(local: &[T]) -> Vec<T> {
    let k = local.len() - 2;
    let t = local;
    match k {
        0 => vec![T::one(), -T::one()],
        1 => {
            let a0 = T::one() / (t[1] - t[0]);
            let a1 = -((t[1] - t[0]) / (t[2] - t[1]) + T::one()) * a0;
            vec![a0, a1, -a0 - a1]
        }
        2 => {
            let a0 = T::one() / ((t[1] - t[0]) * (t[2] - t[0]));
            let a1 = -(t[3] - t[0]) / ((t[1] - t[0]) * (t[2] - t[1]) * (t[3] - t[1]));
            let a2 = (t[3] - t[0]) / ((t[2] - t[0]) * (t[2] - t[1]) * (t[3] - t[2]));
            vec![a0, a1, a2, -(a0 + a1 + a2)]
        }
        _ => {
            // Weights of the divided difference [κ_0..κ_{k+1}] in product
            // form, scaled by the support width.
            let width = t[k + 1] - t[0];
            (0..=k + 1)
                .map(|j| {
                    let denom = (0..=k + 1)
                        .filter(|&l| l != j)
                        .fold(T::one(), |acc, l| acc * (t[l] - t[j]));
                    width / denom
                })
                .collect()
        }
    }
}

/// A B-spline written as shifted truncated powers.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedPowerRep<T = f64> {
    /// Basis index `i`.
    pub index: usize,
    /// Local knots `κ_i..=κ_{i+k+1}`; the last one is the cutoff.
    pub knots: Vec<T>,
    /// `α_j` for `j = i..=i+k+1`.
    pub alphas: Vec<T>,
}

impl<T: Real> TruncatedPowerRep<T> {
    pub fn degree(&self) -> usize {
        self.knots.len() - 2
    }

    pub fn cutoff(&self) -> T {
        self.knots[self.knots.len() - 1]
    }

    /// `Σ_{j ≤ i+k} α_j (ω − κ_j)^k_+ · 1{ω < κ_{i+k+1}}`.
    pub fn eval(&self, omega: T) -> T {
        if !(omega < self.cutoff()) {
            return T::zero();
        }
        let k = self.degree();
        self.knots[..=k]
            .iter()
            .zip(&self.alphas)
            .filter(|(&kj, _)| omega >= kj)
            .fold(T::zero(), |acc, (&kj, &a)| acc + a * (omega - kj).powi(k as i32))
    }

    /// Full sum over all `k + 2` terms, no indicator.
    pub fn eval_untruncated(&self, omega: T) -> T {
        let k = self.degree();
        self.knots
            .iter()
            .zip(&self.alphas)
            .filter(|(&kj, _)| omega >= kj)
            .fold(T::zero(), |acc, (&kj, &a)| acc + a * (omega - kj).powi(k as i32))
    }

    pub fn alpha_sum(&self) -> T {
        self.alphas.iter().fold(T::zero(), |a, &b| a + b)
    }
}

/// One design-matrix row: nonzero values starting at column `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow<T = f64> {
    pub start: usize,
    pub values: Vec<T>,
}

/// Row-sparse design matrix with at most `k + 1` nonzeros per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T = f64> {
    pub ncols: usize,
    pub rows: Vec<SparseRow<T>>,
}

impl<T: Real> DesignMatrix<T> {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, l: usize, i: usize) -> T {
        let row = &self.rows[l];
        if i >= row.start && i < row.start + row.values.len() {
            row.values[i - row.start]
        } else {
            T::zero()
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.nrows())
            .map(|l| (0..self.ncols).map(|i| self.get(l, i)).collect())
            .collect()
    }
}

/// Gaussian elimination with partial pivoting on a row-major `n × n` system.
pub(crate) fn solve_dense<T: Real>(a: &mut [T], b: &mut [T], n: usize) -> Option<Vec<T>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| {
            a[r * n + col]
                .abs()
                .partial_cmp(&a[s * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv * n + col] == T::zero() {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            b.swap(piv, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != T::zero() {
                for c in col..n {
                    a[r * n + c] = a[r * n + c] - f * a[col * n + c];
                }
                b[r] = b[r] - f * b[col];
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s = (r + 1..n).fold(b[r], |acc, c| acc - a[r * n + c] * x[c]);
        x[r] = s / a[r * n + r];
    }
    Some(x)
}
