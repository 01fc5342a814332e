//! Exact Gaussian likelihood for equispaced stationary data, where the
//! covariance is (block) Toeplitz.
//!
//! A Levinson-type recursion gives the log-determinant and the first and
//! last (block) columns of `T⁻¹`. The Gohberg–Semencul formula
//!
//! ```text
//! T⁻¹ = L(X) X_0⁻¹ L(X)ᵀ − L(V') V_{N−1}⁻¹ L(V')ᵀ,   V'_0 = 0, V'_i = V_{i−1}
//! ```
//!
//! (`X` the first block column of `T⁻¹`, `V` the last, `L(·)` block lower
//! triangular Toeplitz) then yields `T⁻¹y` and the per-lag diagonal sums of
//! `T⁻¹` in `O(N²)` block products, which is all the gradient with respect to
//! the lag blocks `G_d` needs:
//!
//! ```text
//! ∂NLL/∂G_d = ½(2 − δ_{d0}) [Σ_i (T⁻¹)_{i+d,i} − Σ_i α_{i+d} α_iᵀ],   α = T⁻¹y.
//! ```

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Likelihood value, gradient per lag block (row-major `M × M`, lags
/// `0..N`) and the jitter that was added to `G_0`.
#[derive(Debug, Clone)]
pub struct ToeplitzLikelihood {
    pub value: f64,
    pub grad_blocks: Vec<Vec<f64>>,
    pub jitter: f64,
}

/// Jitter ladder: first try none, then `start·s` doubling up to `max·s`,
/// with `s = trace(G_0)/M`.
#[derive(Debug, Clone, Copy)]
pub struct JitterLadder {
    pub start: f64,
    pub max: f64,
}

impl Default for JitterLadder {
    fn default() -> Self {
        Self { start: 1e-10, max: 1e-6 }
    }
}

impl JitterLadder {
    pub(crate) fn run<T>(&self, scale: f64, mut attempt: impl FnMut(f64) -> std::result::Result<T, f64>) -> Result<(T, f64)> {
        let mut pivot = match attempt(0.0) {
            Ok(v) => return Ok((v, 0.0)),
            Err(p) => p,
        };
        let mut rung = self.start;
        let mut last = 0.0;
        while rung <= self.max * (1.0 + 1e-12) {
            last = rung * scale;
            match attempt(last) {
                Ok(v) => return Ok((v, last)),
                Err(p) => pivot = p,
            }
            rung *= 2.0;
        }
        Err(Error::NotPositiveDefinite { jitter: last, scale, pivot })
    }
}

// ---- scalar path ----------------------------------------------------------

/// Levinson–Durbin factorization of a symmetric Toeplitz matrix with first
/// column `r`.
#[derive(Debug, Clone)]
pub struct ToeplitzFactor {
    /// First column of `T⁻¹`.
    x: Vec<f64>,
    logdet: f64,
}

impl ToeplitzFactor {
    /// `Err(pivot)` when an innovation variance is not positive.
    pub fn new(r: &[f64]) -> std::result::Result<Self, f64> {
        let n = r.len();
        let mut v = r[0];
        if !(v > 0.0) || !v.is_finite() {
            return Err(v);
        }
        let mut logdet = v.ln();
        let mut phi: Vec<f64> = Vec::with_capacity(n);
        let mut tmp = Vec::with_capacity(n);
        for p in 1..n {
            let mut num = r[p];
            for j in 0..p - 1 {
                num -= phi[j] * r[p - 1 - j];
            }
            let kappa = num / v;
            tmp.clear();
            tmp.extend((0..p - 1).map(|j| phi[j] - kappa * phi[p - 2 - j]));
            phi.clear();
            phi.extend_from_slice(&tmp);
            phi.push(kappa);
            v *= 1.0 - kappa * kappa;
            if !(v > 1e-14 * r[0]) || !v.is_finite() {
                return Err(v);
            }
            logdet += v.ln();
        }
        let mut x = Vec::with_capacity(n);
        x.push(1.0 / v);
        x.extend(phi.iter().map(|p| -p / v));
        Ok(Self { x, logdet })
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn first_column(&self) -> &[f64] {
        &self.x
    }

    fn yhat(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.x[self.x.len() - m]
        }
    }

    /// `T⁻¹ y`.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let n = self.x.len();
        let yh: Vec<f64> = (0..n).map(|m| self.yhat(m)).collect();
        let a = lower_toeplitz_mul(&self.x, &lower_toeplitz_tmul(&self.x, y));
        let b = lower_toeplitz_mul(&yh, &lower_toeplitz_tmul(&yh, y));
        a.iter().zip(&b).map(|(p, q)| (p - q) / self.x[0]).collect()
    }

    /// `S(d) = Σ_i (T⁻¹)_{i+d,i}` for `d = 0..n`.
    pub fn diagonal_sums(&self) -> Vec<f64> {
        let n = self.x.len();
        let yh: Vec<f64> = (0..n).map(|m| self.yhat(m)).collect();
        (0..n)
            .map(|d| {
                let mut s = 0.0;
                for q in 0..n - d {
                    s += (n - d - q) as f64 * (self.x[q + d] * self.x[q] - yh[q + d] * yh[q]);
                }
                s / self.x[0]
            })
            .collect()
    }
}

/// `L(c) v` with `L(c)` lower-triangular Toeplitz, first column `c`.
fn lower_toeplitz_mul(c: &[f64], v: &[f64]) -> Vec<f64> {
    (0..v.len()).map(|i| (0..=i).map(|p| c[i - p] * v[p]).sum()).collect()
}

/// `L(c)ᵀ v`.
fn lower_toeplitz_tmul(c: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|p| (p..n).map(|i| c[i - p] * v[i]).sum()).collect()
}

/// `½[log det T + yᵀT⁻¹y + n log 2π]` for a scalar series with
/// autocovariance `r_d = γ(dΔ)`, plus `∂/∂r_d` when `grad` is set.
pub fn toeplitz_nll(r: &[f64], y: &[f64], grad: bool, ladder: &JitterLadder) -> Result<ToeplitzLikelihood> {
    let n = y.len();
    if r.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: r.len() });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty series".into()));
    }
    if r.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Toeplitz likelihood input".into()));
    }
    let scale = r[0].abs();
    let (factor, jitter) = ladder.run(scale, |j| {
        let mut rj = r.to_vec();
        rj[0] += j;
        ToeplitzFactor::new(&rj)
    })?;
    let alpha = factor.solve(y);
    let quad: f64 = alpha.iter().zip(y).map(|(a, b)| a * b).sum();
    let value = 0.5 * (factor.logdet() + quad + n as f64 * (2.0 * std::f64::consts::PI).ln());
    let grad_blocks = if grad {
        let s = factor.diagonal_sums();
        (0..n)
            .map(|d| {
                let cross: f64 = (0..n - d).map(|a| alpha[a + d] * alpha[a]).sum();
                let w = if d == 0 { 0.5 } else { 1.0 };
                vec![w * (s[d] - cross)]
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ToeplitzLikelihood { value, grad_blocks, jitter })
}

// ---- block path -----------------------------------------------------------

/// Small dense row-major `m × m` helpers.
mod blk {
    pub fn mul(a: &[f64], b: &[f64], m: usize, out: &mut [f64]) {
        if m == 2 {
            let (a, b) = (&a[..4], &b[..4]);
            out[0] = a[0] * b[0] + a[1] * b[2];
            out[1] = a[0] * b[1] + a[1] * b[3];
            out[2] = a[2] * b[0] + a[3] * b[2];
            out[3] = a[2] * b[1] + a[3] * b[3];
            return;
        }
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += a[i * m + k] * b[k * m + j];
                }
                out[i * m + j] = s;
            }
        }
    }

    pub fn mul_acc(a: &[f64], b: &[f64], m: usize, out: &mut [f64], sign: f64) {
        if m == 2 {
            let (a, b) = (&a[..4], &b[..4]);
            out[0] += sign * (a[0] * b[0] + a[1] * b[2]);
            out[1] += sign * (a[0] * b[1] + a[1] * b[3]);
            out[2] += sign * (a[2] * b[0] + a[3] * b[2]);
            out[3] += sign * (a[2] * b[1] + a[3] * b[3]);
            return;
        }
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += a[i * m + k] * b[k * m + j];
                }
                out[i * m + j] += sign * s;
            }
        }
    }

    pub fn transpose(a: &[f64], m: usize) -> Vec<f64> {
        let mut t = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                t[j * m + i] = a[i * m + j];
            }
        }
        t
    }

    pub fn matvec_acc(a: &[f64], v: &[f64], m: usize, out: &mut [f64], sign: f64) {
        if m == 2 {
            out[0] += sign * (a[0] * v[0] + a[1] * v[1]);
            out[1] += sign * (a[2] * v[0] + a[3] * v[1]);
            return;
        }
        for i in 0..m {
            let mut s = 0.0;
            for k in 0..m {
                s += a[i * m + k] * v[k];
            }
            out[i] += sign * s;
        }
    }

    pub fn identity(m: usize) -> Vec<f64> {
        let mut e = vec![0.0; m * m];
        for i in 0..m {
            e[i * m + i] = 1.0;
        }
        e
    }
}

/// Log-determinant of a small symmetric positive definite block
/// (symmetrized first) by Cholesky. `Err(pivot)` on failure.
fn spd_logdet(a: &[f64], m: usize, work: &mut [f64]) -> std::result::Result<f64, f64> {
    for i in 0..m {
        for j in 0..m {
            work[i * m + j] = 0.5 * (a[i * m + j] + a[j * m + i]);
        }
    }
    let mut logdet = 0.0;
    for j in 0..m {
        let mut d = work[j * m + j];
        for k in 0..j {
            d -= work[j * m + k] * work[j * m + k];
        }
        if !(d > 0.0) {
            return Err(d);
        }
        let l = d.sqrt();
        work[j * m + j] = l;
        logdet += 2.0 * l.ln();
        for i in j + 1..m {
            let mut v = work[i * m + j];
            for k in 0..j {
                v -= work[i * m + k] * work[j * m + k];
            }
            work[i * m + j] = v / l;
        }
    }
    Ok(logdet)
}

/// Inverse of a small block by Gauss–Jordan with partial pivoting.
fn small_inverse(a: &[f64], m: usize, out: &mut [f64], work: &mut [f64]) -> std::result::Result<(), f64> {
    work[..m * m].copy_from_slice(a);
    out.fill(0.0);
    for i in 0..m {
        out[i * m + i] = 1.0;
    }
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&x, &y| work[x * m + col].abs().total_cmp(&work[y * m + col].abs()))
            .expect("non-empty range");
        let pv = work[piv * m + col];
        if pv == 0.0 || !pv.is_finite() {
            return Err(0.0);
        }
        if piv != col {
            for j in 0..m {
                work.swap(piv * m + j, col * m + j);
                out.swap(piv * m + j, col * m + j);
            }
        }
        for j in 0..m {
            work[col * m + j] /= pv;
            out[col * m + j] /= pv;
        }
        for r in 0..m {
            if r != col {
                let f = work[r * m + col];
                if f != 0.0 {
                    for j in 0..m {
                        work[r * m + j] -= f * work[col * m + j];
                        out[r * m + j] -= f * out[col * m + j];
                    }
                }
            }
        }
    }
    Ok(())
}

/// Zero-padded FFTs of block sequences, used for the block lower-triangular
/// Toeplitz products in the Gohberg–Semencul formula.
struct BlockFft {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl BlockFft {
    fn new(n: usize) -> Self {
        let len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self { len, fwd: planner.plan_fft_forward(len), inv: planner.plan_fft_inverse(len) }
    }

    /// Spectrum of `values[i·stride + offset]` for `i < n`, times `weight(i)`.
    fn forward(&self, values: &[f64], stride: usize, offset: usize, weight: impl Fn(usize) -> f64) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (i, b) in buf.iter_mut().take(values.len() / stride).enumerate() {
            b.re = weight(i) * values[i * stride + offset];
        }
        self.fwd.process(&mut buf);
        buf
    }

    fn inverse(&self, mut buf: Vec<Complex64>, n: usize) -> Vec<f64> {
        self.inv.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf.iter().take(n).map(|c| c.re * scale).collect()
    }

    /// Spectra of every entry of a flat block sequence, indexed `r·m + c`.
    fn entries(&self, blocks: &[f64], m: usize, weight: impl Fn(usize) -> f64 + Copy) -> Vec<Vec<Complex64>> {
        (0..m * m).map(|e| self.forward(blocks, m * m, e, weight)).collect()
    }

    /// `(L(B) u)_i = Σ_{p≤i} B_{i−p} u_p`.
    fn lower_mul(&self, b_hat: &[Vec<Complex64>], u: &[f64], m: usize) -> Vec<f64> {
        let n = u.len() / m;
        let u_hat: Vec<_> = (0..m).map(|k| self.forward(u, m, k, |_| 1.0)).collect();
        let mut out = vec![0.0; n * m];
        for r in 0..m {
            let mut acc = vec![Complex64::new(0.0, 0.0); self.len];
            for k in 0..m {
                acc.iter_mut().zip(&b_hat[r * m + k]).zip(&u_hat[k]).for_each(|((a, b), x)| *a += b * x);
            }
            for (i, v) in self.inverse(acc, n).into_iter().enumerate() {
                out[i * m + r] = v;
            }
        }
        out
    }

    /// `(L(B)ᵀ y)_p = Σ_{i≥p} B_{i−p}ᵀ y_i`.
    fn lower_tmul(&self, b_hat: &[Vec<Complex64>], y: &[f64], m: usize) -> Vec<f64> {
        let n = y.len() / m;
        let y_hat: Vec<_> = (0..m).map(|k| self.forward(y, m, k, |_| 1.0)).collect();
        let mut out = vec![0.0; n * m];
        for c in 0..m {
            let mut acc = vec![Complex64::new(0.0, 0.0); self.len];
            for k in 0..m {
                acc.iter_mut().zip(&b_hat[k * m + c]).zip(&y_hat[k]).for_each(|((a, b), x)| *a += b.conj() * x);
            }
            for (p, v) in self.inverse(acc, n).into_iter().enumerate() {
                out[p * m + c] = v;
            }
        }
        out
    }
}

/// Block Levinson (Whittle–Wiggins–Robinson) factorization of a symmetric
/// block Toeplitz matrix with lag blocks `G_d`, `G_{−d} = G_dᵀ`.
#[derive(Debug, Clone)]
pub struct BlockToeplitzFactor {
    m: usize,
    n: usize,
    /// First block column of `T⁻¹`, flat time-major blocks.
    x: Vec<f64>,
    /// `V'`: the last block column of `T⁻¹` shifted down by one block.
    vs: Vec<f64>,
    x0_inv: Vec<f64>,
    vn_inv: Vec<f64>,
    logdet: f64,
}

impl BlockToeplitzFactor {
    pub fn new(g: &[Vec<f64>], m: usize) -> std::result::Result<Self, f64> {
        let n = g.len();
        let mm = m * m;
        let gf: Vec<f64> = g.iter().flatten().copied().collect();
        let gtf: Vec<f64> = g.iter().flat_map(|b| blk::transpose(b, m)).collect();
        let mut work = vec![0.0; mm];
        let mut logdet = spd_logdet(&gf[..mm], m, &mut work)?;
        // Forward and backward predictor coefficients; block c of `a` is
        // a[c·mm..(c+1)·mm].
        let mut a = vec![0.0; n * mm];
        let mut b = vec![0.0; n * mm];
        a[..mm].copy_from_slice(&blk::identity(m));
        b[..mm].copy_from_slice(&blk::identity(m));
        let mut a_next = vec![0.0; n * mm];
        let mut b_next = vec![0.0; n * mm];
        let mut e = gf[..mm].to_vec();
        let mut f = gf[..mm].to_vec();
        let mut delta = vec![0.0; mm];
        let mut delta_p = vec![0.0; mm];
        let mut f_inv = vec![0.0; mm];
        let mut e_inv = vec![0.0; mm];
        let mut ka = vec![0.0; mm];
        let mut kb = vec![0.0; mm];
        for p in 0..n - 1 {
            delta.fill(0.0);
            delta_p.fill(0.0);
            for c in 0..=p {
                let gl = (p + 1 - c) * mm;
                let gr = (c + 1) * mm;
                blk::mul_acc(&gf[gl..gl + mm], &a[c * mm..(c + 1) * mm], m, &mut delta, 1.0);
                blk::mul_acc(&gtf[gr..gr + mm], &b[c * mm..(c + 1) * mm], m, &mut delta_p, 1.0);
            }
            small_inverse(&f, m, &mut f_inv, &mut work)?;
            small_inverse(&e, m, &mut e_inv, &mut work)?;
            // K_a = F⁻¹Δ, K_b = E⁻¹Δ'
            blk::mul(&f_inv, &delta, m, &mut ka);
            blk::mul(&e_inv, &delta_p, m, &mut kb);
            // a'_c = a_c − b_{c−1} K_a ; b'_c = b_{c−1} − a_c K_b
            a_next[..(p + 1) * mm].copy_from_slice(&a[..(p + 1) * mm]);
            a_next[(p + 1) * mm..(p + 2) * mm].fill(0.0);
            b_next[..mm].fill(0.0);
            b_next[mm..(p + 2) * mm].copy_from_slice(&b[..(p + 1) * mm]);
            for c in 0..=p + 1 {
                let blk_c = c * mm..(c + 1) * mm;
                if c >= 1 {
                    blk::mul_acc(&b[(c - 1) * mm..c * mm], &ka, m, &mut a_next[blk_c.clone()], -1.0);
                }
                if c <= p {
                    blk::mul_acc(&a[blk_c.clone()], &kb, m, &mut b_next[blk_c], -1.0);
                }
            }
            blk::mul_acc(&delta_p, &ka, m, &mut e, -1.0);
            blk::mul_acc(&delta, &kb, m, &mut f, -1.0);
            logdet += spd_logdet(&f, m, &mut work)?;
            std::mem::swap(&mut a, &mut a_next);
            std::mem::swap(&mut b, &mut b_next);
        }
        small_inverse(&e, m, &mut e_inv, &mut work)?;
        small_inverse(&f, m, &mut f_inv, &mut work)?;
        let mut x = vec![0.0; n * mm];
        let mut vs = vec![0.0; n * mm];
        for c in 0..n {
            blk::mul(&a[c * mm..(c + 1) * mm], &e_inv, m, &mut x[c * mm..(c + 1) * mm]);
            if c + 1 < n {
                blk::mul(&b[c * mm..(c + 1) * mm], &f_inv, m, &mut vs[(c + 1) * mm..(c + 2) * mm]);
            }
        }
        // X_0 = E⁻¹ and V_{N−1} = F⁻¹ (b_{N−1} = I).
        Ok(Self { m, n, x, vs, x0_inv: e, vn_inv: f, logdet })
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// `T⁻¹ y` for a time-major vector `y` (length `N·M`).
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let m = self.m;
        let fft = BlockFft::new(self.n);
        let mut out = vec![0.0; self.n * m];
        for (blocks, piv, sign) in [(&self.x, &self.x0_inv, 1.0), (&self.vs, &self.vn_inv, -1.0)] {
            let hat = fft.entries(blocks, m, |_| 1.0);
            let z = fft.lower_tmul(&hat, y, m);
            let mut u = vec![0.0; z.len()];
            for (zp, up) in z.chunks(m).zip(u.chunks_mut(m)) {
                blk::matvec_acc(piv, zp, m, up, 1.0);
            }
            let w = fft.lower_mul(&hat, &u, m);
            out.iter_mut().zip(&w).for_each(|(o, v)| *o += sign * v);
        }
        out
    }

    /// `Σ_i (T⁻¹)_{i+d,i}` for `d = 0..N`, row-major blocks.
    ///
    /// With `P_q = X_0⁻¹ X_qᵀ` this is `Σ_q (N−d−q) (X_{q+d} P_q − V'_{q+d} Q_q)`
    /// (`Q_q` likewise from `V'`), evaluated as two weighted block
    /// cross-correlations.
    pub fn diagonal_sums(&self) -> Vec<Vec<f64>> {
        let (m, n) = (self.m, self.n);
        let mm = m * m;
        let fft = BlockFft::new(n);
        let zero = Complex64::new(0.0, 0.0);
        let mut plain = vec![vec![zero; fft.len]; mm];
        let mut ramp = vec![vec![zero; fft.len]; mm];
        for (blocks, piv, sign) in [(&self.x, &self.x0_inv, 1.0), (&self.vs, &self.vn_inv, -1.0)] {
            let mut pq = vec![0.0; n * mm];
            for q in 0..n {
                let t = blk::transpose(&blocks[q * mm..(q + 1) * mm], m);
                blk::mul(piv, &t, m, &mut pq[q * mm..(q + 1) * mm]);
            }
            let b_hat = fft.entries(blocks, m, |_| 1.0);
            let p_hat = fft.entries(&pq, m, |_| 1.0);
            let pr_hat = fft.entries(&pq, m, |q| q as f64);
            for r in 0..m {
                for c in 0..m {
                    for k in 0..m {
                        let bh = &b_hat[r * m + k];
                        for (i, acc) in plain[r * m + c].iter_mut().enumerate() {
                            *acc += sign * bh[i] * p_hat[k * m + c][i].conj();
                        }
                        for (i, acc) in ramp[r * m + c].iter_mut().enumerate() {
                            *acc += sign * bh[i] * pr_hat[k * m + c][i].conj();
                        }
                    }
                }
            }
        }
        let plain: Vec<Vec<f64>> = plain.into_iter().map(|v| fft.inverse(v, n)).collect();
        let ramp: Vec<Vec<f64>> = ramp.into_iter().map(|v| fft.inverse(v, n)).collect();
        (0..n)
            .map(|d| (0..mm).map(|e| (n - d) as f64 * plain[e][d] - ramp[e][d]).collect())
            .collect()
    }
}

/// Block version of [`toeplitz_nll`]: `g[d]` is the row-major `M × M`
/// covariance `Cov(y_{t+d}, y_t)`, `y` is time-major. The gradient is taken
/// with respect to each `G_d` as an unconstrained matrix, `G_{−d} = G_dᵀ`
/// tied.
pub fn block_toeplitz_nll(
    g: &[Vec<f64>],
    m: usize,
    y: &[f64],
    grad: bool,
    ladder: &JitterLadder,
) -> Result<ToeplitzLikelihood> {
    if m == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    let n = g.len();
    if n == 0 || y.len() != n * m {
        return Err(Error::DimensionMismatch { expected: n * m, found: y.len() });
    }
    if g.iter().any(|b| b.len() != m * m) {
        return Err(Error::InvalidArgument("lag blocks must be M × M".into()));
    }
    if g.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("block Toeplitz likelihood input".into()));
    }
    if m == 1 {
        let r: Vec<f64> = g.iter().map(|b| b[0]).collect();
        return toeplitz_nll(&r, y, grad, ladder);
    }
    let scale = (0..m).map(|i| g[0][i * m + i]).sum::<f64>().abs() / m as f64;
    let (factor, jitter) = ladder.run(scale, |j| {
        let mut gj = g.to_vec();
        for i in 0..m {
            gj[0][i * m + i] += j;
        }
        BlockToeplitzFactor::new(&gj, m)
    })?;
    let alpha = factor.solve(y);
    let quad: f64 = alpha.iter().zip(y).map(|(a, b)| a * b).sum();
    let value = 0.5 * (factor.logdet() + quad + (n * m) as f64 * (2.0 * std::f64::consts::PI).ln());
    let grad_blocks = if grad {
        let sums = factor.diagonal_sums();
        sums.into_iter()
            .enumerate()
            .map(|(d, mut s)| {
                for i in 0..n - d {
                    let (ad, ai) = (&alpha[(i + d) * m..(i + d + 1) * m], &alpha[i * m..(i + 1) * m]);
                    for r in 0..m {
                        for c in 0..m {
                            s[r * m + c] -= ad[r] * ai[c];
                        }
                    }
                }
                let w = if d == 0 { 0.5 } else { 1.0 };
                s.iter_mut().for_each(|v| *v *= w);
                s
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ToeplitzLikelihood { value, grad_blocks, jitter })
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;

    fn dense_block(g: &[Vec<f64>], m: usize) -> DMatrix<f64> {
        let n = g.len();
        DMatrix::from_fn(n * m, n * m, |r, c| {
            let (i, a) = (r / m, r % m);
            let (j, b) = (c / m, c % m);
            if i >= j {
                g[i - j][a * m + b]
            } else {
                g[j - i][b * m + a]
            }
        })
    }

    fn dense_nll(t: &DMatrix<f64>, y: &[f64]) -> f64 {
        let chol = t.clone().cholesky().unwrap();
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let yv = nalgebra::DVector::from_column_slice(y);
        let a = chol.solve(&yv);
        0.5 * (logdet + yv.dot(&a) + y.len() as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    fn matern32(t: f64) -> f64 {
        let s = 3f64.sqrt() * t.abs() / 2.0;
        (1.0 + s) * (-s).exp()
    }

    fn bivariate_blocks(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|d| {
                let t = d as f64;
                let a = matern32(t);
                let b = (-t / 1.5).exp();
                let c = 0.4 * (-t * t / 8.0).exp() + 0.1 * (-(t - 1.0).powi(2)).exp();
                let c2 = 0.4 * (-t * t / 8.0).exp() + 0.1 * (-(t + 1.0).powi(2)).exp();
                vec![a, c, c2, b]
            })
            .collect()
    }

    #[test]
    fn scalar_matches_dense() {
        let n = 40;
        let r: Vec<f64> = (0..n).map(|d| matern32(d as f64)).collect();
        let y: Vec<f64> = (0..n).map(|t| ((t * 7) as f64).sin()).collect();
        let t = dense_block(&r.iter().map(|&v| vec![v]).collect::<Vec<_>>(), 1);
        let out = toeplitz_nll(&r, &y, false, &JitterLadder::default()).unwrap();
        assert!((out.value - dense_nll(&t, &y)).abs() < 1e-9 * out.value.abs());
        let f = ToeplitzFactor::new(&r).unwrap();
        let inv = t.try_inverse().unwrap();
        let s = f.diagonal_sums();
        for d in [0, 1, 5, 39] {
            let direct: f64 = (0..n - d).map(|i| inv[(i + d, i)]).sum();
            assert!((s[d] - direct).abs() < 1e-9 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn scalar_gradient_matches_finite_differences() {
        let n = 25;
        let r: Vec<f64> = (0..n).map(|d| matern32(d as f64)).collect();
        let y: Vec<f64> = (0..n).map(|t| ((t * 3) as f64).cos() * 0.8).collect();
        let out = toeplitz_nll(&r, &y, true, &JitterLadder::default()).unwrap();
        for d in [0, 1, 2, 10, 24] {
            let h = 1e-6;
            let (mut rp, mut rm) = (r.clone(), r.clone());
            rp[d] += h;
            rm[d] -= h;
            let l = JitterLadder::default();
            let fd = (toeplitz_nll(&rp, &y, false, &l).unwrap().value - toeplitz_nll(&rm, &y, false, &l).unwrap().value)
                / (2.0 * h);
            assert!((fd - out.grad_blocks[d][0]).abs() < 1e-6 * fd.abs().max(1.0), "d={d}");
        }
    }

    #[test]
    fn block_matches_dense_and_inverse() {
        let (n, m) = (7, 2);
        let g = bivariate_blocks(n);
        let t = dense_block(&g, m);
        let y: Vec<f64> = (0..n * m).map(|i| ((i * i) as f64 * 0.31).sin()).collect();
        let out = block_toeplitz_nll(&g, m, &y, false, &JitterLadder::default()).unwrap();
        assert!((out.value - dense_nll(&t, &y)).abs() < 1e-10 * out.value.abs());
        let f = BlockToeplitzFactor::new(&g, m).unwrap();
        let inv = t.clone().try_inverse().unwrap();
        let alpha = f.solve(&y);
        let direct = &inv * nalgebra::DVector::from_column_slice(&y);
        for i in 0..n * m {
            assert!((alpha[i] - direct[i]).abs() < 1e-10 * direct.amax());
        }
        let sums = f.diagonal_sums();
        for d in 0..n {
            for a in 0..m {
                for b in 0..m {
                    let s: f64 = (0..n - d).map(|i| inv[((i + d) * m + a, i * m + b)]).sum();
                    assert!((sums[d][a * m + b] - s).abs() < 1e-9 * s.abs().max(1.0), "d={d} ({a},{b})");
                }
            }
        }
    }

    #[test]
    fn block_gradient_matches_finite_differences() {
        let (n, m) = (9, 2);
        let g = bivariate_blocks(n);
        let y: Vec<f64> = (0..n * m).map(|i| ((i * 5) as f64 * 0.7).cos()).collect();
        let l = JitterLadder::default();
        let out = block_toeplitz_nll(&g, m, &y, true, &l).unwrap();
        for d in [0, 1, 4] {
            for e in 0..m * m {
                let h = 1e-6;
                let (mut gp, mut gm) = (g.clone(), g.clone());
                gp[d][e] += h;
                gm[d][e] -= h;
                if d == 0 {
                    // keep G_0 symmetric: perturb the mirrored entry as well
                    let t = (e % m) * m + e / m;
                    if t != e {
                        gp[0][t] += h;
                        gm[0][t] -= h;
                    }
                }
                let fd = (block_toeplitz_nll(&gp, m, &y, false, &l).unwrap().value
                    - block_toeplitz_nll(&gm, m, &y, false, &l).unwrap().value)
                    / (2.0 * h);
                let mut an = out.grad_blocks[d][e];
                if d == 0 {
                    let t = (e % m) * m + e / m;
                    if t != e {
                        an += out.grad_blocks[0][t];
                    }
                }
                assert!((fd - an).abs() < 1e-6 * fd.abs().max(1.0), "d={d} e={e}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn jitter_ladder_rescues_singular_and_reports_failure() {
        // rank-one all-ones covariance: singular without jitter
        let r = vec![1.0; 6];
        let y = vec![0.5; 6];
        let out = toeplitz_nll(&r, &y, false, &JitterLadder::default()).unwrap();
        assert_eq!(out.jitter, 1e-10);
        let bad = vec![1.0, 2.0, 0.0];
        assert!(matches!(
            toeplitz_nll(&bad, &[0.0; 3], false, &JitterLadder::default()),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn single_observation() {
        let out = toeplitz_nll(&[1.0], &[2.0], false, &JitterLadder::default()).unwrap();
        assert!((out.value - 0.5 * ((2.0 * std::f64::consts::PI).ln() + 4.0)).abs() < 1e-15);
    }
}
