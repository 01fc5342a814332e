//! Stationary Gaussian simulation on an equispaced grid.
//!
//! Circulant embedding is tried first, doubling the embedding while any
//! eigenvalue of the (block) circulant is materially negative; if that fails
//! the full covariance is factorized densely with the jitter ladder.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::inference::toeplitz::JitterLadder;

/// Negative circulant eigenvalues below `−EMBED_TOL · λ_max` reject an embedding.
pub const EMBED_TOL: f64 = 1e-10;
/// Largest embedding tried, as a multiple of `n`.
pub const MAX_EMBED_FACTOR: usize = 16;
/// Dense fallback limit on `n·M`.
pub const DENSE_LIMIT: usize = 6000;

/// RNG for replication `stream` under a master seed.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

enum Method {
    Circulant { size: usize, roots: Vec<DMatrix<Complex64>>, fft: Arc<dyn Fft<f64>> },
    Dense { factor: DMatrix<f64> },
}

/// Precomputed square root of the covariance of `n` consecutive values of an
/// `M`-variate stationary process.
pub struct GpSampler {
    n: usize,
    m: usize,
    method: Method,
}

impl std::fmt::Debug for GpSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GpSampler")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("circulant", &self.is_circulant())
            .finish()
    }
}

impl GpSampler {
    /// `acf(τ)` returns the row-major `M×M` block `E[y(t+τ) y(t)ᵀ]`.
    pub fn new<F: Fn(f64) -> Vec<f64>>(m: usize, n: usize, delta: f64, acf: F) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument("simulation needs n ≥ 1 and at least one component".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument("sample spacing must be positive".into()));
        }
        let lag = |d: usize| -> Result<Vec<f64>> {
            let g = acf(d as f64 * delta);
            if g.len() != m * m {
                return Err(Error::DimensionMismatch { expected: m * m, found: g.len() });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("autocovariance".into()));
            }
            Ok(g)
        };
        let mut blocks: Vec<Vec<f64>> = (0..n).map(lag).collect::<Result<_>>()?;
        if n == 1 {
            return Self::dense(m, n, &blocks);
        }
        let mut half = n - 1;
        while half <= MAX_EMBED_FACTOR * n {
            while blocks.len() <= half {
                blocks.push(lag(blocks.len())?);
            }
            if let Some(method) = circulant_root(m, half, &blocks) {
                return Ok(Self { n, m, method });
            }
            half *= 2;
        }
        Self::dense(m, n, &blocks)
    }

    /// Scalar process with autocovariance `acf`.
    pub fn scalar<F: Fn(f64) -> f64>(n: usize, delta: f64, acf: F) -> Result<Self> {
        Self::new(1, n, delta, |t| vec![acf(t)])
    }

    fn dense(m: usize, n: usize, blocks: &[Vec<f64>]) -> Result<Self> {
        let size = n * m;
        if size > DENSE_LIMIT {
            return Err(Error::NotPositiveDefinite { jitter: 0.0, scale: 0.0, pivot: f64::NAN });
        }
        let cov = DMatrix::from_fn(size, size, |a, b| {
            let (ta, ra, tb, rb) = (a / m, a % m, b / m, b % m);
            if ta >= tb {
                blocks[ta - tb][ra * m + rb]
            } else {
                blocks[tb - ta][rb * m + ra]
            }
        });
        let scale = cov.trace() / size as f64;
        let (chol, _) = JitterLadder::default().run(scale, |j| {
            let mut c = cov.clone();
            for i in 0..size {
                c[(i, i)] += j;
            }
            let lo = (0..size).map(|i| c[(i, i)]).fold(f64::INFINITY, f64::min);
            c.cholesky().ok_or(lo)
        })?;
        Ok(Self { n, m, method: Method::Dense { factor: chol.l() } })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn is_circulant(&self) -> bool {
        matches!(self.method, Method::Circulant { .. })
    }

    /// One draw, time-major (`M` values per step).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        match &self.method {
            Method::Dense { factor } => {
                let z = DVector::from_fn(n * m, |_, _| rng.sample::<f64, _>(StandardNormal));
                (factor * z).iter().copied().collect()
            }
            Method::Circulant { size, roots, fft } => {
                let norm = 1.0 / (*size as f64).sqrt();
                let mut comps = vec![vec![Complex64::new(0.0, 0.0); *size]; m];
                for (f, root) in roots.iter().enumerate() {
                    let xi: Vec<Complex64> = (0..m)
                        .map(|_| {
                            let re: f64 = rng.sample(StandardNormal);
                            let im: f64 = rng.sample(StandardNormal);
                            Complex64::new(re, im)
                        })
                        .collect();
                    for r in 0..m {
                        let v: Complex64 = (0..m).map(|s| root[(r, s)] * xi[s]).sum();
                        comps[r][f] = v * norm;
                    }
                }
                for c in comps.iter_mut() {
                    fft.process(c);
                }
                let mut out = Vec::with_capacity(n * m);
                for t in 0..n {
                    for c in &comps {
                        out.push(c[t].re);
                    }
                }
                out
            }
        }
    }
}

/// Square roots of the block-circulant eigenmatrices for an embedding of
/// size `2·half`, or `None` when the embedding is not nonnegative definite.
fn circulant_root(m: usize, half: usize, blocks: &[Vec<f64>]) -> Option<Method> {
    let size = 2 * half;
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(size);
    // Entry (r, s) of C_j: G_j for j ≤ half, G_{size−j}ᵀ above.
    let mut spectra = vec![vec![Complex64::new(0.0, 0.0); size]; m * m];
    for r in 0..m {
        for s in 0..m {
            let buf = &mut spectra[r * m + s];
            for (j, slot) in buf.iter_mut().enumerate() {
                let v = if j <= half { blocks[j][r * m + s] } else { blocks[size - j][s * m + r] };
                *slot = Complex64::new(v, 0.0);
            }
            forward.process(buf);
        }
    }
    let mut roots = Vec::with_capacity(size);
    let mut top = 0.0f64;
    let mut low = 0.0f64;
    for f in 0..size {
        let w = DMatrix::from_fn(m, m, |r, s| {
            // Hermitian part, removing round-off asymmetry.
            0.5 * (spectra[r * m + s][f] + spectra[s * m + r][f].conj())
        });
        let eig = w.symmetric_eigen();
        for &d in eig.eigenvalues.iter() {
            top = top.max(d);
            low = low.min(d);
        }
        let sq = DMatrix::from_fn(m, m, |r, s| eig.eigenvectors[(r, s)] * eig.eigenvalues[s].max(0.0).sqrt());
        roots.push(sq);
    }
    if low < -EMBED_TOL * top {
        return None;
    }
    Some(Method::Circulant { size, roots, fft: planner.plan_fft_inverse(size) })
}

/// Convenience draw of a single series with master seed `seed`.
pub fn sample_gp<F: Fn(f64) -> Vec<f64>>(m: usize, n: usize, delta: f64, acf: F, seed: u64) -> Result<Vec<f64>> {
    let sampler = GpSampler::new(m, n, delta, acf)?;
    Ok(sampler.sample(&mut rng_for(seed, 0)))
}
