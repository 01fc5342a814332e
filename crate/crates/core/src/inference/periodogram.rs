use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Periodogram `I(𝛚_l) = (ΠΔ/Πn) |Σ_𝐭 y_𝐭 e^{−2πι𝛚_l·𝐭Δ}|²` on the Fourier
/// grid `l/(nΔ)`, `l = 0..n−1` per axis. Values are stored row-major (last
/// axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    shape: Vec<usize>,
    delta: Vec<f64>,
    values: Vec<f64>,
}

fn fft_axis(data: &mut [Complex64], shape: &[usize], axis: usize, planner: &mut FftPlanner<f64>) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let fft = planner.plan_fft_forward(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for o in 0..outer {
        for s in 0..stride {
            let base = o * n * stride + s;
            for (j, b) in buf.iter_mut().enumerate() {
                *b = data[base + j * stride];
            }
            fft.process(&mut buf);
            for (j, b) in buf.iter().enumerate() {
                data[base + j * stride] = *b;
            }
        }
    }
}

impl Periodogram {
    /// Periodogram of complex data on a regular `shape` grid.
    pub fn from_complex(data: &[Complex64], shape: &[usize], delta: &[f64], demean: bool) -> Result<Self> {
        if shape.is_empty() || shape.len() != delta.len() {
            return Err(Error::DimensionMismatch { expected: shape.len().max(1), found: delta.len() });
        }
        let total: usize = shape.iter().product();
        if data.len() != total {
            return Err(Error::DimensionMismatch { expected: total, found: data.len() });
        }
        if shape.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument("periodogram needs at least 2 samples per axis".into()));
        }
        if delta.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidArgument("sample spacing must be positive and finite".into()));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("series value".into()));
        }
        let mut buf = data.to_vec();
        if demean {
            let mean = buf.iter().sum::<Complex64>() / total as f64;
            buf.iter_mut().for_each(|z| *z -= mean);
        }
        let mut planner = FftPlanner::new();
        for axis in 0..shape.len() {
            fft_axis(&mut buf, shape, axis, &mut planner);
        }
        let scale = delta.iter().product::<f64>() / total as f64;
        let values: Vec<f64> = buf.iter().map(|z| scale * z.norm_sqr()).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("periodogram overflowed".into()));
        }
        Ok(Self { shape: shape.to_vec(), delta: delta.to_vec(), values })
    }

    /// Periodogram of a real series sampled at spacing `delta`.
    pub fn from_series(series: &[f64], delta: f64, demean: bool) -> Result<Self> {
        let z: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_complex(&z, &[series.len()], &[delta], demean)
    }

    /// Periodogram of real gridded data.
    pub fn from_grid(data: &[f64], shape: &[usize], delta: &[f64], demean: bool) -> Result<Self> {
        let z: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_complex(&z, shape, delta, demean)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fourier frequency `l/(nΔ)` on one axis (unwrapped).
    pub fn frequency(&self, axis: usize, l: usize) -> f64 {
        l as f64 / (self.shape[axis] as f64 * self.delta[axis])
    }

    /// Frequency of index `l` folded into `(−1/2Δ, 1/2Δ]`.
    pub fn wrapped_frequency(&self, axis: usize, l: usize) -> f64 {
        let n = self.shape[axis];
        let step = 1.0 / (n as f64 * self.delta[axis]);
        if 2 * l <= n {
            l as f64 * step
        } else {
            (l as f64 - n as f64) * step
        }
    }

    /// Multi-index of flat position `p`.
    pub fn index(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for ax in (0..self.shape.len()).rev() {
            idx[ax] = p % self.shape[ax];
            p /= self.shape[ax];
        }
        idx
    }

    /// Wrapped frequency vector of flat position `p`.
    pub fn omega(&self, p: usize) -> Vec<f64> {
        self.index(p).iter().enumerate().map(|(ax, &l)| self.wrapped_frequency(ax, l)).collect()
    }

    /// `Σ_l I(ω_l) / Π(nΔ)`, equal to the mean square of the (demeaned) data.
    pub fn parseval_sum(&self) -> f64 {
        let norm: f64 = self.shape.iter().zip(&self.delta).map(|(&n, d)| n as f64 * d).product();
        self.values.iter().sum::<f64>() / norm
    }
}
