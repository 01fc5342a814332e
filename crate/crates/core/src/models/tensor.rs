use std::collections::BTreeMap;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::transform::AcfBasis;

/// Coefficient tensor `c_𝐢`, dense (row-major, last axis fastest) or a
/// sparse map keyed by multi-index.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorCoeffs<T = f64> {
    Dense { shape: Vec<usize>, data: Vec<T> },
    Sparse { shape: Vec<usize>, entries: BTreeMap<Vec<usize>, T> },
}

impl<T: Real> TensorCoeffs<T> {
    pub fn shape(&self) -> &[usize] {
        match self {
            Self::Dense { shape, .. } | Self::Sparse { shape, .. } => shape,
        }
    }

    /// Outer product of per-axis vectors, stored dense.
    pub fn outer(vectors: &[Vec<T>]) -> Self {
        let shape: Vec<usize> = vectors.iter().map(Vec::len).collect();
        let mut data = vec![T::one()];
        for v in vectors {
            data = data.iter().flat_map(|&a| v.iter().map(move |&b| a * b)).collect();
        }
        Self::Dense { shape, data }
    }

    fn offset(shape: &[usize], idx: &[usize]) -> usize {
        idx.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn get(&self, idx: &[usize]) -> T {
        match self {
            Self::Dense { shape, data } => data[Self::offset(shape, idx)],
            Self::Sparse { entries, .. } => entries.get(idx).copied().unwrap_or_else(T::zero),
        }
    }

    /// All stored `(multi-index, value)` pairs with nonzero value.
    pub fn nonzeros(&self) -> Vec<(Vec<usize>, T)> {
        match self {
            Self::Dense { shape, data } => {
                let mut out = Vec::new();
                let mut idx = vec![0usize; shape.len()];
                for &v in data {
                    if v != T::zero() {
                        out.push((idx.clone(), v));
                    }
                    for ax in (0..shape.len()).rev() {
                        idx[ax] += 1;
                        if idx[ax] < shape[ax] {
                            break;
                        }
                        idx[ax] = 0;
                    }
                }
                out
            }
            Self::Sparse { entries, .. } => entries
                .iter()
                .filter(|(_, &v)| v != T::zero())
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let shape = self.shape();
        let values: Vec<(Option<&Vec<usize>>, T)> = match self {
            Self::Dense { data, .. } => {
                let expected: usize = shape.iter().product();
                if data.len() != expected {
                    return Err(Error::DimensionMismatch { expected, found: data.len() });
                }
                data.iter().map(|&v| (None, v)).collect()
            }
            Self::Sparse { entries, .. } => {
                for k in entries.keys() {
                    if k.len() != shape.len() || k.iter().zip(shape).any(|(&i, &n)| i >= n) {
                        return Err(Error::InvalidModel(format!("multi-index {k:?} outside shape {shape:?}")));
                    }
                }
                entries.iter().map(|(k, &v)| (Some(k), v)).collect()
            }
        };
        for (k, v) in values {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("tensor coefficient {k:?}")));
            }
            if v < T::zero() {
                return Err(Error::InvalidModel(format!("tensor coefficient {k:?} = {v} is negative")));
            }
        }
        Ok(())
    }
}

/// Tensor-product spline PSD `f̂(𝛚) = Σ_𝐢 c_𝐢 Π_j B_{i_j,k_j}(ω_j)`.
///
/// The ACF factors per term, `γ̂(𝛕) = Σ_𝐢 c_𝐢 Π_j ρ_{i_j}(τ_j)`, and is
/// non-separable whenever `c` does not factor. For real processes the
/// spectrum is mirrored jointly, `½[f̂(𝛚) + f̂(−𝛚)]`, and the ACF is the real
/// part of the full sum.
#[derive(Debug, Clone)]
pub struct TensorPsdModel<T = f64> {
    axes: Vec<AcfBasis<T>>,
    coeffs: TensorCoeffs<T>,
    real_process: bool,
}

impl<T: Real> TensorPsdModel<T> {
    pub fn new(axes: Vec<AcfBasis<T>>, coeffs: TensorCoeffs<T>, real_process: bool) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidModel("tensor model needs at least one axis".into()));
        }
        let shape = coeffs.shape();
        if shape.len() != axes.len() {
            return Err(Error::DimensionMismatch { expected: axes.len(), found: shape.len() });
        }
        for (a, &n) in axes.iter().zip(shape) {
            if a.num_basis() != n {
                return Err(Error::DimensionMismatch { expected: a.num_basis(), found: n });
            }
        }
        coeffs.validate()?;
        Ok(Self { axes, coeffs, real_process })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[AcfBasis<T>] {
        &self.axes
    }

    pub fn coeffs(&self) -> &TensorCoeffs<T> {
        &self.coeffs
    }

    pub fn real_process(&self) -> bool {
        self.real_process
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            Err(Error::DimensionMismatch { expected: self.dim(), found: n })
        } else {
            Ok(())
        }
    }

    fn one_sided(&self, omega: &[T]) -> T {
        let mut locals = Vec::with_capacity(self.dim());
        for (ax, &w) in self.axes.iter().zip(omega) {
            match ax.knots().local_values(w) {
                Some(lv) if !lv.1.is_empty() => locals.push(lv),
                _ => return T::zero(),
            }
        }
        let mut total = T::zero();
        let mut pos = vec![0usize; locals.len()];
        let mut idx = vec![0usize; locals.len()];
        loop {
            let mut prod = T::one();
            for (ax, (start, vals)) in locals.iter().enumerate() {
                idx[ax] = start + pos[ax];
                prod = prod * vals[pos[ax]];
            }
            if prod != T::zero() {
                total = total + prod * self.coeffs.get(&idx);
            }
            let mut ax = locals.len();
            loop {
                if ax == 0 {
                    return total;
                }
                ax -= 1;
                pos[ax] += 1;
                if pos[ax] < locals[ax].1.len() {
                    break;
                }
                pos[ax] = 0;
            }
        }
    }

    pub fn psd_eval(&self, omega: &[T]) -> Result<T> {
        self.check_dim(omega.len())?;
        if self.real_process {
            let neg: Vec<T> = omega.iter().map(|&w| -w).collect();
            Ok((self.one_sided(omega) + self.one_sided(&neg)) / T::lit(2.0))
        } else {
            Ok(self.one_sided(omega))
        }
    }

    pub fn acf_eval(&self, tau: &[T]) -> Result<Complex<T>> {
        self.check_dim(tau.len())?;
        let rhos: Vec<Vec<Complex<T>>> = self
            .axes
            .iter()
            .zip(tau)
            .map(|(a, &t)| a.rho_all(t))
            .collect::<Result<_>>()?;
        let mut acc = Complex::new(T::zero(), T::zero());
        for (idx, c) in self.coeffs.nonzeros() {
            let prod = idx
                .iter()
                .enumerate()
                .fold(Complex::new(T::one(), T::zero()), |p, (ax, &i)| p * rhos[ax][i]);
            acc = acc + prod * c;
        }
        if self.real_process {
            acc.im = T::zero();
        }
        Ok(acc)
    }

    /// `γ̂(𝟎) = Σ c_𝐢 Π_j mass_j(i_j)`.
    pub fn variance(&self) -> T {
        self.coeffs.nonzeros().into_iter().fold(T::zero(), |acc, (idx, c)| {
            acc + idx
                .iter()
                .enumerate()
                .fold(c, |p, (ax, &i)| p * self.axes[ax].mass(i).expect("in range"))
        })
    }
}

/// Outer-product surrogate `γ_sep(τ_1, τ_2) = γ̂(τ_1, 0) γ̂(0, τ_2) / γ̂(0, 0)`
/// of a two-dimensional model.
#[derive(Debug, Clone, Copy)]
pub struct SeparableSurrogate<'a, T = f64> {
    model: &'a TensorPsdModel<T>,
    variance: T,
}

/// One point of the normalised difference field `(γ̂ − γ_sep)/γ̂(0,0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferencePoint<T = f64> {
    pub tau1: T,
    pub tau2: T,
    pub value: Complex<T>,
}

/// Builds the lag-zero-profile surrogate of a 2-D model.
pub fn separable_surrogate<T: Real>(model: &TensorPsdModel<T>) -> Result<SeparableSurrogate<'_, T>> {
    if model.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: model.dim() });
    }
    let variance = model.acf_eval(&[T::zero(), T::zero()])?.re;
    if !(variance > T::zero()) {
        return Err(Error::InvalidModel("separable surrogate needs positive variance".into()));
    }
    Ok(SeparableSurrogate { model, variance })
}

impl<T: Real> SeparableSurrogate<'_, T> {
    pub fn variance(&self) -> T {
        self.variance
    }

    /// `g_1(τ_1) = γ̂(τ_1, 0)`.
    pub fn g1(&self, tau1: T) -> Result<Complex<T>> {
        self.model.acf_eval(&[tau1, T::zero()])
    }

    /// `g_2(τ_2) = γ̂(0, τ_2)`.
    pub fn g2(&self, tau2: T) -> Result<Complex<T>> {
        self.model.acf_eval(&[T::zero(), tau2])
    }

    pub fn eval(&self, tau1: T, tau2: T) -> Result<Complex<T>> {
        Ok(self.g1(tau1)? * (self.g2(tau2)? / self.variance))
    }

    /// `(γ̂ − γ_sep)/γ̂(0,0)` at one lag pair.
    pub fn difference(&self, tau1: T, tau2: T) -> Result<Complex<T>> {
        Ok((self.model.acf_eval(&[tau1, tau2])? - self.eval(tau1, tau2)?) / self.variance)
    }

    /// Difference field over the product grid `grid1 × grid2` (row-major in `grid1`).
    pub fn difference_field(&self, grid1: &[T], grid2: &[T]) -> Result<Vec<DifferencePoint<T>>> {
        let g1: Vec<Complex<T>> = grid1.iter().map(|&t| self.g1(t)).collect::<Result<_>>()?;
        let g2: Vec<Complex<T>> = grid2.iter().map(|&t| self.g2(t)).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(grid1.len() * grid2.len());
        for (a, &t1) in grid1.iter().enumerate() {
            for (b, &t2) in grid2.iter().enumerate() {
                let full = self.model.acf_eval(&[t1, t2])?;
                let sep = g1[a] * (g2[b] / self.variance);
                out.push(DifferencePoint { tau1: t1, tau2: t2, value: (full - sep) / self.variance });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::KnotVector;
    use crate::models::SplinePsdModel;
    use crate::quadrature::{integrate_2d, QuadOptions};
    use num_complex::Complex64;

    fn ax(knots: Vec<f64>, k: usize) -> AcfBasis {
        AcfBasis::new(KnotVector::new(knots, k).unwrap())
    }

    fn axes() -> Vec<AcfBasis> {
        vec![ax(vec![0.0, 0.1, 0.25, 0.3, 0.5], 1), ax(vec![-0.5, -0.2, 0.0, 0.15, 0.5], 2)]
    }

    fn dense(data: Vec<f64>) -> TensorCoeffs {
        TensorCoeffs::Dense { shape: vec![3, 2], data }
    }

    #[test]
    fn dimension_errors() {
        assert!(TensorPsdModel::new(axes(), dense(vec![1.0; 5]), false).is_err());
        assert!(TensorPsdModel::new(axes(), dense(vec![1.0, -1.0, 1.0, 1.0, 1.0, 1.0]), false).is_err());
        let m = TensorPsdModel::new(axes(), dense(vec![1.0; 6]), false).unwrap();
        assert!(matches!(m.acf_eval(&[0.0]), Err(Error::DimensionMismatch { expected: 2, found: 1 })));
    }

    #[test]
    fn zero_lag_mass_product() {
        let data = vec![0.4, 1.0, 0.0, 2.0, 0.3, 0.9];
        let m = TensorPsdModel::new(axes(), dense(data.clone()), false).unwrap();
        let mut expect = 0.0;
        for i in 0..3 {
            for j in 0..2 {
                expect += data[i * 2 + j] * m.axes()[0].mass(i).unwrap() * m.axes()[1].mass(j).unwrap();
            }
        }
        assert!((m.acf_eval(&[0.0, 0.0]).unwrap().re - expect).abs() < 1e-15);
        assert!((m.variance() - expect).abs() < 1e-15);
    }

    #[test]
    fn rank_one_factorises_and_surrogate_vanishes() {
        let u = vec![0.5, 1.5, 0.2];
        let v = vec![1.0, 0.4];
        let m = TensorPsdModel::new(axes(), TensorCoeffs::outer(&[u.clone(), v.clone()]), false).unwrap();
        let mu = SplinePsdModel::new(axes()[0].clone(), u, false).unwrap();
        let mv = SplinePsdModel::new(axes()[1].clone(), v, false).unwrap();
        for &(a, b) in &[(0.3, -1.2), (4.0, 2.5), (-7.0, 0.0)] {
            let full = m.acf_eval(&[a, b]).unwrap();
            let prod = mu.acf_eval(a).unwrap() * mv.acf_eval(b).unwrap();
            assert!((full - prod).norm() < 1e-14);
        }
        let s = separable_surrogate(&m).unwrap();
        let field = s.difference_field(&[0.0, 1.0, 3.5], &[0.0, -2.0, 6.0]).unwrap();
        assert!(field.iter().all(|p| p.value.norm() < 1e-10));
        assert_eq!(s.difference(0.0, 0.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn non_rank_one_is_detected() {
        let m = TensorPsdModel::new(axes(), dense(vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]), true).unwrap();
        let s = separable_surrogate(&m).unwrap();
        let field = s.difference_field(&[0.5, 2.0, 4.0], &[0.5, 1.0, 3.0]).unwrap();
        assert!(field.iter().map(|p| p.value.norm()).fold(0.0, f64::max) > 1e-4);
    }

    #[test]
    fn sparse_matches_dense() {
        let data = vec![0.4, 1.0, 0.0, 2.0, 0.3, 0.9];
        let d = TensorPsdModel::new(axes(), dense(data.clone()), true).unwrap();
        let mut entries = BTreeMap::new();
        for i in 0..3 {
            for j in 0..2 {
                if data[i * 2 + j] != 0.0 {
                    entries.insert(vec![i, j], data[i * 2 + j]);
                }
            }
        }
        let s = TensorPsdModel::new(axes(), TensorCoeffs::Sparse { shape: vec![3, 2], entries }, true).unwrap();
        for &(a, b) in &[(0.3, -1.2), (4.0, 2.5)] {
            assert_eq!(d.acf_eval(&[a, b]).unwrap(), s.acf_eval(&[a, b]).unwrap());
            assert_eq!(d.psd_eval(&[a / 10.0, b / 10.0]).unwrap(), s.psd_eval(&[a / 10.0, b / 10.0]).unwrap());
        }
    }

    #[test]
    fn one_axis_reduces_to_univariate() {
        let a = ax(vec![0.0, 0.1, 0.25, 0.3, 0.5], 1);
        let c = vec![0.2, 0.9, 0.4];
        let t = TensorPsdModel::new(vec![a.clone()], TensorCoeffs::Dense { shape: vec![3], data: c.clone() }, true).unwrap();
        let u = SplinePsdModel::new(a, c, true).unwrap();
        for &x in &[0.0, 0.7, 5.0] {
            assert!((t.acf_eval(&[x]).unwrap() - u.acf_eval(x).unwrap()).norm() < 1e-12);
            assert!((t.psd_eval(&[x / 10.0]).unwrap() - u.psd_eval(x / 10.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_2d() {
        let m = TensorPsdModel::new(axes(), dense(vec![0.4, 1.0, 0.1, 2.0, 0.3, 0.9]), false).unwrap();
        let opts = QuadOptions { rel_tol: 1e-10, ..Default::default() };
        let xb = m.axes()[0].knots().knots().to_vec();
        let yb = m.axes()[1].knots().knots().to_vec();
        for &(a, b) in &[(0.0, 0.0), (1.3, -0.7), (3.0, 2.0)] {
            let two_pi = 2.0 * std::f64::consts::PI;
            let q = integrate_2d(
                |x, y| Complex64::from_polar(m.psd_eval(&[x, y]).unwrap(), two_pi * (a * x + b * y)),
                (0.0, 0.5),
                (-0.5, 0.5),
                &xb,
                &yb,
                &opts,
            )
            .unwrap();
            let v = m.acf_eval(&[a, b]).unwrap();
            assert!((q - v).norm() < 1e-7 * m.variance(), "{q} vs {v}");
        }
    }
}
