//! Adaptive Gauss–Kronrod (7/15) quadrature used as an independent oracle for
//! the closed-form transforms.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::knots::KnotVector;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Accept a panel when `|K15 − G7| ≤ rel_tol · ∫|f| + abs_tol` on it.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum bisection depth before reporting non-convergence.
    pub max_depth: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 1e-300, max_depth: 40 }
    }
}

struct Panel {
    kronrod: Complex64,
    gauss: Complex64,
    abs_mass: f64,
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_mass = fc.norm() * WGK[7];
    for j in 0..7 {
        let x = h * XGK[j];
        let (f1, f2) = (f(c - x), f(c + x));
        kronrod += (f1 + f2) * WGK[j];
        abs_mass += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    Panel { kronrod: kronrod * h, gauss: gauss * h, abs_mass: abs_mass * h.abs() }
}

fn recurse<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    panel: Panel,
    opts: &QuadOptions,
    depth: usize,
) -> Result<Complex64> {
    let err = (panel.kronrod - panel.gauss).norm();
    if err <= opts.rel_tol * panel.abs_mass + opts.abs_tol {
        return Ok(panel.kronrod);
    }
    if depth >= opts.max_depth {
        return Err(Error::QuadratureNonConvergence {
            lo: a,
            hi: b,
            estimate: err,
        });
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m);
    let right = gk15(f, m, b);
    Ok(recurse(f, a, m, left, opts, depth + 1)? + recurse(f, m, b, right, opts, depth + 1)?)
}

/// Integrates a complex-valued `f` over `[a, b]`, splitting first at the
/// supplied breakpoints (those strictly inside the interval).
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<Complex64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("quadrature limits".into()));
    }
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    let mut total = Complex64::new(0.0, 0.0);
    for w in pts.windows(2) {
        if w[1] > w[0] {
            let panel = gk15(&f, w[0], w[1]);
            total += recurse(&f, w[0], w[1], panel, opts, 0)?;
        }
    }
    Ok(total)
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<f64> {
    integrate(|x| Complex64::new(f(x), 0.0), a, b, breaks, opts).map(|z| z.re)
}

/// `∫ B_{i,k}(ω) e^{2πιωτ} dω` by adaptive quadrature of the Cox–de Boor
/// basis, panel breaks at the local knots.
pub fn ift_quadrature_oracle(kv: &KnotVector<f64>, i: usize, tau: f64) -> Result<Complex64> {
    if !tau.is_finite() {
        return Err(Error::NonFinite("lag".into()));
    }
    let local = kv.local_knots(i)?.to_vec();
    let (a, b) = (local[0], local[local.len() - 1]);
    let lam = 2.0 * std::f64::consts::PI * tau;
    let opts = QuadOptions::default();
    integrate(
        |w| {
            let v = kv.eval(i, w).expect("index checked");
            Complex64::from_polar(v, lam * w)
        },
        a,
        b,
        &local,
        &opts,
    )
}

/// Nested 2-D quadrature `∫∫ f(x, y) dy dx` with breakpoints per axis.
pub fn integrate_2d<F: Fn(f64, f64) -> Complex64>(
    f: F,
    x: (f64, f64),
    y: (f64, f64),
    x_breaks: &[f64],
    y_breaks: &[f64],
    opts: &QuadOptions,
) -> Result<Complex64> {
    let inner_err = std::cell::RefCell::new(None);
    let outer = integrate(
        |xv| match integrate(|yv| f(xv, yv), y.0, y.1, y_breaks, opts) {
            Ok(v) => v,
            Err(e) => {
                inner_err.borrow_mut().get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        },
        x.0,
        x.1,
        x_breaks,
        opts,
    )?;
    match inner_err.into_inner() {
        Some(e) => Err(e),
        None => Ok(outer),
    }
}
