//! Small numerical kernels shared by the analyses: ranks, RK4, quadrature and
//! finite-difference brackets.

use nalgebra::{DMatrix, SVector};

use crate::error::Result;
use crate::expr::DIM;

pub type Vec7 = SVector<f64, DIM>;

/// Numerical rank: singular values above `rel_tol · σ_max` are counted.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Rank of the span of `vectors` (placed as columns).
pub fn span_rank(vectors: &[Vec7], rel_tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(DIM, vectors.len(), |r, c| vectors[c][r]);
    rank(&m, rel_tol)
}

/// Distance from `v` to the span of `basis`, via least squares.
pub fn distance_to_span(v: &Vec7, basis: &[Vec7]) -> f64 {
    if basis.is_empty() {
        return v.norm();
    }
    let a = DMatrix::from_fn(DIM, basis.len(), |r, c| basis[c][r]);
    let b = DMatrix::from_fn(DIM, 1, |r, _| v[r]);
    let svd = a.clone().svd(true, true);
    match svd.solve(&b, 1e-14) {
        Ok(x) => (a * x - b).norm(),
        Err(_) => v.norm(),
    }
}

pub fn to_vec7(a: &[f64; DIM]) -> Vec7 {
    Vec7::from_column_slice(a)
}

/// One classical Runge–Kutta step of `ẏ = f(t, y)`.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], dt: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let axpy = |base: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] {
        std::array::from_fn(|i| base[i] + s * k[i])
    };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * dt, &axpy(y, &k1, 0.5 * dt))?;
    let k3 = f(t + 0.5 * dt, &axpy(y, &k2, 0.5 * dt))?;
    let k4 = f(t + dt, &axpy(y, &k3, dt))?;
    Ok(std::array::from_fn(|i| {
        y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// Number of fixed steps covering `[0, total]` with step at most `dt`; the
/// step is shrunk so the grid lands exactly on `total`.
pub fn uniform_steps(total: f64, dt: f64) -> (usize, f64) {
    let n = (total / dt - 1e-9).ceil().max(1.0) as usize;
    (n, total / n as f64)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Default finite-difference step for numeric brackets.
pub const BRACKET_STEP: f64 = 1e-4;

/// Directional derivative `DY(q)·v` by central differences with one
/// Richardson extrapolation over the step pair `(h, h/2)`.
pub fn directional_derivative<F>(y: &F, q: &[f64; DIM], v: &Vec7, h: f64) -> Result<Vec7>
where
    F: Fn(&[f64; DIM]) -> Result<Vec7>,
{
    let central = |step: f64| -> Result<Vec7> {
        let plus: [f64; DIM] = std::array::from_fn(|i| q[i] + step * v[i]);
        let minus: [f64; DIM] = std::array::from_fn(|i| q[i] - step * v[i]);
        Ok((y(&plus)? - y(&minus)?) / (2.0 * step))
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `[X, Y](q) = DY(q)·X(q) − DX(q)·Y(q)` for numerically given fields.
pub fn fd_bracket<F, G>(x: &F, y: &G, q: &[f64; DIM], h: f64) -> Result<Vec7>
where
    F: Fn(&[f64; DIM]) -> Result<Vec7>,
    G: Fn(&[f64; DIM]) -> Result<Vec7>,
{
    let xq = x(q)?;
    let yq = y(q)?;
    Ok(directional_derivative(y, q, &xq, h)? - directional_derivative(x, q, &yq, h)?)
}
