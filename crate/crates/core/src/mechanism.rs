//! Kinematics of the trident mechanism: wheel positions, the no-slip Pfaff
//! system, the horizontal frame and the controllability analyses built on it.
//!
//! Coordinates are `(x, y, θ, φ, ℓ1, ℓ2, ℓ3)`. The frame is `X2 = ∂ℓ1`,
//! `X3 = ∂ℓ2`, `X4 = ∂ℓ3` and `X1` spanning the remaining kernel direction of
//! the constraints. `X1` is gauged so that its root-block velocity along the
//! body axis is one; on the slice `x = y = 0, θ = π/2` this is "∂x coefficient
//! equals one" and `X1` coincides with [`slice_frame`]'s closed form.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix3, SMatrix};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, DIM};
use crate::field::{lie_bracket, Chart, VectorFieldSym};
use crate::numeric::{span_rank, Vec7};
use crate::point::Configuration;
use crate::system::{self, ControlSystem, DynamicPairReport, SignatureResult, RANK_TOL};

const X: usize = 0;
const Y: usize = 1;
const THETA: usize = 2;
const PHI: usize = 3;
const L1: usize = 4;
const L2: usize = 5;
const L3: usize = 6;

/// Distance from zero below which `ℓ2` or `L` make the frame singular.
pub const SINGULAR_EPS: f64 = 1e-9;

/// Anchor angles of the fixed branches; the jointed branch sits at angle 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismConstants {
    pub alpha1: f64,
    pub alpha3: f64,
}

impl Default for MechanismConstants {
    fn default() -> Self {
        Self {
            alpha1: -2.0 * PI / 3.0,
            alpha3: 2.0 * PI / 3.0,
        }
    }
}

/// `L = ℓ1 + ℓ3 + 2`.
pub fn big_l(q: &[f64; DIM]) -> f64 {
    q[L1] + q[L3] + 2.0
}

fn coords_original(q: &Configuration) -> Result<&[f64; DIM]> {
    q.expect_chart(Chart::Original)?;
    Ok(&q.coords)
}

fn check_regular(q: &[f64; DIM]) -> Result<()> {
    if q[L2].abs() < SINGULAR_EPS {
        return Err(Error::SingularConfiguration(format!("l2 = {:e} is zero", q[L2])));
    }
    let l = big_l(q);
    if l.abs() < SINGULAR_EPS {
        return Err(Error::SingularConfiguration(format!("L = l1 + l3 + 2 = {l:e} is zero")));
    }
    Ok(())
}

/// Contact points of the three wheels in the plane.
pub fn wheel_positions(q: &Configuration) -> Result<[[f64; 2]; 3]> {
    let c = coords_original(q)?;
    let k = MechanismConstants::default();
    let (x, y, th, phi) = (c[X], c[Y], c[THETA], c[PHI]);
    let fixed = |alpha: f64, l: f64| {
        let a = th + alpha;
        [x + a.cos() + l * a.cos(), y + a.sin() + l * a.sin()]
    };
    Ok([
        fixed(k.alpha1, c[L1]),
        [
            x + th.cos() + c[L2] * (th + phi).cos(),
            y + th.sin() + c[L2] * (th + phi).sin(),
        ],
        fixed(k.alpha3, c[L3]),
    ])
}

/// Vertices of the root-block triangle (where the branches attach).
pub fn vertex_positions(q: &Configuration) -> Result<[[f64; 2]; 3]> {
    let c = coords_original(q)?;
    let k = MechanismConstants::default();
    let v = |alpha: f64| [c[X] + (c[THETA] + alpha).cos(), c[Y] + (c[THETA] + alpha).sin()];
    Ok([v(k.alpha1), v(0.0), v(k.alpha3)])
}

/// Rows are the no-slip one-forms in the basis `(dx, dy, dθ, dφ, dℓ1, dℓ2, dℓ3)`.
///
/// The jointed branch contributes `(cos φ + ℓ2) dθ + ℓ2 dφ`, obtained by
/// projecting the wheel velocity onto the wheel's normal.
pub fn pfaff_matrix(q: &Configuration) -> Result<SMatrix<f64, 3, DIM>> {
    Ok(pfaff_rows(coords_original(q)?))
}

fn pfaff_rows(c: &[f64; DIM]) -> SMatrix<f64, 3, DIM> {
    let k = MechanismConstants::default();
    let (th, phi) = (c[THETA], c[PHI]);
    let mut m = SMatrix::<f64, 3, DIM>::zeros();
    for (row, alpha, l) in [(0, k.alpha1, c[L1]), (2, k.alpha3, c[L3])] {
        m[(row, X)] = -(th + alpha).sin();
        m[(row, Y)] = (th + alpha).cos();
        m[(row, THETA)] = 1.0 + l;
    }
    m[(1, X)] = -(th + phi).sin();
    m[(1, Y)] = (th + phi).cos();
    m[(1, THETA)] = phi.cos() + c[L2];
    m[(1, PHI)] = c[L2];
    m
}

fn frame_at(c: &[f64; DIM]) -> Result<[Vec7; 4]> {
    check_regular(c)?;
    let m = pfaff_rows(c);
    // Kernel of the 3×4 block on (dx, dy, dθ, dφ) via signed 3×3 minors.
    let mut k = [0.0; 4];
    for (j, kj) in k.iter_mut().enumerate() {
        let cols: Vec<usize> = (0..4).filter(|&c| c != j).collect();
        let minor = Matrix3::from_fn(|r, s| m[(r, cols[s])]);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        *kj = sign * minor.determinant();
    }
    let th = c[THETA];
    // Body-axis component: rotate (kx, ky) back by θ − π/2.
    let gauge = th.sin() * k[0] - th.cos() * k[1];
    let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
    if gauge.abs() <= 1e-12 * norm.max(1e-300) {
        return Err(Error::SingularConfiguration(
            "constraint kernel has no root-block translation".into(),
        ));
    }
    let mut x1 = Vec7::zeros();
    for i in 0..4 {
        x1[i] = k[i] / gauge;
    }
    Ok([x1, unit(L1), unit(L2), unit(L3)])
}

fn unit(i: usize) -> Vec7 {
    let mut v = Vec7::zeros();
    v[i] = 1.0;
    v
}

/// The horizontal frame `(X1, X2, X3, X4)` at `q`.
pub fn horizontal_frame(q: &Configuration) -> Result<[Vec7; 4]> {
    frame_at(coords_original(q)?)
}

/// True when `q` lies on the slice `x = y = 0, θ = π/2`.
pub fn is_on_slice(q: &[f64; DIM]) -> bool {
    q[X] == 0.0 && q[Y] == 0.0 && (q[THETA] - FRAC_PI_2).abs() <= 4.0 * f64::EPSILON
}

fn v(i: usize) -> Expr {
    Expr::var(i)
}

fn sym_l() -> Expr {
    v(L1) + v(L3) + Expr::int(2)
}

/// Closed-form frame on the slice `x = y = 0, θ = π/2` as symbolic fields in
/// the original chart. Only ℓ- and φ-derivatives of these fields are
/// meaningful, which is all the brackets `[X1, Xⱼ]` need.
pub fn slice_frame() -> [VectorFieldSym; 4] {
    let l = sym_l();
    let r3 = Expr::sqrt3;
    let x1 = VectorFieldSym::new(
        Chart::Original,
        [
            Expr::one(),
            (v(L1) - v(L3)) * r3() / (Expr::int(3) * l.clone()),
            -(Expr::one() / l.clone()),
            (v(PHI).sin() * r3() * (v(L1) - v(L3))
                + Expr::int(3) * v(PHI).cos() * (l.clone() + Expr::one())
                + Expr::int(3) * v(L2))
                / Expr::Mul(vec![Expr::int(3), v(L2), l]),
            Expr::zero(),
            Expr::zero(),
            Expr::zero(),
        ],
    );
    [
        x1,
        VectorFieldSym::coordinate(Chart::Original, L1),
        VectorFieldSym::coordinate(Chart::Original, L2),
        VectorFieldSym::coordinate(Chart::Original, L3),
    ]
}

/// The tabulated closed forms of `X12, X13, X14` on the slice.
pub fn slice_brackets_tabulated() -> [VectorFieldSym; 3] {
    let l = sym_l;
    let r3 = Expr::sqrt3;
    let l_sq = || l().powi(2);
    let z = Expr::zero;
    let x12 = VectorFieldSym::new(
        Chart::Original,
        [
            z(),
            Expr::int(-2) * (v(L3) + Expr::one()) / Expr::Mul(vec![r3(), l_sq()]),
            -(Expr::one() / l_sq()),
            (Expr::int(-2) * v(PHI).sin() * (v(L3) + Expr::one()) + r3() * v(PHI).cos() + r3() * v(L2))
                / Expr::Mul(vec![r3(), v(L2), l_sq()]),
            z(),
            z(),
            z(),
        ],
    );
    let x13 = VectorFieldSym::new(
        Chart::Original,
        [
            z(),
            z(),
            z(),
            (v(PHI).sin() * (v(L1) - v(L3)) + r3() * v(PHI).cos() * (l() + Expr::one()))
                / Expr::Mul(vec![r3(), v(L2).powi(2), l()]),
            z(),
            z(),
            z(),
        ],
    );
    let x14 = VectorFieldSym::new(
        Chart::Original,
        [
            z(),
            (Expr::int(2) * v(L1) + Expr::int(2)) / Expr::Mul(vec![r3(), l_sq()]),
            -(Expr::one() / l_sq()),
            (Expr::int(2) * v(PHI).sin() * (v(L1) + Expr::one()) + r3() * v(PHI).cos() + r3() * v(L2))
                / Expr::Mul(vec![r3(), v(L2), l_sq()]),
            z(),
            z(),
            z(),
        ],
    );
    [x12, x13, x14]
}

/// `[X1, X2], [X1, X3], [X1, X4]` computed symbolically from [`slice_frame`].
pub fn slice_brackets() -> &'static [VectorFieldSym; 3] {
    static CELL: OnceLock<[VectorFieldSym; 3]> = OnceLock::new();
    CELL.get_or_init(|| {
        let f = slice_frame();
        [1, 2, 3].map(|j| lie_bracket(&f[0], &f[j]).expect("same chart"))
    })
}

/// How [`TridentSystem`] evaluates brackets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BracketMode {
    /// Exact symbolic brackets on the slice, finite differences elsewhere.
    #[default]
    Auto,
    FiniteDifference,
}

/// The mechanism as a [`ControlSystem`] in the original chart.
#[derive(Clone, Copy, Debug, Default)]
pub struct TridentSystem {
    pub mode: BracketMode,
}

impl TridentSystem {
    pub fn finite_difference() -> Self {
        Self {
            mode: BracketMode::FiniteDifference,
        }
    }
}

impl ControlSystem for TridentSystem {
    fn name(&self) -> &'static str {
        "original"
    }

    fn chart(&self) -> Chart {
        Chart::Original
    }

    fn frame(&self, q: &[f64; DIM]) -> Result<[Vec7; 4]> {
        frame_at(q)
    }

    fn bracket(&self, i: usize, j: usize, q: &[f64; DIM]) -> Result<Vec7> {
        if i == j || (i > 0 && j > 0) {
            // X2..X4 are coordinate fields.
            return Ok(Vec7::zeros());
        }
        if self.mode == BracketMode::Auto && is_on_slice(q) {
            check_regular(q)?;
            let (k, sign) = if i == 0 { (j, 1.0) } else { (i, -1.0) };
            let b = slice_brackets()[k - 1].eval(q)?;
            return Ok(sign * Vec7::from_column_slice(&b));
        }
        let xi = |p: &[f64; DIM]| Ok(frame_at(p)?[i]);
        let xj = |p: &[f64; DIM]| Ok(frame_at(p)?[j]);
        crate::numeric::fd_bracket(&xi, &xj, q, crate::numeric::BRACKET_STEP)
    }

    fn annihilator(&self, q: &[f64; DIM]) -> Result<[Vec7; 3]> {
        let m = pfaff_rows(q);
        Ok([0, 1, 2].map(|r| m.row(r).transpose()))
    }
}

/// Matrix serialised as row-major nested arrays with a `shape` field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub shape: [usize; 2],
    pub data: Vec<Vec<f64>>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            shape: [m.nrows(), m.ncols()],
            data: (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ControllabilityReport {
    /// Rows `X1, X2, X3, X4, X12, X13, X14` evaluated at the point.
    pub gbar: MatrixJson,
    pub det_gbar: f64,
    pub growth: (usize, usize),
}

impl ControllabilityReport {
    pub fn is_bracket_generating(&self) -> bool {
        self.growth == (4, 7)
    }
}

/// Evaluates `Ḡ`, its determinant and the growth vector at `q`.
pub fn controllability(q: &Configuration, rel_tol: f64) -> Result<ControllabilityReport> {
    controllability_with(&TridentSystem::default(), q, rel_tol)
}

pub fn controllability_with(
    system: &TridentSystem,
    q: &Configuration,
    rel_tol: f64,
) -> Result<ControllabilityReport> {
    let c = coords_original(q)?;
    let frame = system.frame(c)?;
    let mut rows: Vec<Vec7> = frame.to_vec();
    for j in 1..4 {
        rows.push(system.bracket(0, j, c)?);
    }
    let g = DMatrix::from_fn(DIM, DIM, |r, s| rows[r][s]);
    let det = g.determinant();
    let growth = (span_rank(&rows[..4], rel_tol), span_rank(&rows, rel_tol));
    Ok(ControllabilityReport {
        gbar: MatrixJson::from(&g),
        det_gbar: det,
        growth,
    })
}

/// Dynamic-pair regularity with drift `f·X1`, `f` a nonzero constant.
pub fn check_dynamic_pair(q: &Configuration, f: f64) -> Result<DynamicPairReport> {
    system::check_dynamic_pair(&TridentSystem::default(), coords_original(q)?, f, RANK_TOL)
}

/// Signature of the Pfaffian of the dual curvature at `q`.
pub fn pfaffian_signature(q: &Configuration, rel_tol: f64) -> Result<SignatureResult> {
    system::pfaffian_signature(&TridentSystem::default(), coords_original(q)?, rel_tol)
}

/// A random configuration with legs in `[0.5, 2]`, joint angle in
/// `[−0.3, 0.3]` and arbitrary planar pose.
pub fn random_valid_configuration(rng: &mut impl Rng) -> Configuration {
    Configuration::original([
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-PI..PI),
        rng.gen_range(-0.3..0.3),
        rng.gen_range(0.5..2.0),
        rng.gen_range(0.5..2.0),
        rng.gen_range(0.5..2.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q0() -> Configuration {
        Configuration::reference()
    }

    #[test]
    fn wheels_at_reference_point() {
        let w = wheel_positions(&q0()).unwrap();
        assert_abs_diff_eq!(w[1][0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1][1], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[0][0], 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(w[0][1], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn wheels_are_periodic_in_heading() {
        let q = Configuration::original([0.3, -0.2, 0.4, 0.1, 1.2, 0.8, 1.7]);
        let mut turned = q;
        turned.coords[THETA] += 2.0 * PI;
        let (a, b) = (wheel_positions(&q).unwrap(), wheel_positions(&turned).unwrap());
        for i in 0..3 {
            for k in 0..2 {
                assert_abs_diff_eq!(a[i][k], b[i][k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn adapted_chart_is_rejected() {
        let q = Configuration::adapted([0.0; DIM]);
        assert!(matches!(wheel_positions(&q), Err(Error::ChartMismatch { .. })));
        assert!(matches!(pfaff_matrix(&q), Err(Error::ChartMismatch { .. })));
    }

    #[test]
    fn pfaff_rows_at_reference_point() {
        let m = pfaff_matrix(&q0()).unwrap();
        let expected1 = [0.5, 3f64.sqrt() / 2.0, 2.0, 0.0, 0.0, 0.0, 0.0];
        let expected2 = [-1.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0];
        for j in 0..DIM {
            assert_abs_diff_eq!(m[(0, j)], expected1[j], epsilon = 1e-15);
            assert_abs_diff_eq!(m[(1, j)], expected2[j], epsilon = 1e-15);
        }
        for r in 0..3 {
            for j in 4..7 {
                assert_eq!(m[(r, j)], 0.0);
            }
        }
    }

    #[test]
    fn x1_at_reference_point() {
        let f = horizontal_frame(&q0()).unwrap();
        let expected = [1.0, 0.0, -0.25, 1.5, 0.0, 0.0, 0.0];
        for j in 0..DIM {
            assert_abs_diff_eq!(f[0][j], expected[j], epsilon = 1e-14);
        }
        assert_eq!(f[1], unit(L1));
        assert_eq!(f[3], unit(L3));
    }

    #[test]
    fn symmetric_legs_give_no_lateral_motion() {
        let q = Configuration::original([0.0, 0.0, FRAC_PI_2, 0.0, 2.0, 1.0, 2.0]);
        let f = horizontal_frame(&q).unwrap();
        assert_abs_diff_eq!(f[0][Y], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn frame_annihilated_by_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q = random_valid_configuration(&mut rng);
            let m = pfaff_matrix(&q).unwrap();
            for x in horizontal_frame(&q).unwrap() {
                assert!((m * x).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn numeric_frame_matches_closed_form_on_slice() {
        let q = Configuration::original([0.0, 0.0, FRAC_PI_2, 0.25, 0.7, 1.3, 1.9]);
        let numeric = horizontal_frame(&q).unwrap()[0];
        let closed = slice_frame()[0].eval(&q.coords).unwrap();
        for j in 0..DIM {
            assert_abs_diff_eq!(numeric[j], closed[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn singular_legs() {
        let mut q = q0();
        q.coords[L2] = 1e-12;
        assert!(matches!(horizontal_frame(&q), Err(Error::SingularConfiguration(_))));
        let mut q = q0();
        q.coords[L1] = -1.0;
        q.coords[L3] = -1.0;
        assert!(matches!(controllability(&q, RANK_TOL), Err(Error::SingularConfiguration(_))));
    }

    #[test]
    fn symbolic_slice_brackets_match_tabulated_forms() {
        let tab = slice_brackets_tabulated();
        for k in 0..3 {
            assert!(slice_brackets()[k].agreement(&tab[k]).unwrap().holds(), "X1{}", k + 2);
        }
    }

    #[test]
    fn controllable_at_reference_point() {
        let r = controllability(&q0(), RANK_TOL).unwrap();
        assert_eq!(r.growth, (4, 7));
        assert!(r.det_gbar.abs() > 1e-6);
    }

    #[test]
    fn dynamic_pair_ranks_do_not_depend_on_leg_scaling() {
        let base = check_dynamic_pair(&q0(), 1.0).unwrap();
        assert_eq!((base.rank_v0, base.rank_v1, base.transversal), (3, 6, true));
        assert!(check_dynamic_pair(&q0(), 0.0).is_err());
        // Scaling X2..X4 by constants leaves the spans unchanged.
        let sys = TridentSystem::default();
        let c = q0().coords;
        let f = sys.frame(&c).unwrap();
        let scaled: Vec<Vec7> = [2.0, -3.0, 0.5].iter().zip(&f[1..]).map(|(s, x)| *s * x).collect();
        assert_eq!(span_rank(&scaled, RANK_TOL), 3);
    }
}
