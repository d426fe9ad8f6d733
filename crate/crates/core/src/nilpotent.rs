//! The nilpotent approximation at `q0 = (0, 0, π/2, 0, 1, 1, 1)`: adapted
//! coordinates, the frame `N1..N4`, the group law on ℝ⁷ for which the frame is
//! left-invariant, and the structural checks of the induced splitting
//! `E ⊕ V = ⟨N1⟩ ⊕ ⟨N2, N3, N4⟩`.

use std::sync::OnceLock;

use nalgebra::SMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, DIM};
use crate::field::{lie_bracket, Chart, VectorFieldSym};
use crate::numeric::{distance_to_span, span_rank, to_vec7, Vec7};
use crate::point::{AdaptedPoint, Configuration, GroupElement};
use crate::system::{ControlSystem, RANK_TOL};

pub type Matrix7 = SMatrix<f64, DIM, DIM>;

const X: usize = 0;
const L1: usize = 1;
const L2: usize = 2;
const L3: usize = 3;
const Y1: usize = 4;
const Y2: usize = 5;
const Y3: usize = 6;

fn half_sqrt3() -> f64 {
    0.5 * 3f64.sqrt()
}

/// Linear map from original to adapted coordinates (the change is linear, so
/// this is also its Jacobian).
pub fn adapted_jacobian() -> Matrix7 {
    let s = 3f64.sqrt();
    let mut j = Matrix7::zeros();
    j[(X, 0)] = 1.0;
    j[(L1, 4)] = 1.0;
    j[(L2, 5)] = 1.0;
    j[(L3, 6)] = 1.0;
    j[(Y1, 0)] = -2.0;
    j[(Y1, 1)] = -2.0 * s;
    j[(Y1, 2)] = -8.0;
    j[(Y2, 0)] = -0.8;
    j[(Y2, 2)] = 1.6;
    j[(Y2, 3)] = 0.8;
    j[(Y3, 0)] = -2.0;
    j[(Y3, 1)] = 2.0 * s;
    j[(Y3, 2)] = -8.0;
    j
}

/// Original chart → adapted chart.
pub fn to_adapted(q: &Configuration) -> Result<AdaptedPoint> {
    q.expect_chart(Chart::Original)?;
    let [x, y, th, phi, l1, l2, l3] = q.coords;
    let s = 3f64.sqrt();
    Ok(AdaptedPoint([
        x,
        l1,
        l2,
        l3,
        -2.0 * x - 2.0 * s * y - 8.0 * th,
        0.8 * phi - 0.8 * x + 1.6 * th,
        -2.0 * x + 2.0 * s * y - 8.0 * th,
    ]))
}

/// Adapted chart → original chart.
pub fn from_adapted(p: &AdaptedPoint) -> Configuration {
    let [x, l1, l2, l3, y1, y2, y3] = p.0;
    Configuration::original([
        x,
        -(3f64.sqrt() / 12.0) * (y1 - y3),
        -(y1 + y3) / 16.0 - 0.25 * x,
        1.25 * y2 + 1.5 * x + 0.125 * y1 + 0.125 * y3,
        l1,
        l2,
        l3,
    ])
}

fn v(i: usize) -> Expr {
    Expr::var(i)
}

/// `N1 = ∂x − (−(√3/2)x + ℓ1 − 1)∂y1 − (ℓ2 − 1)∂y2 − ((√3/2)x + ℓ3 − 1)∂y3`,
/// `N2 = ∂ℓ1`, `N3 = ∂ℓ2`, `N4 = ∂ℓ3`.
pub fn nilpotent_frame() -> &'static [VectorFieldSym; 4] {
    static CELL: OnceLock<[VectorFieldSym; 4]> = OnceLock::new();
    CELL.get_or_init(|| {
        let hx = || Expr::sqrt3() / Expr::int(2) * v(X);
        let n1 = VectorFieldSym::new(
            Chart::Adapted,
            [
                Expr::one(),
                Expr::zero(),
                Expr::zero(),
                Expr::zero(),
                -(-hx() + v(L1) - Expr::one()),
                -(v(L2) - Expr::one()),
                -(hx() + v(L3) - Expr::one()),
            ],
        )
        .simplify();
        [
            n1,
            VectorFieldSym::coordinate(Chart::Adapted, L1),
            VectorFieldSym::coordinate(Chart::Adapted, L2),
            VectorFieldSym::coordinate(Chart::Adapted, L3),
        ]
    })
}

/// Symbolic bracket table `[Nᵢ, Nⱼ]`, indices `0..4`.
pub fn bracket_table() -> &'static [[VectorFieldSym; 4]; 4] {
    static CELL: OnceLock<[[VectorFieldSym; 4]; 4]> = OnceLock::new();
    CELL.get_or_init(|| {
        let n = nilpotent_frame();
        std::array::from_fn(|i| std::array::from_fn(|j| lie_bracket(&n[i], &n[j]).expect("same chart")))
    })
}

/// `N12, N13, N14` (the brackets of `N1` with `N2, N3, N4`).
pub fn bracket_fields() -> [VectorFieldSym; 3] {
    let t = bracket_table();
    [t[0][1].clone(), t[0][2].clone(), t[0][3].clone()]
}

/// All seven left-invariant frame fields `N1..N4, N12, N13, N14`.
pub fn full_frame() -> Vec<VectorFieldSym> {
    let mut out = nilpotent_frame().to_vec();
    out.extend(bracket_fields());
    out
}

fn n1_numeric(p: &[f64; DIM]) -> Vec7 {
    let h = half_sqrt3() * p[X];
    Vec7::from_column_slice(&[
        1.0,
        0.0,
        0.0,
        0.0,
        -(-h + p[L1] - 1.0),
        -(p[L2] - 1.0),
        -(h + p[L3] - 1.0),
    ])
}

/// Group product of the nilpotent group `N ≅ ℝ⁷`.
pub fn group_mul(p: &GroupElement, q: &GroupElement) -> GroupElement {
    let [x, l1, l2, l3, y1, y2, y3] = p.0;
    let [xb, l1b, l2b, l3b, y1b, y2b, y3b] = q.0;
    let h = half_sqrt3();
    AdaptedPoint([
        x + xb,
        l1 + l1b,
        l2 + l2b,
        l3 + l3b,
        y1 + y1b + h * x * xb - l1 * xb,
        y2 + y2b - l2 * xb,
        y3 + y3b - h * x * xb - l3 * xb,
    ])
}

/// Two-sided inverse under [`group_mul`].
pub fn group_inverse(p: &GroupElement) -> GroupElement {
    let [x, l1, l2, l3, y1, y2, y3] = p.0;
    let h = half_sqrt3();
    AdaptedPoint([
        -x,
        -l1,
        -l2,
        -l3,
        -y1 + h * x * x - l1 * x,
        -y2 - l2 * x,
        -y3 - h * x * x - l3 * x,
    ])
}

/// Jacobian of left translation `p ↦ g·p`; it does not depend on `p`.
pub fn left_translation_jacobian(g: &GroupElement) -> Matrix7 {
    let [x, l1, l2, l3, ..] = g.0;
    let h = half_sqrt3();
    let mut j = Matrix7::identity();
    j[(Y1, X)] = h * x - l1;
    j[(Y2, X)] = -l2;
    j[(Y3, X)] = -h * x - l3;
    j
}

#[derive(Clone, Debug, Serialize)]
pub struct LeftInvarianceReport {
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl LeftInvarianceReport {
    pub fn holds(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

/// Tolerance for `dL_g X(p) = X(g·p)`.
pub const LEFT_INVARIANCE_TOL: f64 = 1e-9;

fn random_adapted(rng: &mut impl Rng) -> AdaptedPoint {
    AdaptedPoint(std::array::from_fn(|_| rng.gen_range(-2.0..2.0)))
}

/// Samples random pairs `(g, p)` and measures `|dL_g X(p) − X(g·p)|`.
pub fn check_left_invariance(field: &VectorFieldSym, samples: usize, seed: u64) -> Result<LeftInvarianceReport> {
    if field.chart() != Chart::Adapted {
        return Err(Error::ChartMismatch {
            expected: Chart::Adapted,
            found: field.chart(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual: f64 = 0.0;
    for _ in 0..samples {
        let g = random_adapted(&mut rng);
        let p = random_adapted(&mut rng);
        let pushed = left_translation_jacobian(&g) * to_vec7(&field.eval(&p.0)?);
        let moved = to_vec7(&field.eval(&group_mul(&g, &p).0)?);
        max_residual = max_residual.max((pushed - moved).amax());
    }
    Ok(LeftInvarianceReport {
        samples,
        max_residual,
        tolerance: LEFT_INVARIANCE_TOL,
    })
}

/// Distance of `[ξ, ν](q)` from `E_q ⊕ V_q = span(N1..N4)(q)`.
pub fn bracket_distance_from_distribution(
    xi: &VectorFieldSym,
    nu: &VectorFieldSym,
    q: &[f64; DIM],
) -> Result<f64> {
    let b = lie_bracket(xi, nu)?;
    let basis: Vec<Vec7> = nilpotent_frame()
        .iter()
        .map(|n| n.eval(q).map(|v| to_vec7(&v)))
        .collect::<Result<_>>()?;
    Ok(distance_to_span(&to_vec7(&b.eval(q)?), &basis))
}

#[derive(Clone, Debug, Serialize)]
pub struct PathGeometryReport {
    pub samples: usize,
    /// `E ∩ V = 0`
    pub transverse: bool,
    /// `[Γ(V), Γ(V)] ⊂ Γ(E ⊕ V)`
    pub v_brackets_closed: bool,
    pub max_v_bracket_residual: f64,
    /// `[ξ, ν](q) ∉ E ⊕ V` for nonvanishing `ξ ∈ Γ(E)`, `ν ∈ Γ(V)`
    pub mixed_brackets_escape: bool,
    pub min_mixed_bracket_residual: f64,
}

impl PathGeometryReport {
    pub fn holds(&self) -> bool {
        self.transverse && self.v_brackets_closed && self.mixed_brackets_escape
    }
}

fn random_affine(rng: &mut impl Rng) -> Expr {
    let mut terms = vec![Expr::int(rng.gen_range(-4..=4))];
    for i in 0..DIM {
        let c = rng.gen_range(-3..=3);
        if c != 0 {
            terms.push(Expr::int(c) * v(i));
        }
    }
    Expr::Add(terms)
}

fn random_v_section(rng: &mut impl Rng) -> VectorFieldSym {
    let n = nilpotent_frame();
    let mut acc = VectorFieldSym::zero(Chart::Adapted);
    for nk in &n[1..] {
        acc = acc.try_add(&nk.scale(&random_affine(rng))).expect("same chart");
    }
    acc
}

/// Checks the three structural conditions of a generalized path geometry on
/// randomly drawn sections with affine coefficient functions.
pub fn check_path_geometry_conditions(samples: usize, seed: u64) -> Result<PathGeometryReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = nilpotent_frame();
    let mut transverse = true;
    let mut max_v: f64 = 0.0;
    let mut min_mixed = f64::INFINITY;
    for _ in 0..samples {
        let q = random_adapted(&mut rng).0;
        let frame: Vec<Vec7> = n.iter().map(|f| f.eval(&q).map(|v| to_vec7(&v))).collect::<Result<_>>()?;
        transverse &= span_rank(&frame[..1], RANK_TOL) + span_rank(&frame[1..], RANK_TOL)
            == span_rank(&frame, RANK_TOL);

        let (a, b) = (random_v_section(&mut rng), random_v_section(&mut rng));
        max_v = max_v.max(bracket_distance_from_distribution(&a, &b, &q)?);

        let f = random_affine(&mut rng);
        let xi = n[0].scale(&f);
        let nu = random_v_section(&mut rng);
        if f.eval(&q)?.abs() < 1e-3 || to_vec7(&nu.eval(&q)?).norm() < 1e-3 {
            continue;
        }
        min_mixed = min_mixed.min(bracket_distance_from_distribution(&xi, &nu, &q)?);
    }
    Ok(PathGeometryReport {
        samples,
        transverse,
        v_brackets_closed: max_v <= 1e-9,
        max_v_bracket_residual: max_v,
        mixed_brackets_escape: min_mixed > 1e-9,
        min_mixed_bracket_residual: min_mixed,
    })
}

/// The left-invariant control system `q̇ = Σ uᵢ Nᵢ(q)` in the adapted chart.
#[derive(Clone, Copy, Debug, Default)]
pub struct NilpotentSystem;

impl NilpotentSystem {
    pub fn new() -> Self {
        Self
    }
}

impl ControlSystem for NilpotentSystem {
    fn name(&self) -> &'static str {
        "nilpotent"
    }

    fn chart(&self) -> Chart {
        Chart::Adapted
    }

    fn frame(&self, q: &[f64; DIM]) -> Result<[Vec7; 4]> {
        let e = |i: usize| {
            let mut v = Vec7::zeros();
            v[i] = 1.0;
            v
        };
        Ok([n1_numeric(q), e(L1), e(L2), e(L3)])
    }

    fn bracket(&self, i: usize, j: usize, q: &[f64; DIM]) -> Result<Vec7> {
        Ok(to_vec7(&bracket_table()[i][j].eval(q)?))
    }

    fn annihilator(&self, q: &[f64; DIM]) -> Result<[Vec7; 3]> {
        let n1 = n1_numeric(q);
        Ok([Y1, Y2, Y3].map(|k| {
            let mut mu = Vec7::zeros();
            mu[k] = 1.0;
            mu[X] = -n1[k];
            mu
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn reference_point_in_adapted_chart() {
        let p = to_adapted(&Configuration::reference()).unwrap();
        let expected = [0.0, 1.0, 1.0, 1.0, -4.0 * PI, 0.8 * PI, -4.0 * PI];
        for i in 0..DIM {
            assert_abs_diff_eq!(p.0[i], expected[i], epsilon = 1e-12);
        }
        let back = from_adapted(&AdaptedPoint(expected));
        for i in 0..DIM {
            assert_abs_diff_eq!(back.coords[i], Configuration::reference().coords[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn origins_correspond() {
        assert_eq!(to_adapted(&Configuration::original([0.0; DIM])).unwrap(), AdaptedPoint::ORIGIN);
        assert_eq!(from_adapted(&AdaptedPoint::ORIGIN).coords, [0.0; DIM]);
        assert!(to_adapted(&Configuration::adapted([0.0; DIM])).is_err());
    }

    #[test]
    fn jacobian_matches_transform() {
        let q = Configuration::original([0.3, -0.7, 1.1, 0.2, 0.9, 1.4, 0.6]);
        let a = to_adapted(&q).unwrap();
        let lin = adapted_jacobian() * to_vec7(&q.coords);
        for i in 0..DIM {
            assert_abs_diff_eq!(a.0[i], lin[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn n1_at_origin() {
        let v = nilpotent_frame()[0].eval(&[0.0; DIM]).unwrap();
        assert_eq!(v, [1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(nilpotent_frame()[1].eval(&[0.0; DIM]).unwrap(), [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn group_product_example() {
        let p = group_mul(&AdaptedPoint([1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]), &AdaptedPoint([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        let h = half_sqrt3();
        let expected = [2.0, 1.0, 0.0, 0.0, h - 1.0, 0.0, -h];
        for i in 0..DIM {
            assert_abs_diff_eq!(p.0[i], expected[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn inverse_with_zero_x_negates() {
        let p = AdaptedPoint([0.0, 1.0, -2.0, 3.0, 0.5, -0.25, 4.0]);
        assert_eq!(group_inverse(&p).0, p.0.map(|c| -c));
        assert_eq!(group_inverse(&AdaptedPoint::ORIGIN), AdaptedPoint::ORIGIN);
    }

    #[test]
    fn jacobian_of_left_translation_matches_differences() {
        let g = AdaptedPoint([0.4, -1.2, 0.3, 0.8, 0.1, 0.2, 0.3]);
        let p = AdaptedPoint([-0.5, 0.6, 1.1, -0.2, 0.9, -0.4, 0.7]);
        let j = left_translation_jacobian(&g);
        for c in 0..DIM {
            let mut plus = p;
            let mut minus = p;
            plus.0[c] += 1e-6;
            minus.0[c] -= 1e-6;
            let (a, b) = (group_mul(&g, &plus), group_mul(&g, &minus));
            for r in 0..DIM {
                assert_abs_diff_eq!((a.0[r] - b.0[r]) / 2e-6, j[(r, c)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn coordinate_dx_is_not_left_invariant() {
        let dx = VectorFieldSym::coordinate(Chart::Adapted, X);
        assert!(!check_left_invariance(&dx, 10, 1).unwrap().holds());
    }

    #[test]
    fn constant_y_fields_are_left_invariant() {
        let f = VectorFieldSym::constant(Chart::Adapted, [0, 0, 0, 0, 3, -1, 2]);
        assert!(check_left_invariance(&f, 50, 2).unwrap().holds());
    }

    #[test]
    fn left_invariance_requires_adapted_chart() {
        let f = VectorFieldSym::coordinate(Chart::Original, 0);
        assert!(matches!(check_left_invariance(&f, 1, 0), Err(Error::ChartMismatch { .. })));
    }

    #[test]
    fn commuting_v_sections() {
        let n = nilpotent_frame();
        let d = bracket_distance_from_distribution(&n[1], &n[2], &[0.3; DIM]).unwrap();
        assert_eq!(d, 0.0);
        assert!(lie_bracket(&n[1], &n[2]).unwrap().is_zero());
    }

    #[test]
    fn mixed_bracket_leaves_distribution_at_origin() {
        let n = nilpotent_frame();
        let d = bracket_distance_from_distribution(&n[0], &n[1], &[0.0; DIM]).unwrap();
        assert!(d > 0.1);
    }

    #[test]
    fn vanishing_e_section_escapes_condition_three() {
        // ξ = x·N1 vanishes at the origin, so its bracket with N2 must stay in E ⊕ V there.
        let n = nilpotent_frame();
        let xi = n[0].scale(&Expr::var(X));
        let d = bracket_distance_from_distribution(&xi, &n[1], &[0.0; DIM]).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn annihilator_kills_frame() {
        let sys = NilpotentSystem::new();
        let q = [0.3, -0.4, 1.2, 0.5, 2.0, -1.0, 0.1];
        for mu in sys.annihilator(&q).unwrap() {
            for x in sys.frame(&q).unwrap() {
                assert!(mu.dot(&x).abs() < 1e-15);
            }
        }
    }
}
