//! Infinitesimal symmetries of the nilpotent sub-Riemannian structure.
//!
//! Two families are built explicitly: the transitive nilpotent algebra
//! `w1..w4, w12, w13, w14` (generating left multiplications) and the isotropy
//! algebra `so(3) = ⟨v1, v2, v3⟩` fixing the origin. For the latter every claim
//! is checked symbolically: `[v, N1] = 0`, `[v, V] ⊂ V` with a constant
//! antisymmetric coefficient matrix, and the `so(3)` commutation relations.

use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, DIM};
use crate::field::{lie_bracket, Agreement, Chart, VectorFieldSym};
use crate::nilpotent::nilpotent_frame;
use crate::numeric::{distance_to_span, rank, rk4_step, to_vec7, uniform_steps, Vec7};
use crate::point::AdaptedPoint;

const X: usize = 0;
const L1: usize = 1;
const L2: usize = 2;
const L3: usize = 3;
const Y1: usize = 4;
const Y2: usize = 5;
const Y3: usize = 6;

/// A named vector field in the adapted chart.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryField {
    pub name: String,
    pub field: VectorFieldSym,
}

fn v(i: usize) -> Expr {
    Expr::var(i)
}

/// `(√3/4)·x²`
fn quarter_sqrt3_x2() -> Expr {
    Expr::sqrt3() / Expr::int(4) * v(X).powi(2)
}

fn field(entries: &[(usize, Expr)]) -> VectorFieldSym {
    let mut comps: [Expr; DIM] = std::array::from_fn(|_| Expr::zero());
    for (i, e) in entries {
        comps[*i] = e.clone();
    }
    VectorFieldSym::new(Chart::Adapted, comps).simplify()
}

impl SymmetryField {
    pub fn new(name: impl Into<String>, field: VectorFieldSym) -> Self {
        Self {
            name: name.into(),
            field,
        }
    }

    pub fn v1() -> Self {
        let q = quarter_sqrt3_x2;
        Self::new(
            "v1",
            field(&[
                (L2, -v(L3)),
                (L3, v(L2)),
                (Y2, -(q() - v(X) + v(Y3))),
                (Y3, -(v(X) - v(Y2))),
            ]),
        )
    }

    pub fn v2() -> Self {
        let q = quarter_sqrt3_x2;
        Self::new(
            "v2",
            field(&[
                (L1, v(L3)),
                (L3, -v(L1)),
                (Y1, q() - v(X) + v(Y3)),
                (Y3, q() + v(X) - v(Y1)),
            ]),
        )
    }

    pub fn v3() -> Self {
        let q = quarter_sqrt3_x2;
        Self::new(
            "v3",
            field(&[
                (L1, -v(L2)),
                (L2, v(L1)),
                (Y1, v(X) - v(Y2)),
                (Y2, -(q() + v(X) - v(Y1))),
            ]),
        )
    }

    /// `a1·v1 + a2·v2 + a3·v3` with exact (binary) coefficients.
    pub fn combination(a: [f64; 3]) -> Result<Self> {
        if a.iter().all(|&c| c == 0.0) {
            return Err(Error::ZeroCombination);
        }
        if a.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite symmetry coefficient".into()));
        }
        let mut acc = VectorFieldSym::zero(Chart::Adapted);
        for (c, g) in a.iter().zip([Self::v1(), Self::v2(), Self::v3()]) {
            if *c != 0.0 {
                acc = acc.try_add(&g.field.scale(&Expr::from_f64(*c)))?;
            }
        }
        Ok(Self::new(format!("{}·v1 + {}·v2 + {}·v3", a[0], a[1], a[2]), acc))
    }

    /// The transitive nilpotent family `w1, w2, w3, w4, w12, w13, w14`.
    pub fn w_family() -> [Self; 7] {
        let h = || Expr::sqrt3() / Expr::int(2);
        [
            Self::new("w1", field(&[(X, Expr::int(-1)), (L1, -h()), (Y3, h() * v(X))])),
            Self::new("w2", field(&[(L1, Expr::one()), (Y1, -v(X))])),
            Self::new("w3", field(&[(L2, Expr::one()), (Y2, -v(X))])),
            Self::new("w4", field(&[(L3, Expr::one()), (Y3, -v(X))])),
            Self::new("w12", VectorFieldSym::coordinate(Chart::Adapted, Y1)),
            Self::new("w13", VectorFieldSym::coordinate(Chart::Adapted, Y2)),
            Self::new("w14", VectorFieldSym::coordinate(Chart::Adapted, Y3)),
        ]
    }

    /// Multiplies component `index` by `1 + delta`; used to exercise failure paths.
    pub fn perturbed(&self, index: usize, delta: f64) -> Self {
        let mut comps = self.field.components().clone();
        comps[index] = (Expr::one() + Expr::from_f64(delta)) * comps[index].clone();
        Self::new(
            format!("{} (perturbed)", self.name),
            VectorFieldSym::new(Chart::Adapted, comps).simplify(),
        )
    }

    pub fn eval(&self, p: &AdaptedPoint) -> Result<Vec7> {
        Ok(to_vec7(&self.field.eval(&p.0)?))
    }
}

/// Sup-norm of a field over seeded random points in `[−2, 2]⁷`.
pub fn sampled_norm(f: &VectorFieldSym, samples: usize) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e7);
    let mut max: f64 = 0.0;
    for _ in 0..samples {
        let p: [f64; DIM] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        max = max.max(to_vec7(&f.eval(&p)?).amax());
    }
    Ok(max)
}

#[derive(Clone, Debug)]
pub struct So3Table {
    /// `brackets[i][j] = [vᵢ, vⱼ]`
    pub brackets: [[VectorFieldSym; 3]; 3],
    /// `[v1,v2] = −v3`, `[v1,v3] = v2`, `[v2,v3] = −v1`, all structurally exact.
    pub relations_hold: bool,
}

/// Bracket table of `(v1, v2, v3)`.
pub fn so3_structure() -> Result<So3Table> {
    let v = [SymmetryField::v1(), SymmetryField::v2(), SymmetryField::v3()];
    let mut brackets: [[VectorFieldSym; 3]; 3] =
        std::array::from_fn(|_| std::array::from_fn(|_| VectorFieldSym::zero(Chart::Adapted)));
    for i in 0..3 {
        for j in 0..3 {
            brackets[i][j] = lie_bracket(&v[i].field, &v[j].field)?;
        }
    }
    let expected = [
        (0, 1, v[2].field.scale(&Expr::int(-1))),
        (0, 2, v[1].field.clone()),
        (1, 2, v[0].field.scale(&Expr::int(-1))),
    ];
    let mut relations_hold = true;
    for (i, j, rhs) in &expected {
        relations_hold &= brackets[*i][*j].try_sub(rhs)?.is_zero();
    }
    Ok(So3Table {
        brackets,
        relations_hold,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub name: String,
    /// Sup-norm of `[v, N1]` (structurally zero when it passes).
    pub n1_residual: f64,
    /// `[v, N_{j+2}] = Σₖ a[j][k] N_{k+2}`
    pub coefficients: [[f64; 3]; 3],
    /// `max |A + Aᵀ|`
    pub antisymmetry_residual: f64,
}

/// Verifies that `v` preserves `N1`, the subbundle `V` (with constant
/// coefficients) and the metric (antisymmetric coefficient matrix).
pub fn check_symmetry_conditions(v: &SymmetryField) -> Result<SymmetryReport> {
    let n = nilpotent_frame();
    let not_symmetry = |reason: &str, residual: f64| Error::NotASymmetry {
        name: v.name.clone(),
        reason: reason.to_string(),
        residual,
    };

    let to_n1 = lie_bracket(&v.field, &n[0])?;
    if !to_n1.is_zero() {
        return Err(not_symmetry("[v, N1] does not vanish", sampled_norm(&to_n1, 20)?));
    }

    let mut a = [[0.0; 3]; 3];
    for j in 0..3 {
        let b = lie_bracket(&v.field, &n[j + 1])?;
        for (i, c) in b.components().iter().enumerate() {
            let in_v = (L1..=L3).contains(&i);
            if !in_v && !c.is_zero() {
                let mut stray = VectorFieldSym::zero(Chart::Adapted).components().clone();
                stray[i] = c.clone();
                let residual = sampled_norm(&VectorFieldSym::new(Chart::Adapted, stray), 20)?;
                return Err(not_symmetry("[v, V] leaves V", residual));
            }
            if in_v {
                if !c.is_constant() {
                    return Err(not_symmetry("[v, V] has non-constant coefficients", f64::NAN));
                }
                a[j][i - L1] = c.eval(&[0.0; DIM])?;
            }
        }
    }
    let m = Matrix3::from_fn(|r, c| a[r][c]);
    let antisymmetry_residual = (m + m.transpose()).amax();
    if antisymmetry_residual > 1e-12 {
        return Err(not_symmetry("coefficient matrix is not antisymmetric", antisymmetry_residual));
    }
    Ok(SymmetryReport {
        name: v.name.clone(),
        n1_residual: 0.0,
        coefficients: a,
        antisymmetry_residual,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct WAlgebraReport {
    /// `[wᵢ, wⱼ] = Σₖ c[i][j][k]·w1k` for `i, j ∈ {w1..w4}`.
    pub structure_constants: [[[f64; 3]; 4]; 4],
    /// Brackets land in span(w12, w13, w14) with constant coefficients and
    /// every bracket involving w12..w14 vanishes.
    pub closes: bool,
}

/// Bracket closure of the `w` family.
pub fn w_algebra_closure() -> Result<WAlgebraReport> {
    let w = SymmetryField::w_family();
    let mut c = [[[0.0; 3]; 4]; 4];
    let mut closes = true;
    for i in 0..7 {
        for j in 0..7 {
            let b = lie_bracket(&w[i].field, &w[j].field)?;
            for (k, comp) in b.components().iter().enumerate() {
                let centre = (Y1..=Y3).contains(&k);
                if comp.is_zero() {
                    continue;
                }
                if !centre || !comp.is_constant() || i >= 4 || j >= 4 {
                    closes = false;
                    continue;
                }
                c[i][j][k - Y1] = comp.eval(&[0.0; DIM])?;
            }
        }
    }
    Ok(WAlgebraReport {
        structure_constants: c,
        closes,
    })
}

/// Rank of the matrix of `w`-values at `p`.
pub fn w_orbit_rank(p: &AdaptedPoint, rel_tol: f64) -> Result<usize> {
    let w = SymmetryField::w_family();
    let cols: Vec<Vec7> = w.iter().map(|f| f.eval(p)).collect::<Result<_>>()?;
    let m = DMatrix::from_fn(DIM, DIM, |r, c| cols[c][r]);
    Ok(rank(&m, rel_tol))
}

/// A point fixed by the flow of `a1·v1 + a2·v2 + a3·v3`:
/// `(x, k·a, x + (√3/4)x² + k·a1, x + k·a2, x − (√3/4)x² + k·a3)`.
pub fn fixed_point_set(a: [f64; 3], x: f64, k: f64) -> Result<AdaptedPoint> {
    if a.iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroCombination);
    }
    let q = 0.25 * 3f64.sqrt() * x * x;
    Ok(AdaptedPoint([
        x,
        k * a[0],
        k * a[1],
        k * a[2],
        x + q + k * a[0],
        x + k * a[1],
        x - q + k * a[2],
    ]))
}

/// Flows `p` along `v` for time `t` (either sign) with RK4 steps of size at most `dt`.
pub fn symmetry_flow(v: &SymmetryField, p: &AdaptedPoint, t: f64, dt: f64) -> Result<AdaptedPoint> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if t == 0.0 {
        return Ok(*p);
    }
    let (n, h) = uniform_steps(t.abs(), dt);
    let h = h * t.signum();
    let mut rhs = |_s: f64, y: &[f64; DIM]| v.field.eval(y);
    let mut y = p.0;
    for k in 0..n {
        y = rk4_step(&mut rhs, k as f64 * h, &y, h)?;
    }
    Ok(AdaptedPoint(y))
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowInvarianceReport {
    /// Largest distance of a pushed tangent from `span(N1..N4)`.
    pub horizontality_residual: f64,
    pub length_before: f64,
    pub length_after: f64,
    pub relative_length_change: f64,
}

/// Pushes a horizontal curve (samples of position and velocity) through the
/// flow of `v` for time `s` and compares horizontality and sub-Riemannian length.
pub fn flow_curve_invariance(
    v: &SymmetryField,
    times: &[f64],
    points: &[AdaptedPoint],
    velocities: &[Vec7],
    s: f64,
    dt: f64,
) -> Result<FlowInvarianceReport> {
    if times.len() != points.len() || points.len() != velocities.len() || times.len() < 2 {
        return Err(Error::InvalidParameter("curve samples must align and number at least two".into()));
    }
    let n = nilpotent_frame();
    let h = 1e-6;
    let speed = |q: &AdaptedPoint, w: &Vec7| -> Result<(f64, f64)> {
        let basis: Vec<Vec7> = n.iter().map(|f| f.eval(&q.0).map(|e| to_vec7(&e))).collect::<Result<_>>()?;
        // N1 carries the only ∂x component, N2..N4 are ∂ℓ: controls are read off directly.
        let u = [w[X], w[L1], w[L2], w[L3]];
        Ok((u.iter().map(|c| c * c).sum::<f64>().sqrt(), distance_to_span(w, &basis)))
    };
    let mut before = Vec::with_capacity(times.len());
    let mut after = Vec::with_capacity(times.len());
    let mut horiz: f64 = 0.0;
    for (p, w) in points.iter().zip(velocities) {
        before.push(speed(p, w)?.0);
        let moved = symmetry_flow(v, p, s, dt)?;
        let plus = AdaptedPoint(std::array::from_fn(|i| p.0[i] + h * w[i]));
        let minus = AdaptedPoint(std::array::from_fn(|i| p.0[i] - h * w[i]));
        let pushed = (to_vec7(&symmetry_flow(v, &plus, s, dt)?.0) - to_vec7(&symmetry_flow(v, &minus, s, dt)?.0)) / (2.0 * h);
        let (sp, res) = speed(&moved, &pushed)?;
        after.push(sp);
        horiz = horiz.max(res);
    }
    let integrate = |f: &[f64]| -> f64 {
        times
            .windows(2)
            .zip(f.windows(2))
            .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
            .sum()
    };
    let (lb, la) = (integrate(&before), integrate(&after));
    Ok(FlowInvarianceReport {
        horizontality_residual: horiz,
        length_before: lb,
        length_after: la,
        relative_length_change: (la - lb).abs() / lb.abs().max(f64::MIN_POSITIVE),
    })
}

/// Agreement of a symbolic identity, exposed for reports.
pub fn relation_agreement(lhs: &VectorFieldSym, rhs: &VectorFieldSym) -> Result<Agreement> {
    lhs.agreement(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn so3_relations_are_exact() {
        let t = so3_structure().unwrap();
        assert!(t.relations_hold);
        assert!(t.brackets[0][0].is_zero());
        let sum = t.brackets[1][2].try_add(&SymmetryField::v1().field).unwrap();
        assert!(sum.is_zero());
    }

    #[test]
    fn v1_rotates_about_l1_axis() {
        let r = check_symmetry_conditions(&SymmetryField::v1()).unwrap();
        // [v1, N3] = −N4, [v1, N4] = N3
        assert_eq!(r.coefficients, [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]);
    }

    #[test]
    fn generators_pinned_coefficients() {
        let a2 = check_symmetry_conditions(&SymmetryField::v2()).unwrap().coefficients;
        let a3 = check_symmetry_conditions(&SymmetryField::v3()).unwrap().coefficients;
        assert_eq!(a2, [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]);
        assert_eq!(a3, [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
    }

    #[test]
    fn combination_is_a_symmetry() {
        let v = SymmetryField::combination([0.5, -1.25, 2.0]).unwrap();
        assert!(check_symmetry_conditions(&v).is_ok());
        assert!(matches!(SymmetryField::combination([0.0; 3]), Err(Error::ZeroCombination)));
    }

    #[test]
    fn x_dl1_is_not_a_symmetry() {
        let f = SymmetryField::new("x·∂ℓ1", field(&[(L1, v(X))]));
        assert!(matches!(check_symmetry_conditions(&f), Err(Error::NotASymmetry { .. })));
    }

    #[test]
    fn perturbed_v1_fails_with_residual() {
        let f = SymmetryField::v1().perturbed(L3, 0.01);
        match check_symmetry_conditions(&f) {
            Err(Error::NotASymmetry { residual, .. }) => assert!(residual > 1e-3 && residual < 0.1),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn isotropy_fields_vanish_at_origin() {
        for g in [SymmetryField::v1(), SymmetryField::v2(), SymmetryField::v3()] {
            assert_eq!(g.eval(&AdaptedPoint::ORIGIN).unwrap().amax(), 0.0);
        }
    }

    #[test]
    fn central_curve_and_axis_points() {
        let p = fixed_point_set([1.0, 0.0, 0.0], 0.7, 0.0).unwrap();
        let q = 0.25 * 3f64.sqrt() * 0.49;
        let want = [0.7, 0.0, 0.0, 0.0, 0.7 + q, 0.7, 0.7 - q];
        assert!(p.0.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15));
        let p = fixed_point_set([1.0, 0.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(p.0, [0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(SymmetryField::v1().eval(&p).unwrap().amax(), 0.0);
        assert!(fixed_point_set([0.0; 3], 1.0, 1.0).is_err());
    }

    #[test]
    fn flow_fixes_fixed_points_and_reverses() {
        let v = SymmetryField::v1();
        let fixed = fixed_point_set([1.0, 0.0, 0.0], 0.3, 0.8).unwrap();
        let moved = symmetry_flow(&v, &fixed, 2.0, 1e-3).unwrap();
        let drift = to_vec7(&moved.0) - to_vec7(&fixed.0);
        assert!(drift.amax() < 2e-9);

        let p = AdaptedPoint([0.2, 0.5, -0.3, 1.1, 0.4, -0.6, 0.9]);
        assert_eq!(symmetry_flow(&v, &p, 0.0, 1e-3).unwrap(), p);
        let there = symmetry_flow(&v, &p, 0.9, 1e-3).unwrap();
        let back = symmetry_flow(&v, &there, -0.9, 1e-3).unwrap();
        assert!((to_vec7(&back.0) - to_vec7(&p.0)).amax() < 1e-8);
        assert!(symmetry_flow(&v, &p, 1.0, 0.0).is_err());
    }

    #[test]
    fn w_family_is_transitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let p = AdaptedPoint(std::array::from_fn(|_| rng.gen_range(-2.0..2.0)));
            assert_eq!(w_orbit_rank(&p, 1e-9).unwrap(), 7);
        }
    }

    #[test]
    fn w_family_structure_constants() {
        let r = w_algebra_closure().unwrap();
        assert!(r.closes);
        assert_eq!(r.structure_constants[0][1], [1.0, 0.0, 0.0]);
        assert_eq!(r.structure_constants[0][2], [0.0, 1.0, 0.0]);
        assert_eq!(r.structure_constants[0][3], [0.0, 0.0, 1.0]);
        assert_eq!(r.structure_constants[1][2], [0.0; 3]);
    }
}
