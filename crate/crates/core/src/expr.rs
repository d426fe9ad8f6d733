//! Exact symbolic scalar expressions over the seven coordinates of a chart.
//!
//! Constants are kept exact: arbitrary-precision rationals plus the two
//! irrational tokens `√3` and `π` that appear in the mechanism's fields.
//! Floating point only enters through [`Expr::eval`].
//!
//! Simplification maps an expression onto a Laurent-polynomial normal form
//! whose "atoms" are coordinates, `√3`, `π`, `sin(u)`, `cos(u)` and inverses
//! of irreducible sums. Sums in denominators are scaled to a unit leading
//! coefficient so equal quotient factors merge; `√3² = 3` and
//! `sin² u + cos² u = 1` are applied to the normal form.

use std::collections::BTreeMap;
use std::fmt;
use std::ops;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Number of coordinates in every chart.
pub const DIM: usize = 7;

/// Denominators smaller than this in magnitude are reported as a division by zero.
pub const DIVISION_EPS: f64 = 1e-12;

/// Upper bound on the number of monomials produced while normalising.
const TERM_BUDGET: usize = 20_000;

/// Upper bound on `sin² + cos²` merges per simplification.
const TRIG_BUDGET: usize = 1_000;

/// A symbolic expression tree.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Num(BigRational),
    Sqrt3,
    Pi,
    Var(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Num(BigRational::zero())
    }

    pub fn one() -> Self {
        Expr::Num(BigRational::one())
    }

    pub fn int(n: i64) -> Self {
        Expr::Num(BigRational::from_integer(BigInt::from(n)))
    }

    /// The rational `num / den`. Panics if `den == 0`.
    pub fn rational(num: i64, den: i64) -> Self {
        Expr::Num(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Exact rational value of a finite float (its binary expansion).
    pub fn from_f64(value: f64) -> Self {
        Expr::Num(BigRational::from_float(value).expect("finite float"))
    }

    pub fn var(index: usize) -> Self {
        assert!(index < DIM, "coordinate index {index} out of range");
        Expr::Var(index)
    }

    pub fn sqrt3() -> Self {
        Expr::Sqrt3
    }

    pub fn pi() -> Self {
        Expr::Pi
    }

    pub fn sin(self) -> Self {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Cos(Box::new(self))
    }

    pub fn powi(self, n: i32) -> Self {
        Expr::Pow(Box::new(self), n)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(r) if r.is_zero())
    }

    /// True when no coordinate variable occurs in the tree.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Sqrt3 | Expr::Pi => true,
            Expr::Var(_) => false,
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().all(Expr::is_constant),
            Expr::Div(a, b) => a.is_constant() && b.is_constant(),
            Expr::Sin(a) | Expr::Cos(a) | Expr::Pow(a, _) => a.is_constant(),
        }
    }

    /// Floating-point evaluation at `p`.
    pub fn eval(&self, p: &[f64; DIM]) -> Result<f64> {
        Ok(match self {
            Expr::Num(r) => rational_to_f64(r),
            Expr::Sqrt3 => 3f64.sqrt(),
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(i) => p[*i],
            Expr::Add(xs) => {
                let mut acc = 0.0;
                for x in xs {
                    acc += x.eval(p)?;
                }
                acc
            }
            Expr::Mul(xs) => {
                let mut acc = 1.0;
                for x in xs {
                    acc *= x.eval(p)?;
                }
                acc
            }
            Expr::Div(a, b) => {
                let den = b.eval(p)?;
                if den.abs() < DIVISION_EPS {
                    return Err(Error::DivisionByZero { value: den });
                }
                a.eval(p)? / den
            }
            Expr::Sin(a) => a.eval(p)?.sin(),
            Expr::Cos(a) => a.eval(p)?.cos(),
            Expr::Pow(a, n) => {
                let base = a.eval(p)?;
                if *n < 0 && base.abs() < DIVISION_EPS {
                    return Err(Error::DivisionByZero { value: base });
                }
                base.powi(*n)
            }
        })
    }

    /// Exact partial derivative with respect to coordinate `coord`, simplified.
    pub fn differentiate(&self, coord: usize) -> Expr {
        self.diff_raw(coord).simplify()
    }

    fn diff_raw(&self, coord: usize) -> Expr {
        match self {
            Expr::Num(_) | Expr::Sqrt3 | Expr::Pi => Expr::zero(),
            Expr::Var(i) => {
                if *i == coord {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Add(xs) => Expr::Add(xs.iter().map(|x| x.diff_raw(coord)).collect()),
            Expr::Mul(xs) => {
                let mut terms = Vec::with_capacity(xs.len());
                for k in 0..xs.len() {
                    let dk = xs[k].diff_raw(coord);
                    if dk.is_zero() {
                        continue;
                    }
                    let mut factors = Vec::with_capacity(xs.len());
                    for (j, x) in xs.iter().enumerate() {
                        factors.push(if j == k { dk.clone() } else { x.clone() });
                    }
                    terms.push(Expr::Mul(factors));
                }
                Expr::Add(terms)
            }
            Expr::Div(a, b) => {
                let num = Expr::Add(vec![
                    Expr::Mul(vec![a.diff_raw(coord), (**b).clone()]),
                    Expr::Mul(vec![Expr::int(-1), (**a).clone(), b.diff_raw(coord)]),
                ]);
                Expr::Div(Box::new(num), Box::new((**b).clone().powi(2)))
            }
            Expr::Sin(a) => Expr::Mul(vec![(**a).clone().cos(), a.diff_raw(coord)]),
            Expr::Cos(a) => Expr::Mul(vec![Expr::int(-1), (**a).clone().sin(), a.diff_raw(coord)]),
            Expr::Pow(a, n) => {
                if *n == 0 {
                    return Expr::zero();
                }
                Expr::Mul(vec![
                    Expr::int(*n as i64),
                    (**a).clone().powi(n - 1),
                    a.diff_raw(coord),
                ])
            }
        }
    }

    /// Rule-based simplification into the normal form described in the module docs.
    ///
    /// If normalisation would exceed the rewrite budget the tree is returned
    /// with only constant folding applied; callers that compare such results
    /// fall back to evaluation.
    pub fn simplify(&self) -> Expr {
        match to_poly(self) {
            Some(mut poly) => {
                merge_pythagorean(&mut poly);
                from_poly(&poly)
            }
            None => self.clone(),
        }
    }

    /// Display using the given coordinate names.
    pub fn display<'a>(&'a self, names: &'a [&'a str; DIM]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
    })
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(vec![self, rhs])
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Add(vec![self, -rhs])
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(vec![self, rhs])
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(rhs))
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Mul(vec![Expr::int(-1), self])
    }
}

// ---------------------------------------------------------------------------
// Normal form

type Monomial = BTreeMap<Expr, i32>;

#[derive(Clone, Debug, Default, PartialEq)]
struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    fn constant(c: BigRational) -> Poly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::new(), c);
        }
        Poly { terms }
    }

    fn atom(a: Expr, exp: i32) -> Poly {
        let mut m = Monomial::new();
        m.insert(a, exp);
        let (c, m) = normalize_monomial(m);
        let mut terms = BTreeMap::new();
        terms.insert(m, c);
        Poly { terms }
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    fn add(mut self, other: &Poly) -> Poly {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
        self
    }

    fn mul(&self, other: &Poly) -> Option<Poly> {
        if self.terms.len().saturating_mul(other.terms.len()) > TERM_BUDGET {
            return None;
        }
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut m = ma.clone();
                for (atom, e) in mb {
                    *m.entry(atom.clone()).or_insert(0) += e;
                }
                let (k, m) = normalize_monomial(m);
                out.add_term(m, k * ca * cb);
            }
        }
        Some(out)
    }

    fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Monomial::new()).cloned(),
            _ => None,
        }
    }

    /// Multiplicative inverse.
    fn inverse(&self) -> Poly {
        match self.terms.len() {
            0 => Poly::atom(Expr::zero(), -1),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                let inv: Monomial = m.iter().map(|(a, e)| (a.clone(), -e)).collect();
                let (k, inv) = normalize_monomial(inv);
                let mut terms = BTreeMap::new();
                terms.insert(inv, k / c);
                Poly { terms }
            }
            _ => {
                // Scale to unit leading coefficient so that S and c·S share an atom.
                let lead = self.terms.values().next().unwrap().clone();
                let mut unit = Poly::default();
                for (m, c) in &self.terms {
                    unit.terms.insert(m.clone(), c / &lead);
                }
                let mut out = Poly::atom(from_poly(&unit), -1);
                for c in out.terms.values_mut() {
                    *c /= &lead;
                }
                out
            }
        }
    }

    fn powi(&self, n: i32) -> Option<Poly> {
        if n == 0 {
            return Some(Poly::constant(BigRational::one()));
        }
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut acc = base.clone();
        for _ in 1..n.unsigned_abs() {
            acc = acc.mul(&base)?;
        }
        Some(acc)
    }
}

/// Reduces `√3` exponents into {0, 1} and drops zero exponents.
fn normalize_monomial(mut m: Monomial) -> (BigRational, Monomial) {
    let mut coeff = BigRational::one();
    if let Some(e) = m.get(&Expr::Sqrt3).copied() {
        let q = e.div_euclid(2);
        let r = e.rem_euclid(2);
        let three = BigRational::from_integer(BigInt::from(3));
        let scale = num_traits::pow(three, q.unsigned_abs() as usize);
        coeff = if q >= 0 { scale } else { scale.recip() };
        m.insert(Expr::Sqrt3, r);
    }
    m.retain(|_, e| *e != 0);
    (coeff, m)
}

fn to_poly(e: &Expr) -> Option<Poly> {
    Some(match e {
        Expr::Num(r) => Poly::constant(r.clone()),
        Expr::Sqrt3 | Expr::Pi | Expr::Var(_) => Poly::atom(e.clone(), 1),
        Expr::Add(xs) => {
            let mut acc = Poly::default();
            for x in xs {
                acc = acc.add(&to_poly(x)?);
                if acc.terms.len() > TERM_BUDGET {
                    return None;
                }
            }
            acc
        }
        Expr::Mul(xs) => {
            let mut acc = Poly::constant(BigRational::one());
            for x in xs {
                acc = acc.mul(&to_poly(x)?)?;
            }
            acc
        }
        Expr::Div(a, b) => to_poly(a)?.mul(&to_poly_inverse(b)?)?,
        Expr::Pow(a, n) => {
            if *n < 0 {
                to_poly_inverse(a)?.powi(-n)?
            } else {
                to_poly(a)?.powi(*n)?
            }
        }
        Expr::Sin(a) => {
            let arg = from_poly(&to_poly(a)?);
            if arg.is_zero() {
                Poly::default()
            } else {
                Poly::atom(arg.sin(), 1)
            }
        }
        Expr::Cos(a) => {
            let arg = from_poly(&to_poly(a)?);
            if arg.is_zero() {
                Poly::constant(BigRational::one())
            } else {
                Poly::atom(arg.cos(), 1)
            }
        }
    })
}

/// Inverse of `e`, distributing over explicit products so that factored
/// denominators stay factored.
fn to_poly_inverse(e: &Expr) -> Option<Poly> {
    match e {
        Expr::Mul(xs) => {
            let mut acc = Poly::constant(BigRational::one());
            for x in xs {
                acc = acc.mul(&to_poly_inverse(x)?)?;
            }
            Some(acc)
        }
        Expr::Div(a, b) => to_poly(b)?.mul(&to_poly_inverse(a)?),
        Expr::Pow(a, n) if *n > 0 => to_poly_inverse(a)?.powi(*n),
        _ => Some(to_poly(e)?.inverse()),
    }
}

/// Applies `c·M·sin²u + c·M·cos²u → c·M` until no pair remains.
fn merge_pythagorean(poly: &mut Poly) {
    for _ in 0..TRIG_BUDGET {
        let mut hit = None;
        'search: for (m, c) in &poly.terms {
            for (atom, &e) in m {
                let Expr::Sin(arg) = atom else { continue };
                if e < 2 {
                    continue;
                }
                let cos_atom = Expr::Cos(arg.clone());
                let mut partner = m.clone();
                let s = partner.get_mut(atom).unwrap();
                *s -= 2;
                *partner.entry(cos_atom).or_insert(0) += 2;
                partner.retain(|_, e| *e != 0);
                if poly.terms.get(&partner) == Some(c) {
                    let mut merged = m.clone();
                    *merged.get_mut(atom).unwrap() -= 2;
                    merged.retain(|_, e| *e != 0);
                    hit = Some((m.clone(), partner, merged, c.clone()));
                    break 'search;
                }
            }
        }
        let Some((a, b, merged, c)) = hit else { return };
        poly.terms.remove(&a);
        poly.terms.remove(&b);
        poly.add_term(merged, c);
    }
}

fn from_poly(poly: &Poly) -> Expr {
    if let Some(c) = poly.as_constant() {
        return Expr::Num(c);
    }
    let mut terms: Vec<Expr> = poly
        .terms
        .iter()
        .map(|(m, c)| {
            let mut factors = Vec::with_capacity(m.len() + 1);
            if !c.is_one() {
                factors.push(Expr::Num(c.clone()));
            }
            for (atom, &e) in m {
                factors.push(if e == 1 {
                    atom.clone()
                } else {
                    atom.clone().powi(e)
                });
            }
            match factors.len() {
                0 => Expr::one(),
                1 => factors.pop().unwrap(),
                _ => Expr::Mul(factors),
            }
        })
        .collect();
    if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        Expr::Add(terms)
    }
}

// ---------------------------------------------------------------------------
// Display

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [&'a str; DIM],
}

impl ExprDisplay<'_> {
    fn child<'b>(&'b self, e: &'b Expr) -> ExprDisplay<'b> {
        ExprDisplay {
            expr: e,
            names: self.names,
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Num(r) => {
                if r.is_integer() && !r.is_negative() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "({r})")
                }
            }
            Expr::Sqrt3 => write!(f, "√3"),
            Expr::Pi => write!(f, "π"),
            Expr::Var(i) => write!(f, "{}", self.names[*i]),
            Expr::Add(xs) => {
                write!(f, "(")?;
                for (k, x) in xs.iter().enumerate() {
                    if k > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{}", self.child(x))?;
                }
                write!(f, ")")
            }
            Expr::Mul(xs) => {
                for (k, x) in xs.iter().enumerate() {
                    if k > 0 {
                        write!(f, "·")?;
                    }
                    write!(f, "{}", self.child(x))?;
                }
                Ok(())
            }
            Expr::Div(a, b) => write!(f, "{}/({})", self.child(a), self.child(b)),
            Expr::Sin(a) => write!(f, "sin({})", self.child(a)),
            Expr::Cos(a) => write!(f, "cos({})", self.child(a)),
            Expr::Pow(a, n) => write!(f, "{}^{n}", self.child(a)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: usize = 0;
    const THETA: usize = 2;

    fn v(i: usize) -> Expr {
        Expr::var(i)
    }

    fn at(x: f64) -> [f64; DIM] {
        [x, 0.3, -0.2, 0.1, 1.0, 1.5, 0.7]
    }

    #[test]
    fn product_rule_on_x_sin_x() {
        let e = v(X) * v(X).sin();
        let expected = (v(X).sin() + v(X) * v(X).cos()).simplify();
        assert_eq!(e.differentiate(X), expected);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        assert!(Expr::rational(7, 3).differentiate(THETA).is_zero());
        assert!((Expr::sqrt3() * Expr::pi()).differentiate(THETA).is_zero());
    }

    #[test]
    fn half_sqrt3_x_squared_slope_matches_finite_difference() {
        let e = Expr::sqrt3() / Expr::int(2) * v(X).powi(2);
        let exact = e.differentiate(X).eval(&at(2.0)).unwrap();
        let h = 1e-6;
        let fd = (e.eval(&at(2.0 + h)).unwrap() - e.eval(&at(2.0 - h)).unwrap()) / (2.0 * h);
        assert!((exact - fd).abs() <= 1e-6 * exact.abs());
        assert!((exact - 2.0 * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sqrt3_squares_to_three() {
        let e = Expr::sqrt3() * Expr::sqrt3() - Expr::int(3);
        assert!(e.simplify().is_zero());
        let inv = (Expr::one() / Expr::sqrt3() - Expr::sqrt3() / Expr::int(3)).simplify();
        assert!(inv.is_zero());
    }

    #[test]
    fn pythagorean_identity_folds() {
        let u = v(3) + v(2);
        let e = u.clone().sin().powi(2) * v(4) + u.cos().powi(2) * v(4) - v(4);
        assert!(e.simplify().is_zero());
    }

    #[test]
    fn identical_quotient_factors_cancel() {
        let l = v(4) + v(6) + Expr::int(2);
        let e = v(5) / l.clone() - v(5) * Expr::int(2) / (Expr::int(2) * l);
        assert!(e.simplify().is_zero());
    }

    #[test]
    fn scaled_denominators_share_an_atom() {
        let a = Expr::one() / (Expr::int(2) * v(4) + Expr::int(2));
        let b = Expr::rational(1, 2) / (v(4) + Expr::int(1));
        assert!((a - b).simplify().is_zero());
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = Expr::one() / v(X);
        assert!(matches!(e.eval(&at(0.0)), Err(Error::DivisionByZero { .. })));
        assert!(matches!(v(X).powi(-2).eval(&at(1e-13)), Err(Error::DivisionByZero { .. })));
    }

    #[test]
    fn simplify_is_idempotent_on_trig_rational_mix() {
        let l = v(4) + v(6) + Expr::int(2);
        let e = (v(3).sin() * Expr::sqrt3() * (v(4) - v(6)) + Expr::int(3) * v(3).cos() * (l.clone() + Expr::one()))
            / (Expr::int(3) * v(5) * l);
        let once = e.simplify();
        assert_eq!(once.simplify(), once);
        let p = at(0.4);
        assert!((once.eval(&p).unwrap() - e.eval(&p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn trig_of_zero_argument() {
        assert!((v(X) - v(X)).sin().simplify().is_zero());
        assert_eq!((v(X) - v(X)).cos().simplify(), Expr::one());
    }

    #[test]
    fn constant_detection() {
        assert!((Expr::sqrt3() / Expr::int(2)).is_constant());
        assert!(!(Expr::pi() * v(1)).is_constant());
    }
}
