//! Symbolic vector fields on ℝ⁷ tagged with the chart they are written in.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, DIM};

/// Coordinate chart of a point or field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    /// `(x, y, θ, φ, ℓ1, ℓ2, ℓ3)`
    Original,
    /// `(x, ℓ1, ℓ2, ℓ3, y1, y2, y3)`
    Adapted,
}

impl Chart {
    pub fn coordinate_names(self) -> [&'static str; DIM] {
        match self {
            Chart::Original => ["x", "y", "theta", "phi", "l1", "l2", "l3"],
            Chart::Adapted => ["x", "l1", "l2", "l3", "y1", "y2", "y3"],
        }
    }

    /// Sampling box used for evaluation-based comparisons; legs stay positive.
    fn sample_point(self, rng: &mut impl Rng) -> [f64; DIM] {
        let mut p = [0.0; DIM];
        let legs = match self {
            Chart::Original => 4..7,
            Chart::Adapted => 1..4,
        };
        for (i, c) in p.iter_mut().enumerate() {
            *c = if legs.contains(&i) {
                rng.gen_range(0.5..2.0)
            } else {
                rng.gen_range(-1.0..1.0)
            };
        }
        p
    }
}

impl std::str::FromStr for Chart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Chart::Original),
            "adapted" => Ok(Chart::Adapted),
            other => Err(Error::InvalidParameter(format!("unknown chart `{other}`"))),
        }
    }
}

/// How two fields were found to agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Agreement {
    /// The simplified difference is structurally zero.
    Structural,
    /// The difference did not normalise to zero but vanished at every sample point.
    Numerical,
    Different,
}

impl Agreement {
    pub fn holds(self) -> bool {
        !matches!(self, Agreement::Different)
    }
}

/// Number of random points used when structural comparison is inconclusive.
pub const NUMERIC_SAMPLES: usize = 50;
/// Tolerance of the evaluation-based comparison.
pub const NUMERIC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldSym {
    chart: Chart,
    components: [Expr; DIM],
}

impl VectorFieldSym {
    pub fn new(chart: Chart, components: [Expr; DIM]) -> Self {
        Self { chart, components }
    }

    pub fn zero(chart: Chart) -> Self {
        Self::new(chart, std::array::from_fn(|_| Expr::zero()))
    }

    /// The coordinate field ∂ᵢ.
    pub fn coordinate(chart: Chart, index: usize) -> Self {
        let mut f = Self::zero(chart);
        f.components[index] = Expr::one();
        f
    }

    /// Constant-coefficient field with the given integer entries.
    pub fn constant(chart: Chart, coeffs: [i64; DIM]) -> Self {
        Self::new(chart, coeffs.map(Expr::int))
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn components(&self) -> &[Expr; DIM] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.components[i]
    }

    pub fn eval(&self, p: &[f64; DIM]) -> Result<[f64; DIM]> {
        let mut out = [0.0; DIM];
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(p)?;
        }
        Ok(out)
    }

    pub fn simplify(&self) -> Self {
        Self::new(self.chart, std::array::from_fn(|i| self.components[i].simplify()))
    }

    /// Structural zero test; call [`simplify`](Self::simplify) first.
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    fn ensure_chart(&self, other: &Self) -> Result<()> {
        if self.chart != other.chart {
            return Err(Error::ChartMismatch {
                expected: self.chart,
                found: other.chart,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.ensure_chart(other)?;
        Ok(Self::new(
            self.chart,
            std::array::from_fn(|i| self.components[i].clone() + other.components[i].clone()),
        )
        .simplify())
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.ensure_chart(other)?;
        Ok(Self::new(
            self.chart,
            std::array::from_fn(|i| self.components[i].clone() - other.components[i].clone()),
        )
        .simplify())
    }

    /// Multiplies every component by the scalar expression `f`.
    pub fn scale(&self, f: &Expr) -> Self {
        Self::new(
            self.chart,
            std::array::from_fn(|i| f.clone() * self.components[i].clone()),
        )
        .simplify()
    }

    /// Compares two fields: structurally if possible, otherwise by evaluation
    /// at [`NUMERIC_SAMPLES`] seeded random points.
    pub fn agreement(&self, other: &Self) -> Result<Agreement> {
        let diff = self.try_sub(other)?;
        if diff.is_zero() {
            return Ok(Agreement::Structural);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x7715);
        let mut checked = 0;
        let mut attempts = 0;
        while checked < NUMERIC_SAMPLES && attempts < 20 * NUMERIC_SAMPLES {
            attempts += 1;
            let p = self.chart.sample_point(&mut rng);
            let (Ok(a), Ok(b)) = (self.eval(&p), other.eval(&p)) else {
                continue;
            };
            let scale = a.iter().chain(&b).fold(1.0f64, |m, v| m.max(v.abs()));
            if a.iter().zip(&b).any(|(x, y)| (x - y).abs() > NUMERIC_TOL * scale) {
                return Ok(Agreement::Different);
            }
            checked += 1;
        }
        Ok(if checked == NUMERIC_SAMPLES {
            Agreement::Numerical
        } else {
            Agreement::Different
        })
    }
}

/// Component-wise evaluation of `field` at `p`.
pub fn eval_field(field: &VectorFieldSym, p: &[f64; DIM]) -> Result<[f64; DIM]> {
    field.eval(p)
}

/// `[X, Y]ⁱ = Σⱼ (Xʲ ∂ⱼYⁱ − Yʲ ∂ⱼXⁱ)`, simplified.
pub fn lie_bracket(x: &VectorFieldSym, y: &VectorFieldSym) -> Result<VectorFieldSym> {
    x.ensure_chart(y)?;
    let components = std::array::from_fn(|i| {
        let mut terms = Vec::new();
        for j in 0..DIM {
            if !x.components[j].is_zero() {
                let dy = y.components[i].differentiate(j);
                if !dy.is_zero() {
                    terms.push(x.components[j].clone() * dy);
                }
            }
            if !y.components[j].is_zero() {
                let dx = x.components[i].differentiate(j);
                if !dx.is_zero() {
                    terms.push(-(y.components[j].clone() * dx));
                }
            }
        }
        Expr::Add(terms).simplify()
    });
    Ok(VectorFieldSym::new(x.chart, components))
}

impl fmt::Display for VectorFieldSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.chart.coordinate_names();
        let mut first = true;
        for (c, name) in self.components.iter().zip(names.iter()) {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}·∂{}", c.display(&names), name)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_evaluates_to_itself() {
        let f = VectorFieldSym::constant(Chart::Original, [1, 0, 0, 0, 0, 0, 0]);
        let p = [0.3, -2.0, 1.0, 0.2, 1.0, 1.0, 1.0];
        assert_eq!(eval_field(&f, &p).unwrap(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn self_bracket_is_zero() {
        let x = Expr::var(0);
        let f = VectorFieldSym::new(
            Chart::Adapted,
            [Expr::one(), Expr::zero(), x.clone().sin(), Expr::zero(), x.clone() * x, Expr::zero(), Expr::var(2)],
        );
        assert!(lie_bracket(&f, &f).unwrap().is_zero());
    }

    #[test]
    fn chart_mismatch_is_an_error() {
        let a = VectorFieldSym::coordinate(Chart::Original, 0);
        let b = VectorFieldSym::coordinate(Chart::Adapted, 0);
        assert!(matches!(lie_bracket(&a, &b), Err(Error::ChartMismatch { .. })));
        assert!(a.try_add(&b).is_err());
    }

    #[test]
    fn bracket_of_x_dy_with_dx() {
        // [∂x, x·∂y] = ∂y
        let dx = VectorFieldSym::coordinate(Chart::Original, 0);
        let mut comps: [Expr; DIM] = std::array::from_fn(|_| Expr::zero());
        comps[1] = Expr::var(0);
        let xdy = VectorFieldSym::new(Chart::Original, comps);
        assert_eq!(
            lie_bracket(&dx, &xdy).unwrap(),
            VectorFieldSym::coordinate(Chart::Original, 1)
        );
    }

    #[test]
    fn numeric_fallback_detects_difference() {
        let a = VectorFieldSym::coordinate(Chart::Original, 0);
        let b = a.scale(&(Expr::one() + Expr::rational(1, 1000)));
        assert_eq!(a.agreement(&b).unwrap(), Agreement::Different);
        assert_eq!(a.agreement(&a).unwrap(), Agreement::Structural);
    }
}
