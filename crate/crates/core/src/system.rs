//! Driftless control systems `q̇ = Σ uᵢ Xᵢ(q)` with four inputs, behind a common
//! trait so the analyses below run unchanged on the mechanism and on its
//! nilpotent approximation. Systems are registered by name and picked at
//! runtime (the CLI's `--system` flag).

use std::sync::Arc;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expr::DIM;
use crate::field::Chart;
use crate::numeric::{fd_bracket, span_rank, Vec7, BRACKET_STEP};

/// Default relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-9;

/// A four-input symmetric affine control system on ℝ⁷.
pub trait ControlSystem: Send + Sync {
    /// Registry key.
    fn name(&self) -> &'static str;

    fn chart(&self) -> Chart;

    /// The horizontal frame `(X1, X2, X3, X4)` at `q`.
    fn frame(&self, q: &[f64; DIM]) -> Result<[Vec7; 4]>;

    /// `[Xᵢ, Xⱼ](q)` for frame indices `i, j ∈ 0..4`.
    ///
    /// The default uses Richardson-extrapolated central differences of the frame.
    fn bracket(&self, i: usize, j: usize, q: &[f64; DIM]) -> Result<Vec7> {
        if i == j {
            return Ok(Vec7::zeros());
        }
        let xi = |p: &[f64; DIM]| Ok(self.frame(p)?[i]);
        let xj = |p: &[f64; DIM]| Ok(self.frame(p)?[j]);
        fd_bracket(&xi, &xj, q, BRACKET_STEP)
    }

    /// Three covectors spanning the annihilator of the frame at `q`.
    fn annihilator(&self, q: &[f64; DIM]) -> Result<[Vec7; 3]>;

    /// `Σ uᵢ Xᵢ(q)`.
    fn velocity(&self, q: &[f64; DIM], u: &[f64; 4]) -> Result<Vec7> {
        let frame = self.frame(q)?;
        Ok(frame
            .iter()
            .zip(u)
            .fold(Vec7::zeros(), |acc, (x, &ui)| acc + ui * x))
    }
}

/// Name-indexed collection of control systems.
pub struct SystemRegistry {
    systems: Vec<Arc<dyn ControlSystem>>,
}

impl SystemRegistry {
    pub fn new() -> Self {
        Self {
            systems: Vec::new(),
        }
    }

    /// The mechanism (`"original"`) and its nilpotent approximation (`"nilpotent"`).
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(crate::mechanism::TridentSystem::default()));
        r.register(Arc::new(crate::nilpotent::NilpotentSystem::new()));
        r
    }

    /// Registers `system`, replacing any entry with the same name.
    pub fn register(&mut self, system: Arc<dyn ControlSystem>) {
        self.systems.retain(|s| s.name() != system.name());
        self.systems.push(system);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ControlSystem>> {
        self.systems
            .iter()
            .find(|s| s.name() == name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "control system",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.systems.iter().map(|s| s.name()).collect()
    }
}

impl Default for SystemRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

fn frame_brackets(system: &dyn ControlSystem, q: &[f64; DIM]) -> Result<[[Vec7; 4]; 4]> {
    let mut b = [[Vec7::zeros(); 4]; 4];
    for i in 0..4 {
        for j in (i + 1)..4 {
            let v = system.bracket(i, j, q)?;
            b[i][j] = v;
            b[j][i] = -v;
        }
    }
    Ok(b)
}

/// `(dim Δ¹(q), dim Δ²(q))`.
pub fn growth_vector(system: &dyn ControlSystem, q: &[f64; DIM], rel_tol: f64) -> Result<(usize, usize)> {
    let frame = system.frame(q)?;
    let brackets = frame_brackets(system, q)?;
    let mut level2: Vec<Vec7> = frame.to_vec();
    for i in 0..4 {
        for j in (i + 1)..4 {
            level2.push(brackets[i][j]);
        }
    }
    Ok((span_rank(&frame, rel_tol), span_rank(&level2, rel_tol)))
}

/// Regularity data of the dynamic pair `(f·X1, ⟨X2, X3, X4⟩)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicPairReport {
    pub rank_v0: usize,
    pub rank_v1: usize,
    /// `V¹ ⊕ ⟨f·X1⟩ = Tℝ⁷`
    pub transversal: bool,
}

/// Checks the dynamic pair with constant drift scaling `f ≠ 0`.
pub fn check_dynamic_pair(
    system: &dyn ControlSystem,
    q: &[f64; DIM],
    f: f64,
    rel_tol: f64,
) -> Result<DynamicPairReport> {
    if f == 0.0 || !f.is_finite() {
        return Err(Error::InvalidParameter(format!("drift factor must be nonzero, got {f}")));
    }
    let frame = system.frame(q)?;
    let v0 = frame[1..].to_vec();
    let mut v1 = v0.clone();
    for j in 1..4 {
        v1.push(f * system.bracket(0, j, q)?);
    }
    let rank_v0 = span_rank(&v0, rel_tol);
    let rank_v1 = span_rank(&v1, rel_tol);
    let mut full = v1.clone();
    full.push(f * frame[0]);
    let transversal = rank_v1 + 1 == DIM && span_rank(&full, rel_tol) == DIM;
    Ok(DynamicPairReport {
        rank_v0,
        rank_v1,
        transversal,
    })
}

/// Unordered signature `(p, r)` of the Pfaffian quadratic form.
#[derive(Clone, Copy, Debug, Deserialize)]
pub struct SignatureResult {
    p: usize,
    r: usize,
    pub tolerance: f64,
}

impl SignatureResult {
    pub fn new(p: usize, r: usize, tolerance: f64) -> Self {
        Self {
            p: p.max(r),
            r: p.min(r),
            tolerance,
        }
    }

    /// Larger count first.
    pub fn pair(&self) -> (usize, usize) {
        (self.p, self.r)
    }
}

impl PartialEq for SignatureResult {
    fn eq(&self, other: &Self) -> bool {
        self.pair() == other.pair()
    }
}

impl Serialize for SignatureResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.p, self.r].serialize(s)
    }
}

/// `(Aₖ)ᵢⱼ` for `k ∈ 0..3`, `i, j ∈ 0..4`.
pub type CurvatureMatrices = [[[f64; 4]; 4]; 3];

/// The Pfaffian form `Q(c) = Pf(Σ cₖ Aₖ)` as a symmetric 3×3 matrix together
/// with the antisymmetric curvature matrices `(Aₖ)ᵢⱼ = −μₖ([Xᵢ, Xⱼ])`.
pub fn pfaffian_form(system: &dyn ControlSystem, q: &[f64; DIM]) -> Result<(Matrix3<f64>, CurvatureMatrices)> {
    let brackets = frame_brackets(system, q)?;
    let mu = system.annihilator(q)?;
    let mut a = [[[0.0; 4]; 4]; 3];
    for (k, m) in mu.iter().enumerate() {
        for i in 0..4 {
            for j in 0..4 {
                a[k][i][j] = -m.dot(&brackets[i][j]);
            }
        }
    }
    // Polarisation of Pf(A) = a01·a23 − a02·a13 + a03·a12.
    let bilinear = |x: &[[f64; 4]; 4], y: &[[f64; 4]; 4]| {
        0.5 * (x[0][1] * y[2][3] + y[0][1] * x[2][3] - x[0][2] * y[1][3] - y[0][2] * x[1][3]
            + x[0][3] * y[1][2]
            + y[0][3] * x[1][2])
    };
    let qm = Matrix3::from_fn(|k, l| bilinear(&a[k], &a[l]));
    Ok((qm, a))
}

/// Signature of the Pfaffian quadratic form on the annihilator.
///
/// Eigenvalues within `rel_tol` of zero, relative to the natural scale of the
/// form, are counted as zero.
pub fn pfaffian_signature(system: &dyn ControlSystem, q: &[f64; DIM], rel_tol: f64) -> Result<SignatureResult> {
    let (d1, d2) = growth_vector(system, q, RANK_TOL)?;
    if d2 < DIM {
        return Err(Error::DegenerateGrowth(d1, d2));
    }
    let (qm, a) = pfaffian_form(system, q)?;
    let curvature_scale: f64 = a
        .iter()
        .map(|m| m.iter().flatten().map(|v| v * v).sum::<f64>())
        .sum();
    let cutoff = rel_tol * qm.norm().max(curvature_scale);
    let eig = SymmetricEigen::new(qm).eigenvalues;
    let p = eig.iter().filter(|&&e| e > cutoff).count();
    let r = eig.iter().filter(|&&e| e < -cutoff).count();
    Ok(SignatureResult::new(p, r, rel_tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signature_is_unordered() {
        assert_eq!(SignatureResult::new(2, 1, 1e-9), SignatureResult::new(1, 2, 1e-9));
        assert_ne!(SignatureResult::new(3, 0, 1e-9), SignatureResult::new(2, 1, 1e-9));
        let json = serde_json::to_string(&SignatureResult::new(0, 0, 1e-9)).unwrap();
        assert_eq!(json, "[0,0]");
    }

    #[test]
    fn registry_lookup() {
        let r = SystemRegistry::with_defaults();
        assert_eq!(r.names(), vec!["original", "nilpotent"]);
        assert_eq!(r.get("nilpotent").unwrap().chart(), Chart::Adapted);
        assert!(matches!(r.get("heisenberg"), Err(Error::UnknownStrategy { .. })));
    }
}
