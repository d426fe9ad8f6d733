//! Normal extremals of the nilpotent control problem and bracket motions.
//!
//! Momenta `hᵢ = ⟨λ, Nᵢ⟩` pair with the frame `N1..N4, N12, N13, N14`; the
//! Hamiltonian is `H = ½(h1² + h2² + h3² + h4²)` and controls equal `h1..h4`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::DIM;
use crate::field::Chart;
use crate::mechanism::{vertex_positions, wheel_positions};
use crate::nilpotent::{adapted_jacobian, from_adapted, group_mul, to_adapted, NilpotentSystem};
use crate::numeric::{adaptive_simpson, rk4_step, to_vec7, uniform_steps};
use crate::point::{AdaptedPoint, Configuration};
use crate::system::ControlSystem;
use crate::trajectory::{Sample, Trajectory};

/// Default integration step.
pub const DEFAULT_DT: f64 = 1e-3;
/// `H` drift per unit time above which a run is flagged.
pub const STEP_TOO_LARGE_RATE: f64 = 1e-6;
/// Absolute tolerance of the `y` quadratures.
pub const QUADRATURE_TOL: f64 = 1e-10;

fn half_sqrt3() -> f64 {
    0.5 * 3f64.sqrt()
}

/// Momenta `(h1, …, h7)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FibreState(pub [f64; DIM]);

impl FibreState {
    pub fn hamiltonian(&self) -> f64 {
        0.5 * self.horizontal().iter().map(|h| h * h).sum::<f64>()
    }

    /// `(h1, h2, h3, h4)`, which are also the controls.
    pub fn horizontal(&self) -> [f64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    /// `(h5, h6, h7)`
    pub fn casimirs(&self) -> [f64; 3] {
        [self.0[4], self.0[5], self.0[6]]
    }
}

/// Integration constants of the closed-form extremals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionConstants {
    #[serde(rename = "C5")]
    pub c5: f64,
    #[serde(rename = "C6")]
    pub c6: f64,
    #[serde(rename = "C7")]
    pub c7: f64,
    #[serde(rename = "C11")]
    pub c11: f64,
    #[serde(rename = "C12")]
    pub c12: f64,
    #[serde(rename = "C13")]
    pub c13: f64,
    #[serde(rename = "C14")]
    pub c14: f64,
    #[serde(rename = "C15")]
    pub c15: f64,
}

impl SolutionConstants {
    /// `K = √(C5² + C6² + C7²)`
    pub fn k(&self) -> f64 {
        (self.c5 * self.c5 + self.c6 * self.c6 + self.c7 * self.c7).sqrt()
    }

    fn casimirs(&self) -> [f64; 3] {
        [self.c5, self.c6, self.c7]
    }

    /// Constants of the extremal through `h0` at `t = 0`.
    ///
    /// For `K = 0` the momenta are constant: `C11..C15 ↦ h1, 0, h2, h3, h4`.
    pub fn from_initial(h0: &FibreState) -> Self {
        let [h1, h2, h3, h4, c5, c6, c7] = h0.0;
        let mut c = Self {
            c5,
            c6,
            c7,
            c11: h1,
            c12: 0.0,
            c13: h2,
            c14: h3,
            c15: h4,
        };
        let k = c.k();
        if k > 0.0 {
            // ḣ1(0) = K·C12 and hⱼ(0) = −(Cⱼ/K)·C12 + C1ⱼ.
            c.c12 = -(c5 * h2 + c6 * h3 + c7 * h4) / k;
            c.c13 = h2 + c5 * c.c12 / k;
            c.c14 = h3 + c6 * c.c12 / k;
            c.c15 = h4 + c7 * c.c12 / k;
        }
        c
    }

    pub fn initial_momenta(&self) -> FibreState {
        closed_form_fibre(self, 0.0)
    }
}

/// `ḣ` of the fibre system.
pub fn fibre_rhs(h: &FibreState) -> [f64; DIM] {
    let [h1, h2, h3, h4, h5, h6, h7] = h.0;
    [-h5 * h2 - h6 * h3 - h7 * h4, h5 * h1, h6 * h1, h7 * h1, 0.0, 0.0, 0.0]
}

/// `q̇ = h1·N1(q) + h2·N2 + h3·N3 + h4·N4`.
pub fn base_rhs(q: &AdaptedPoint, h: &FibreState) -> [f64; DIM] {
    let [x, l1, l2, l3, ..] = q.0;
    let [h1, h2, h3, h4, ..] = h.0;
    let s = half_sqrt3();
    [
        h1,
        h2,
        h3,
        h4,
        (1.0 + s * x - l1) * h1,
        (1.0 - l2) * h1,
        (1.0 - s * x - l3) * h1,
    ]
}

pub fn closed_form_fibre(c: &SolutionConstants, t: f64) -> FibreState {
    let k = c.k();
    let [c5, c6, c7] = c.casimirs();
    if k == 0.0 {
        return FibreState([c.c11, c.c13, c.c14, c.c15, c5, c6, c7]);
    }
    let (s, co) = (k * t).sin_cos();
    let h1 = c.c11 * co + c.c12 * s;
    let osc = c.c11 * s - c.c12 * co;
    FibreState([
        h1,
        c5 / k * osc + c.c13,
        c6 / k * osc + c.c14,
        c7 / k * osc + c.c15,
        c5,
        c6,
        c7,
    ])
}

/// `(x, ℓ1, ℓ2, ℓ3)` from the origin in closed form.
pub fn closed_form_legs(c: &SolutionConstants, t: f64) -> [f64; 4] {
    let k = c.k();
    if k == 0.0 {
        return [c.c11 * t, c.c13 * t, c.c14 * t, c.c15 * t];
    }
    let (s, co) = (k * t).sin_cos();
    let x = c.c11 / k * s - c.c12 / k * co + c.c12 / k;
    let osc = c.c11 - c.c11 * co - c.c12 * s;
    let [c5, c6, c7] = c.casimirs();
    [
        x,
        c5 / (k * k) * osc + c.c13 * t,
        c6 / (k * k) * osc + c.c14 * t,
        c7 / (k * k) * osc + c.c15 * t,
    ]
}

fn y_integrand(c: &SolutionConstants, s: f64) -> [f64; 3] {
    let [x, l1, l2, l3] = closed_form_legs(c, s);
    let h1 = closed_form_fibre(c, s).0[0];
    let r = half_sqrt3();
    [(1.0 + r * x - l1) * h1, (1.0 - l2) * h1, (1.0 - r * x - l3) * h1]
}

fn y_increment(c: &SolutionConstants, a: f64, b: f64, tol: f64) -> [f64; 3] {
    std::array::from_fn(|i| adaptive_simpson(&|s| y_integrand(c, s)[i], a, b, tol))
}

/// Base point at time `t` of the extremal starting at the origin; the `y`
/// components come from adaptive quadrature of the base equations.
pub fn closed_form_base(c: &SolutionConstants, t: f64) -> AdaptedPoint {
    let [x, l1, l2, l3] = closed_form_legs(c, t);
    let [y1, y2, y3] = y_increment(c, 0.0, t, QUADRATURE_TOL);
    AdaptedPoint([x, l1, l2, l3, y1, y2, y3])
}

/// Same as [`closed_form_base`] from an arbitrary start, by left translation.
pub fn closed_form_base_from(c: &SolutionConstants, start: &AdaptedPoint, t: f64) -> AdaptedPoint {
    group_mul(start, &closed_form_base(c, t))
}

/// Scales `(h1..h4)` to unit length, keeping `h5..h7`.
pub fn normalize_arclength(h: &FibreState) -> Result<FibreState> {
    let n = (2.0 * h.hamiltonian()).sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroHorizontalMomentum);
    }
    let mut out = *h;
    for v in &mut out.0[..4] {
        *v /= n;
    }
    Ok(out)
}

/// Conservation diagnostics of one integration run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftDiagnostics {
    pub solver: String,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub steps: usize,
    pub hamiltonian_initial: f64,
    /// `max |H(t) − H(0)|`
    pub hamiltonian_drift: f64,
    /// `hamiltonian_drift / T`
    pub hamiltonian_drift_rate: f64,
    /// `max |hₖ(t) − hₖ(0)|` over `k = 5, 6, 7`.
    pub casimir_drift: f64,
    /// Advisory: the drift rate exceeds the tolerated level at this step.
    pub step_too_large: bool,
}

/// An extremal with its diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Extremal {
    pub trajectory: Trajectory,
    pub diagnostics: DriftDiagnostics,
}

fn check_grid(t_end: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("T must be positive, got {t_end}")));
    }
    Ok(())
}

fn sample(t: f64, q: &AdaptedPoint, h: &FibreState) -> Sample {
    Sample {
        t,
        state: q.0,
        momenta: Some(h.0),
        controls: Some(h.horizontal()),
    }
}

fn diagnostics(solver: &str, traj: &Trajectory, dt: f64, t_end: f64) -> DriftDiagnostics {
    let h0 = FibreState(traj.samples[0].momenta.expect("extremals carry momenta"));
    let (e0, c0) = (h0.hamiltonian(), h0.casimirs());
    let mut drift: f64 = 0.0;
    let mut cas: f64 = 0.0;
    for s in &traj.samples {
        let h = FibreState(s.momenta.expect("extremals carry momenta"));
        drift = drift.max((h.hamiltonian() - e0).abs());
        for (a, b) in h.casimirs().iter().zip(c0) {
            cas = cas.max((a - b).abs());
        }
    }
    let rate = drift / t_end;
    DriftDiagnostics {
        solver: solver.to_string(),
        dt,
        t_end,
        steps: traj.len() - 1,
        hamiltonian_initial: e0,
        hamiltonian_drift: drift,
        hamiltonian_drift_rate: rate,
        casimir_drift: cas,
        step_too_large: rate > STEP_TOO_LARGE_RATE,
    }
}

/// RK4 integration of the coupled 14-dimensional Hamiltonian system on `[0, T]`.
///
/// The step is shrunk to at most `dt` so the grid ends exactly at `T`.
pub fn integrate_extremal(h0: &FibreState, q0: &AdaptedPoint, t_end: f64, dt: f64) -> Result<Extremal> {
    check_grid(t_end, dt)?;
    let (n, step) = uniform_steps(t_end, dt);
    let mut rhs = |_t: f64, z: &[f64; 14]| -> Result<[f64; 14]> {
        let q = AdaptedPoint(std::array::from_fn(|i| z[i]));
        let h = FibreState(std::array::from_fn(|i| z[DIM + i]));
        let dq = base_rhs(&q, &h);
        let dh = fibre_rhs(&h);
        Ok(std::array::from_fn(|i| if i < DIM { dq[i] } else { dh[i - DIM] }))
    };
    let mut z: [f64; 14] = std::array::from_fn(|i| if i < DIM { q0.0[i] } else { h0.0[i - DIM] });
    let mut traj = Trajectory::new(Chart::Adapted);
    traj.push(sample(0.0, q0, h0));
    for k in 0..n {
        z = rk4_step(&mut rhs, k as f64 * step, &z, step)?;
        // The Casimirs have zero derivative; pin them so rounding cannot creep in.
        z[DIM + 4..].copy_from_slice(&h0.0[4..]);
        let t = if k + 1 == n { t_end } else { (k + 1) as f64 * step };
        let q = AdaptedPoint(std::array::from_fn(|i| z[i]));
        let h = FibreState(std::array::from_fn(|i| z[DIM + i]));
        traj.push(sample(t, &q, &h));
    }
    let diagnostics = diagnostics("rk4", &traj, step, t_end);
    Ok(Extremal {
        trajectory: traj,
        diagnostics,
    })
}

/// Samples the closed-form extremal on the same grid as [`integrate_extremal`].
pub fn sample_closed_form(c: &SolutionConstants, start: &AdaptedPoint, t_end: f64, dt: f64) -> Result<Extremal> {
    check_grid(t_end, dt)?;
    let (n, step) = uniform_steps(t_end, dt);
    let mut traj = Trajectory::new(Chart::Adapted);
    let mut y = [0.0; 3];
    let mut prev = 0.0;
    for k in 0..=n {
        let t = if k == n { t_end } else { k as f64 * step };
        // Accumulate y over consecutive cells; the tolerance is split between them.
        let dy = y_increment(c, prev, t, QUADRATURE_TOL * (t - prev) / t_end);
        for i in 0..3 {
            y[i] += dy[i];
        }
        prev = t;
        let [x, l1, l2, l3] = closed_form_legs(c, t);
        let from_origin = AdaptedPoint([x, l1, l2, l3, y[0], y[1], y[2]]);
        let q = group_mul(start, &from_origin);
        traj.push(sample(t, &q, &closed_form_fibre(c, t)));
    }
    let diagnostics = diagnostics("closed-form", &traj, step, t_end);
    Ok(Extremal {
        trajectory: traj,
        diagnostics,
    })
}

/// A way of producing normal extremals, selectable by name.
pub trait ExtremalSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, c: &SolutionConstants, start: &AdaptedPoint, t_end: f64, dt: f64) -> Result<Extremal>;
}

/// Fixed-step RK4 on the Hamiltonian system.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rk4Solver;

impl ExtremalSolver for Rk4Solver {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn solve(&self, c: &SolutionConstants, start: &AdaptedPoint, t_end: f64, dt: f64) -> Result<Extremal> {
        integrate_extremal(&c.initial_momenta(), start, t_end, dt)
    }
}

/// Closed-form momenta and legs, quadrature for `y`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClosedFormSolver;

impl ExtremalSolver for ClosedFormSolver {
    fn name(&self) -> &'static str {
        "closed-form"
    }

    fn solve(&self, c: &SolutionConstants, start: &AdaptedPoint, t_end: f64, dt: f64) -> Result<Extremal> {
        sample_closed_form(c, start, t_end, dt)
    }
}

pub struct SolverRegistry {
    solvers: Vec<Arc<dyn ExtremalSolver>>,
}

impl SolverRegistry {
    pub fn new() -> Self {
        Self { solvers: Vec::new() }
    }

    /// `"rk4"` and `"closed-form"`.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(Rk4Solver));
        r.register(Arc::new(ClosedFormSolver));
        r
    }

    pub fn register(&mut self, solver: Arc<dyn ExtremalSolver>) {
        self.solvers.retain(|s| s.name() != solver.name());
        self.solvers.push(solver);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ExtremalSolver>> {
        self.solvers
            .iter()
            .find(|s| s.name() == name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "extremal solver",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.iter().map(|s| s.name()).collect()
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

fn check_example(n: u8) -> Result<()> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!("example must be 1, 2 or 3, got {n}")));
    }
    Ok(())
}

/// Constants of the three worked examples (recovered from the reference momenta at `t = 0`).
pub fn example_constants(n: u8) -> Result<SolutionConstants> {
    check_example(n)?;
    let r3 = 3f64.sqrt() / 3.0;
    let zero = SolutionConstants {
        c5: 0.0,
        c6: 0.0,
        c7: 0.0,
        c11: 0.0,
        c12: 0.0,
        c13: 0.0,
        c14: 0.0,
        c15: 0.0,
    };
    Ok(match n {
        1 => SolutionConstants {
            c11: 0.7,
            c13: 0.5,
            c14: 0.5,
            c15: 0.1,
            ..zero
        },
        2 => SolutionConstants {
            c5: 1.0,
            c11: 0.5,
            c12: -0.5,
            c14: 0.5,
            c15: 0.5,
            ..zero
        },
        _ => SolutionConstants {
            c5: r3,
            c6: -r3,
            c7: -r3,
            c11: -10f64.sqrt() / 4.0,
            c13: 0.5,
            c14: 0.25,
            c15: 0.25,
            ..zero
        },
    })
}

/// The reference momenta of example `n` at time `t`.
pub fn example_momenta(n: u8, t: f64) -> Result<FibreState> {
    check_example(n)?;
    let (s, c) = t.sin_cos();
    let r3 = 3f64.sqrt() / 3.0;
    let r10 = 10f64.sqrt();
    let r30 = 30f64.sqrt();
    Ok(FibreState(match n {
        1 => [0.7, 0.5, 0.5, 0.1, 0.0, 0.0, 0.0],
        2 => [-0.5 * s + 0.5 * c, 0.5 * s + 0.5 * c, 0.5, 0.5, 1.0, 0.0, 0.0],
        _ => [
            -r10 / 4.0 * c,
            -r30 / 12.0 * s + 0.5,
            r30 / 12.0 * s + 0.25,
            r30 / 12.0 * s + 0.25,
            r3,
            -r3,
            -r3,
        ],
    }))
}

/// The reference solution of example `n` in the original chart.
pub fn example_solution(n: u8, t: f64) -> Result<Configuration> {
    check_example(n)?;
    let r3 = 3f64.sqrt();
    let r10 = 10f64.sqrt();
    let r30 = 30f64.sqrt();
    let (s, c) = t.sin_cos();
    let coords = match n {
        1 => [
            0.7 * t,
            (7.0 * r3 / 600.0 - 49.0 / 800.0) * t * t,
            21.0 * t * t / 1600.0 - 21.0 * t / 80.0,
            -49.0 * t * t / 200.0 + 21.0 * t / 10.0,
            0.5 * t,
            0.5 * t,
            0.1 * t,
        ],
        2 => [
            0.5 * s + 0.5 * c - 0.5,
            -r3 / 48.0 * (r3 * (s - 1.0) * (c - 1.0) + c * c + t * c + (t - 2.0) * s + t - 1.0),
            -c * c / 64.0 + (t - 10.0) / 64.0 * c + (t - 12.0) / 64.0 * s - t / 64.0 + 11.0 / 64.0,
            c * c / 32.0 + (36.0 - 11.0 * t) / 32.0 * c + (58.0 - 11.0 * t) / 32.0 * s + t / 32.0 - 37.0 / 32.0,
            0.5 * s - 0.5 * c + 0.5,
            0.5 * t,
            0.5 * t,
        ],
        _ => [
            -r10 / 4.0 * s,
            r30 / 192.0 * (1.0 - t * s - c) + 5.0 / 64.0 * c * c - 5.0 / 96.0 * s * c - 5.0 * t / 96.0
                + 5.0 / 48.0 * s
                - 5.0 / 64.0,
            -3.0 * r10 / 256.0 * ((t - 8.0) * s + c - 1.0),
            13.0 * r3 / 384.0
                * (((t - 96.0 / 13.0) * s + c - 1.0) * r10 * r3 + (100.0 / 13.0 - 50.0 / 13.0 * c) * s
                    - 50.0 / 13.0 * t),
            r30 / 12.0 * (c - 1.0) + 0.5 * t,
            r30 / 12.0 * (1.0 - c) + 0.25 * t,
            r30 / 12.0 * (1.0 - c) + 0.25 * t,
        ],
    };
    Ok(Configuration::original(coords))
}

/// Periodic out-of-phase inputs on `(X1, X_partner)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketMotionParams {
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub omega: f64,
    /// Frame index 2, 3 or 4 (one-based).
    pub partner: usize,
    pub cycles: u32,
}

impl Default for BracketMotionParams {
    fn default() -> Self {
        Self {
            amplitude: 0.4,
            omega: 2.0 * PI / 50.0,
            partner: 2,
            cycles: 1,
        }
    }
}

impl BracketMotionParams {
    pub const STEPS_PER_PERIOD: usize = 2000;

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("A must be positive, got {}", self.amplitude)));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {}", self.omega)));
        }
        if !(2..=4).contains(&self.partner) {
            return Err(Error::InvalidParameter(format!("partner must be 2, 3 or 4, got {}", self.partner)));
        }
        if self.cycles == 0 {
            return Err(Error::InvalidParameter("cycles must be at least 1".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// `u1 = −Aω sin ωt`, `u_partner = Aω cos ωt`, the rest zero.
    pub fn controls(&self, t: f64) -> [f64; 4] {
        let (s, c) = (self.omega * t).sin_cos();
        let a = self.amplitude * self.omega;
        let mut u = [0.0; 4];
        u[0] = -a * s;
        u[self.partner - 1] = a * c;
        u
    }
}

/// A bracket motion with wheel and root-vertex traces in the plane.
#[derive(Clone, Debug, Serialize)]
pub struct BracketMotion {
    pub system: String,
    pub trajectory: Trajectory,
    pub wheels: Vec<[[f64; 2]; 3]>,
    pub vertices: Vec<[[f64; 2]; 3]>,
}

impl BracketMotion {
    /// Net displacement after each full cycle, in the system's chart.
    pub fn displacement_per_cycle(&self, params: &BracketMotionParams) -> Vec<[f64; DIM]> {
        let s = &self.trajectory.samples;
        (1..=params.cycles as usize)
            .map(|k| {
                let a = &s[(k - 1) * BracketMotionParams::STEPS_PER_PERIOD].state;
                let b = &s[k * BracketMotionParams::STEPS_PER_PERIOD].state;
                std::array::from_fn(|i| b[i] - a[i])
            })
            .collect()
    }
}

/// Integrates `q̇ = Σ uⱼ Xⱼ(q)` under the periodic inputs with RK4 at `dt = period / 2000`.
pub fn bracket_motion(
    params: &BracketMotionParams,
    system: &dyn ControlSystem,
    start: &Configuration,
) -> Result<BracketMotion> {
    params.validate()?;
    start.expect_chart(system.chart())?;
    if !start.is_valid() {
        return Err(Error::InvalidParameter("start configuration has a non-positive leg".into()));
    }
    let n = BracketMotionParams::STEPS_PER_PERIOD * params.cycles as usize;
    let dt = params.period() / BracketMotionParams::STEPS_PER_PERIOD as f64;
    let mut rhs = |t: f64, q: &[f64; DIM]| -> Result<[f64; DIM]> {
        let v = system.velocity(q, &params.controls(t))?;
        Ok(std::array::from_fn(|i| v[i]))
    };
    let mut traj = Trajectory::new(system.chart());
    let mut q = start.coords;
    let mut wheels = Vec::with_capacity(n + 1);
    let mut vertices = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 * dt;
        if k > 0 {
            q = rk4_step(&mut rhs, (k - 1) as f64 * dt, &q, dt)?;
        }
        let orig = match system.chart() {
            Chart::Original => Configuration::original(q),
            Chart::Adapted => from_adapted(&AdaptedPoint(q)),
        };
        wheels.push(wheel_positions(&orig)?);
        vertices.push(vertex_positions(&orig)?);
        traj.push(Sample {
            t,
            state: q,
            momenta: None,
            controls: Some(params.controls(t)),
        });
    }
    Ok(BracketMotion {
        system: system.name().to_string(),
        trajectory: traj,
        wheels,
        vertices,
    })
}

/// One amplitude of an original-vs-nilpotent comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub amplitude: f64,
    /// `|Δ_nilpotent|`
    pub nilpotent_displacement: f64,
    /// `|J·Δ_original − Δ_nilpotent|` after one cycle.
    pub error: f64,
    /// `log₂(error(previous) / error)` relative to the previous amplitude, when it halves.
    pub observed_order: Option<f64>,
}

/// Compares one-cycle displacements of the mechanism (from `start`) and of the
/// nilpotent system (from its adapted image) across amplitudes.
pub fn amplitude_sweep(
    amplitudes: &[f64],
    base: &BracketMotionParams,
    original: &dyn ControlSystem,
    start: &Configuration,
) -> Result<Vec<SweepPoint>> {
    let j = adapted_jacobian();
    let nil = NilpotentSystem::new();
    let start_adapted = to_adapted(start)?.as_configuration();
    let mut out: Vec<SweepPoint> = Vec::with_capacity(amplitudes.len());
    for &a in amplitudes {
        let p = BracketMotionParams {
            amplitude: a,
            cycles: 1,
            ..*base
        };
        let d_orig = to_vec7(&bracket_motion(&p, original, start)?.trajectory.displacement());
        let d_nil = to_vec7(&bracket_motion(&p, &nil, &start_adapted)?.trajectory.displacement());
        let error = (j * d_orig - d_nil).norm();
        let observed_order = out
            .last()
            .map(|prev| (prev.error / error).ln() / (prev.amplitude / a).ln());
        out.push(SweepPoint {
            amplitude: a,
            nilpotent_displacement: d_nil.norm(),
            error,
            observed_order,
        });
    }
    Ok(out)
}
