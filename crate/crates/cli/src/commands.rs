use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use trident::mechanism::{self, TridentSystem};
use trident::nilpotent::{self, from_adapted, to_adapted, NilpotentSystem};
use trident::pmp::{self, BracketMotionParams, FibreState, SolutionConstants, SolverRegistry};
use trident::symmetry::{self, SymmetryField};
use trident::system::DynamicPairReport;
use trident::{AdaptedPoint, Chart, Configuration, Error, Trajectory, DIM};

use crate::{BracketMotionArgs, Common, ControllabilityArgs, Failure, GeodesicArgs, SymmetryCheckArgs};

type CmdResult = Result<bool, Failure>;

const PFAFFIAN_CUTOFF: f64 = 1e-9;
const DYNAMIC_PAIR_FACTORS: [f64; 3] = [1.0, 2.0, -0.5];

fn point_or(common: &Common, default: Configuration) -> Result<Configuration, Failure> {
    match &common.point {
        None => Ok(default),
        Some(v) => {
            let coords: [f64; DIM] = v
                .as_slice()
                .try_into()
                .map_err(|_| Failure::input("--point needs exactly seven values"))?;
            if coords.iter().any(|c| !c.is_finite()) {
                return Err(Failure::input("--point values must be finite"));
            }
            Ok(Configuration {
                chart: common.chart,
                coords,
            })
        }
    }
}

fn as_original(q: Configuration) -> Configuration {
    match q.chart {
        Chart::Original => q,
        Chart::Adapted => from_adapted(&AdaptedPoint(q.coords)),
    }
}

fn as_adapted(q: Configuration) -> Result<AdaptedPoint, Failure> {
    Ok(match q.chart {
        Chart::Adapted => AdaptedPoint(q.coords),
        Chart::Original => to_adapted(&q)?,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::from(Error::Io(e)))?;
    }
    fs::write(path, contents).map_err(|e| Failure::from(Error::Io(e)))
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialise");
    s.push('\n');
    s
}

/// Prints the report and mirrors it to `out` when given.
fn emit(report: &Value, out: Option<&Path>) -> Result<(), Failure> {
    let text = pretty(report);
    print!("{text}");
    if let Some(p) = out {
        write_file(p, &text)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PointCheck {
    growth: (usize, usize),
    det_gbar: f64,
    #[serde(rename = "detG_nonzero")]
    det_nonzero: bool,
    signature: trident::system::SignatureResult,
    dynamic_pair: Vec<DynamicPairEntry>,
}

#[derive(Serialize)]
struct DynamicPairEntry {
    f: f64,
    #[serde(flatten)]
    report: DynamicPairReport,
}

fn check_point(q: &Configuration, tol: f64) -> trident::Result<PointCheck> {
    let c = mechanism::controllability(q, tol)?;
    let signature = mechanism::pfaffian_signature(q, PFAFFIAN_CUTOFF)?;
    let dynamic_pair = DYNAMIC_PAIR_FACTORS
        .iter()
        .map(|&f| Ok(DynamicPairEntry { f, report: mechanism::check_dynamic_pair(q, f)? }))
        .collect::<trident::Result<_>>()?;
    Ok(PointCheck {
        growth: c.growth,
        det_gbar: c.det_gbar,
        det_nonzero: c.det_gbar != 0.0 && c.is_bracket_generating(),
        signature,
        dynamic_pair,
    })
}

pub fn controllability(a: &ControllabilityArgs) -> CmdResult {
    if !(a.tol_rank > 0.0 && a.tol_rank < 1.0) {
        return Err(Failure::input("--tol-rank must lie in (0, 1)"));
    }
    let q = as_original(point_or(&a.common, Configuration::reference())?);
    let main = check_point(&q, a.tol_rank)?;
    let mut pass = main.growth == (4, 7);
    let mut report = json!({
        "point": q.coords,
        "growth": main.growth,
        "detG_nonzero": main.det_nonzero,
        "signature": main.signature,
        "det_gbar": main.det_gbar,
        "dynamic_pair": main.dynamic_pair,
    });
    if a.sweep > 0 {
        // One ChaCha stream per sample: results do not depend on scheduling.
        let results: Vec<trident::Result<PointCheck>> = (0..a.sweep as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
                rng.set_stream(i);
                check_point(&mechanism::random_valid_configuration(&mut rng), a.tol_rank)
            })
            .collect();
        let mut growth_ok = 0;
        let mut signature_ok = 0;
        let mut failures = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(c) => {
                    growth_ok += usize::from(c.growth == (4, 7) && c.det_nonzero);
                    signature_ok += usize::from(c.signature.pair() == (0, 0));
                }
                Err(e) => failures.push(json!({"sample": i, "error": e.to_string()})),
            }
        }
        pass &= growth_ok == a.sweep;
        report["sweep"] = json!({
            "samples": a.sweep,
            "seed": a.common.seed,
            "bracket_generating": growth_ok,
            "signature_zero": signature_ok,
            "errors": failures,
        });
    }
    emit(&report, a.common.out.as_deref())?;
    Ok(pass)
}

fn load_constants(a: &GeodesicArgs) -> Result<FibreState, Failure> {
    if let Some(path) = &a.constants {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
        let c: SolutionConstants = serde_json::from_str(&text).map_err(Error::from)?;
        return Ok(c.initial_momenta());
    }
    if let Some(n) = a.example {
        return Ok(pmp::example_constants(n)?.initial_momenta());
    }
    let h = a.momenta.as_ref().expect("clap enforces one initial-data source");
    Ok(FibreState(h.as_slice().try_into().map_err(|_| Failure::input("--momenta needs seven values"))?))
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("diagnostics.json")
}

fn sup_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    a.samples
        .iter()
        .zip(&b.samples)
        .flat_map(|(p, q)| p.state.iter().zip(&q.state).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

pub fn geodesic(a: &GeodesicArgs) -> CmdResult {
    let out = a
        .common
        .out
        .as_ref()
        .ok_or_else(|| Failure::input("geodesic needs --out for the CSV"))?;
    let mut h0 = load_constants(a)?;
    if h0.0.iter().any(|v| !v.is_finite()) {
        return Err(Failure::input("momenta must be finite"));
    }
    let unit = pmp::normalize_arclength(&h0)?;
    if a.normalize {
        h0 = unit;
    }
    let start = as_adapted(point_or(&a.common, Configuration::original([0.0; DIM]))?)?;
    let c = SolutionConstants::from_initial(&h0);
    let solver = SolverRegistry::with_defaults().get(&a.solver)?;
    let ext = solver.solve(&c, &start, a.t_end, a.dt)?;

    let closed = pmp::sample_closed_form(&c, &start, a.t_end, a.dt)?;
    let closed_form_deviation = sup_deviation(&ext.trajectory, &closed.trajectory);
    let original = ext.trajectory.to_original();
    let example_deviation = match (a.example, start == AdaptedPoint::ORIGIN) {
        (Some(n), true) => Some(
            original
                .samples
                .iter()
                .map(|s| {
                    let w = pmp::example_solution(n, s.t)?;
                    Ok(s.state.iter().zip(&w.coords).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
                })
                .collect::<trident::Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    let traj = match a.common.chart {
        Chart::Original => original,
        Chart::Adapted => ext.trajectory,
    };
    write_file(out, &traj.to_csv_string()?)?;

    let checks_pass = closed_form_deviation < 1e-6 && example_deviation.is_none_or(|d| d < 1e-6);
    let sidecar = json!({
        "diagnostics": ext.diagnostics,
        "constants": c,
        "K": c.k(),
        "closed_form_max_deviation": closed_form_deviation,
        "example_max_deviation": example_deviation,
        "samples": traj.len(),
        "csv": out.file_name().map(|f| f.to_string_lossy().into_owned()),
    });
    write_file(&sidecar_path(out), &pretty(&sidecar))?;
    Ok(checks_pass)
}

pub fn bracket_motion(a: &BracketMotionArgs) -> CmdResult {
    let dir = a
        .common
        .out
        .as_ref()
        .ok_or_else(|| Failure::input("bracket-motion needs --out for its output directory"))?;
    let params = BracketMotionParams {
        amplitude: a.amplitude,
        omega: a.omega,
        partner: a.partner,
        cycles: a.cycles,
    };
    params.validate()?;
    let start = as_original(point_or(&a.common, Configuration::reference())?);
    let nil_start = to_adapted(&start)?.as_configuration();

    let nil = pmp::bracket_motion(&params, &NilpotentSystem::new(), &nil_start)?;
    let orig = pmp::bracket_motion(&params, &TridentSystem::default(), &start)?;
    write_file(&dir.join("nilpotent.csv"), &nil.trajectory.to_csv_string()?)?;
    write_file(&dir.join("original.csv"), &orig.trajectory.to_csv_string()?)?;
    write_file(
        &dir.join("traces.json"),
        &pretty(&json!({
            "nilpotent": {"wheels": nil.wheels, "vertices": nil.vertices},
            "original": {"wheels": orig.wheels, "vertices": orig.vertices},
        })),
    )?;

    let d_nil = nil.trajectory.displacement();
    let d_orig = orig.trajectory.displacement();
    let j = nilpotent::adapted_jacobian();
    let mapped = j * trident::numeric::to_vec7(&d_orig);
    let mapped: [f64; DIM] = std::array::from_fn(|i| mapped[i]);

    // Exact area enclosed per cycle lands in y_{partner−1}.
    let target = 3 + a.partner - 1;
    let area = std::f64::consts::PI * a.amplitude * a.amplitude * a.cycles as f64;
    let area_error = (d_nil[target] - area).abs();
    let closure_error = (0..DIM)
        .filter(|&i| i != target)
        .map(|i| d_nil[i].abs())
        .fold(0.0, f64::max);
    let pass = area_error < 1e-6 && closure_error < 1e-9;

    let mut report = json!({
        "params": params,
        "start": start.coords,
        "steps_per_cycle": BracketMotionParams::STEPS_PER_PERIOD,
        "nilpotent": {
            "displacement": d_nil,
            "per_cycle": nil.displacement_per_cycle(&params),
        },
        "original": {
            "displacement": d_orig,
            "displacement_adapted": mapped,
            "per_cycle": orig.displacement_per_cycle(&params),
        },
        "area_oracle": {
            "coordinate": format!("y{}", a.partner - 1),
            "expected": area,
            "error": area_error,
            "closure_error": closure_error,
        },
    });
    if a.sweep {
        let amps: Vec<f64> = (0..4).map(|k| a.amplitude / f64::from(1 << k)).collect();
        report["sweep"] = json!(pmp::amplitude_sweep(&amps, &params, &TridentSystem::default(), &start)?);
    }
    emit(&report, Some(&dir.join("report.json")))?;
    Ok(pass)
}

pub fn symmetry_check(a: &SymmetryCheckArgs) -> CmdResult {
    let mut pass = true;
    let so3 = symmetry::so3_structure()?;
    pass &= so3.relations_hold;

    let mut generators = vec![SymmetryField::v1(), SymmetryField::v2(), SymmetryField::v3()];
    if let Some(delta) = a.perturb {
        if !delta.is_finite() {
            return Err(Failure::input("--perturb must be finite"));
        }
        generators[0] = generators[0].perturbed(3, delta);
    }
    let mut conditions = Vec::new();
    for g in &generators {
        match symmetry::check_symmetry_conditions(g) {
            Ok(r) => conditions.push(json!({"pass": true, "report": r})),
            Err(Error::NotASymmetry { name, reason, residual }) => {
                pass = false;
                conditions.push(json!({"pass": false, "name": name, "reason": reason, "residual": residual}));
            }
            Err(e) => return Err(e.into()),
        }
    }

    let w = symmetry::w_algebra_closure()?;
    pass &= w.closes;

    let names = ["N1", "N2", "N3", "N4", "N12", "N13", "N14"];
    let mut invariance = Vec::new();
    for (k, (f, name)) in nilpotent::full_frame().iter().zip(names).enumerate() {
        let r = nilpotent::check_left_invariance(f, a.samples, a.common.seed.wrapping_add(k as u64))?;
        pass &= r.holds();
        invariance.push(json!({"field": name, "report": r}));
    }

    let mut fixed = Vec::new();
    let v = SymmetryField::combination([1.0, 1.0, 1.0])?;
    for k in [0.0, 1.0, 2.0] {
        for x in [-1.0, 0.0, 0.5] {
            let p = symmetry::fixed_point_set([1.0, 1.0, 1.0], x, k)?;
            let residual = v.eval(&p)?.amax();
            pass &= residual < 1e-12;
            fixed.push(json!({"k": k, "x": x, "point": p.0, "residual": residual}));
        }
    }

    let report = json!({
        "pass": pass,
        "so3_relations": so3.relations_hold,
        "symmetry_conditions": conditions,
        "w_algebra": w,
        "left_invariance": invariance,
        "fixed_points": fixed,
    });
    emit(&report, a.common.out.as_deref())?;
    Ok(pass)
}
