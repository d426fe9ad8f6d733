use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use trident::pmp::example_solution;
use trident::Trajectory;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trident"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json report on stdout")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn controllability_at_reference_point() {
    let o = run(&["controllability"]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout_json(&o);
    assert_eq!(r["growth"], serde_json::json!([4, 7]));
    assert_eq!(r["detG_nonzero"], Value::Bool(true));
    assert_eq!(r["signature"], serde_json::json!([0, 0]));
}

#[test]
fn singular_point_is_invalid_input() {
    let o = run(&["controllability", "--point", "0,0,1.5707963267948966,0,1,1e-12,1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("singular"));
    assert_eq!(run(&["controllability", "--point", "1,2"]).status.code(), Some(2));
}

#[test]
fn adapted_chart_point_is_accepted() {
    let pi = std::f64::consts::PI;
    let p = format!("0,1,1,1,{},{},{}", -4.0 * pi, 0.8 * pi, -4.0 * pi);
    let o = run(&["controllability", "--chart", "adapted", "--point", &p]);
    assert_eq!(o.status.code(), Some(0));
    let q = &stdout_json(&o)["point"];
    assert!((q[2].as_f64().unwrap() - pi / 2.0).abs() < 1e-12);
}

#[test]
fn random_sweep_is_bracket_generating_and_reproducible() {
    let a = run(&["controllability", "--sweep", "100", "--seed", "3"]);
    assert_eq!(a.status.code(), Some(0));
    let r = stdout_json(&a);
    assert_eq!(r["sweep"]["bracket_generating"], 100);
    assert_eq!(r["sweep"]["signature_zero"], 100);
    let b = run(&["controllability", "--sweep", "100", "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn geodesic_example_one_matches_reference_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex1.csv");
    let o = run(&["geodesic", "--example", "1", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = Trajectory::from_csv_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for s in &traj.samples {
        let want = example_solution(1, s.t).unwrap();
        for i in 0..7 {
            assert!((s.state[i] - want.coords[i]).abs() < 1e-6);
        }
    }
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ex1.diagnostics.json")).unwrap()).unwrap();
    assert_eq!(side["diagnostics"]["step_too_large"], Value::Bool(false));
    assert!(side["example_max_deviation"].as_f64().unwrap() < 1e-6);
}

#[test]
fn geodesic_from_fixture_file_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex3.csv");
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/example3.json");
    let o = run(&["geodesic", "--constants", fixture, "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,x,y,theta,phi,l1,l2,l3,h1,h2,h3,h4,h5,h6,h7,u1,u2,u3,u4\n"));
    let traj = Trajectory::from_csv_str(&text).unwrap();
    let last = traj.last().unwrap();
    let want = example_solution(3, last.t).unwrap();
    for i in 0..7 {
        assert!((last.state[i] - want.coords[i]).abs() < 1e-6);
    }
}

#[test]
fn geodesic_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.csv");
    let o = run(&["geodesic", "--momenta", "0,0,0,0,1,0,0", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizontal momentum"));
    let o = run(&["geodesic", "--example", "1", "--solver", "euler", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["geodesic", "--example", "1", "--dt", "-1", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["geodesic", "--out", path(&out)]).status.code(), Some(2));
}

#[test]
fn geodesic_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["geodesic", "--example", "2", "--T", "3", "--out", path(p)]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bracket_motion_defaults_and_doubling() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bracket-motion", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout_json(&o);
    let area = std::f64::consts::PI * 0.16;
    assert!((r["nilpotent"]["displacement"][4].as_f64().unwrap() - area).abs() < 1e-6);
    for f in ["nilpotent.csv", "original.csv", "traces.json", "report.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let dir2 = tempfile::tempdir().unwrap();
    let r2 = stdout_json(&run(&["bracket-motion", "--cycles", "2", "--out", path(dir2.path())]));
    let d1 = r["nilpotent"]["displacement"][4].as_f64().unwrap();
    let d2 = r2["nilpotent"]["displacement"][4].as_f64().unwrap();
    assert!((d2 - 2.0 * d1).abs() < 1e-12);
}

#[test]
fn bracket_motion_partner_three_moves_y2() {
    let dir = tempfile::tempdir().unwrap();
    let r = stdout_json(&run(&["bracket-motion", "--partner", "3", "--out", path(dir.path())]));
    let d: Vec<f64> = r["original"]["displacement_adapted"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let biggest = (0..7).max_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs())).unwrap();
    assert_eq!(biggest, 5);
    let o = run(&["bracket-motion", "--partner", "5", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn symmetry_check_passes_and_detects_perturbation() {
    let o = run(&["symmetry-check"]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout_json(&o);
    for f in r["fixed_points"].as_array().unwrap() {
        assert!(f["residual"].as_f64().unwrap() < 1e-12);
    }
    let o = run(&["symmetry-check", "--perturb", "0.01"]);
    assert_eq!(o.status.code(), Some(1));
    let r = stdout_json(&o);
    assert_eq!(r["symmetry_conditions"][0]["pass"], Value::Bool(false));
    assert!(r["symmetry_conditions"][0]["residual"].as_f64().unwrap() > 0.0);
}
