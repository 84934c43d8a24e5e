use std::path::Path;
use std::process::{Command, Output};

use blcirk::orbit::{kepler_oracle, relative_position_error, OrbitState};
use blcirk::quadrature::{QuadratureJson, QuadratureRule};
use blcirk::tableau::{Tableau, TableauJson};

fn blcirk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blcirk")).args(args).output().expect("spawn blcirk")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn read_tableau(p: &Path) -> Tableau {
    let js: TableauJson = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
    Tableau::from_json(&js).unwrap()
}

#[test]
fn quad_writes_rule_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let (out, csv) = (dir.path().join("q.json"), dir.path().join("d.csv"));
    let o = blcirk(&[
        "quad",
        "--c",
        "10",
        "--eps",
        "1e-10",
        "-o",
        out.to_str().unwrap(),
        "--diagnostics",
        csv.to_str().unwrap(),
        "--accuracies",
        "-4,-8",
        "--node-counts",
        "16,24",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let js: QuadratureJson = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rule = QuadratureRule::from_json(&js).unwrap();
    assert!((rule.weight_sum().to_f64() - 2.0).abs() < 1e-14);
    assert!(rule.verified_error <= 1e-10);
    // header plus one row per (accuracy, node count)
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 4);
}

#[test]
fn quad_prints_to_stdout() {
    let o = blcirk(&["quad", "--c", "5", "--eps", "1e-8"]);
    assert_eq!(code(&o), 0);
    let js: QuadratureJson = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(js.m, js.nodes.len());
}

#[test]
fn tableau_forms_and_diff() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let sym = p("sym.json");
    let unit = p("unit.json");
    let approx = p("approx.json");
    for (extra, out) in [(&[][..], &sym), (&["--unit"][..], &unit), (&["--method", "approx-pswf"][..], &approx)] {
        let mut args = vec!["tableau", "--c", "10", "--eps", "1e-10", "-o", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = blcirk(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let t = read_tableau(&sym);
    let w: f64 = t.weights_f64().iter().sum();
    assert!((w - 2.0).abs() < 1e-14);
    let u = read_tableau(&unit);
    assert!((u.weights_f64().iter().sum::<f64>() - 1.0).abs() < 1e-15);

    let same = blcirk(&["diff-tableau", sym.to_str().unwrap(), unit.to_str().unwrap()]);
    assert_eq!(code(&same), 0, "{}", String::from_utf8_lossy(&same.stdout));
    let both_unit = blcirk(&["diff-tableau", unit.to_str().unwrap(), unit.to_str().unwrap()]);
    assert_eq!(code(&both_unit), 0);
    // routes differ by more than 10·eps entrywise
    let routes = blcirk(&["diff-tableau", sym.to_str().unwrap(), approx.to_str().unwrap()]);
    assert_eq!(code(&routes), 2);
    let loose = blcirk(&["diff-tableau", sym.to_str().unwrap(), approx.to_str().unwrap(), "--tol", "1e-3"]);
    assert_eq!(code(&loose), 0);

    let st = p("st.json");
    let csv = p("sweep.csv");
    let o = blcirk(&[
        "stability",
        sym.to_str().unwrap(),
        "-o",
        st.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--grid",
        "256",
        "--compare-gauss-legendre",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&st).unwrap()).unwrap();
    assert!(v["report"]["eigen"]["min_real_part"].as_f64().unwrap() > 0.0);
    assert!(v["gauss_legendre"].is_object());
    assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 256);
}

#[test]
fn exit_codes() {
    // usage errors
    assert_eq!(code(&blcirk(&["bogus"])), 1);
    assert_eq!(code(&blcirk(&["quad", "--c", "10"])), 1);
    assert_eq!(code(&blcirk(&["--help"])), 0);
    // invalid input
    assert_eq!(code(&blcirk(&["quad", "--c", "-1", "--eps", "1e-10"])), 1);
    assert_eq!(code(&blcirk(&["stability", "/nonexistent/t.json"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{ not json").unwrap();
    assert_eq!(code(&blcirk(&["stability", junk.to_str().unwrap()])), 1);
    // numerical failure: too few nodes for the requested accuracy
    let o = blcirk(&["tableau", "--c", "10", "--eps", "1e-13", "--m", "4"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("certificate"));
}

fn write_config(dir: &Path, model: Option<&str>, n_full: usize) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "state0": { "r": [7000.0, 0.0, 0.0], "v": [0.0, 6.5, 4.0], "t": 0.0 },
        "t_span": 6000.0,
        "n_intervals": 12,
        "nodes": 24,
        "eps": 1e-13,
        "model_file": model,
        "N_full": n_full,
        "N_low": 0,
        "reference_step": 20.0,
        "schedule": { "phases": [ { "force": "full", "sweeps": { "until_converged": { "max": 100 } } } ] }
    });
    let p = dir.join("run.json");
    std::fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p
}

#[test]
fn propagate_two_body() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), None, 0);
    let out = dir.path().join("out");
    let o = blcirk(&["propagate", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,y,z,vx,vy,vz"));
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 6000.0);
    let s0 = OrbitState::new([7000.0, 0.0, 0.0], [0.0, 6.5, 4.0], 0.0);
    let k = kepler_oracle(blcirk::gravity::MU_EARTH, &s0, 6000.0).unwrap();
    assert!(relative_position_error([last[1], last[2], last[3]], k.r) < 1e-10);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(m["report"]["kepler_relative_error"].as_f64().unwrap() < 1e-10);
    assert_eq!(m["histories"].as_array().unwrap().len(), 12);
}

#[test]
fn propagate_resolves_model_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(data("egm96_deg2.txt"), dir.path().join("field.txt")).unwrap();
    let cfg = write_config(dir.path(), Some("field.txt"), 2);
    // run from elsewhere so only config-relative resolution can find the file
    let o = Command::new(env!("CARGO_BIN_EXE_blcirk"))
        .args(["propagate", cfg.to_str().unwrap()])
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(m["report"]["final_relative_deviation"].as_f64().unwrap() < 1e-10);

    let missing = write_config(dir.path(), Some("absent.txt"), 2);
    let o = blcirk(&["propagate", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.txt"));
}
