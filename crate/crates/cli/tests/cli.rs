use std::path::Path;
use std::process::{Command, Output};

use elliptica_core::elliptic::{kronecker_phi_q_series, EllipticCurve, Tau};
use elliptica_core::identities::REQUIRED_IDS;
use num_complex::Complex64 as C;
use serde_json::Value;

fn elliptica(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elliptica"))
        .args(args)
        .env_remove("ELLIPTICA_SEED")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn check_two_ids_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let o = elliptica(&[
        "check",
        "--ids",
        "unitarity,fay_mat2",
        "--n",
        "2,3",
        "--seed",
        "7",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&path);
    assert_eq!(v["checks"].as_array().unwrap().len(), 2);
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["config"]["seed"], 7);
    assert!(v["checks"][1]["worst_sample"]["hbar"]["im"].is_f64());
    assert!(v["checks"][0]["max_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn unknown_id_is_usage_error() {
    let o = elliptica(&["check", "--ids", "nosuch"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nosuch"));
}

#[test]
fn malformed_arguments_are_usage_errors() {
    assert_eq!(elliptica(&["check", "--tau", "0.01i"]).status.code(), Some(2));
    assert_eq!(
        elliptica(&["check", "--tolerance", "heat"]).status.code(),
        Some(2)
    );
    assert_eq!(elliptica(&["pvi", "--nu", "0.1,0.2"]).status.code(), Some(2));
    assert_eq!(elliptica(&["pvi", "--u0", "0.01+0.01i"]).status.code(), Some(2));
    assert_eq!(elliptica(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn tolerance_override_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let p = path.to_str().unwrap();
    let o = elliptica(&[
        "check",
        "--ids",
        "heat",
        "--count",
        "6",
        "--tolerance",
        "heat=1e-5",
        "-o",
        p,
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = read_json(&path);
    assert_eq!(v["checks"][0]["tolerance"].as_f64(), Some(1e-5));
    assert_eq!(v["config"]["tolerance_overrides"]["heat"].as_f64(), Some(1e-5));

    let o = elliptica(&[
        "check",
        "--ids",
        "unitarity",
        "--count",
        "3",
        "--tolerance",
        "unitarity=1e-30",
        "-o",
        p,
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v = read_json(&path);
    assert_eq!(v["pass"], Value::Bool(false));
}

#[test]
fn reports_are_reproducible_and_seed_env_applies() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, env_seed: Option<&str>, extra: &[&str]| {
        let path = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_elliptica"));
        cmd.args([
            "check",
            "--ids",
            "aybe,qp_gamma_h,kappa_sum",
            "--count",
            "8",
            "-o",
        ])
        .arg(&path)
        .args(extra)
        .env_remove("ELLIPTICA_SEED");
        if let Some(s) = env_seed {
            cmd.env("ELLIPTICA_SEED", s);
        }
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
        let mut v = read_json(&path);
        v["wall_time_s"] = Value::from(0.0);
        v
    };
    let a = run("a.json", None, &["--threads", "1"]);
    let b = run("b.json", None, &[]);
    assert_eq!(a, b);
    assert_eq!(a["config"]["seed"], 42);
    let c = run("c.json", Some("9"), &[]);
    assert_eq!(c["config"]["seed"], 9);
    assert_ne!(c["checks"], a["checks"]);
    let d = run("d.json", Some("9"), &["--seed", "42"]);
    assert_eq!(d, a);
}

#[test]
fn check_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let o = elliptica(&[
        "check",
        "--ids",
        "sym_args,residue_z",
        "--count",
        "4",
        "--format",
        "csv",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&path);
    assert_eq!(header[0], "id");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "residue_z");
}

#[test]
fn pvi_default_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let o = elliptica(&["pvi", "-o", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&path);
    assert!(rows.len() >= 100);
    let cols: Vec<usize> = (0..3)
        .map(|k| col(&header, &format!("residual_hbar{k}")))
        .collect();
    let worst = rows
        .iter()
        .flat_map(|r| cols.iter().map(|&c| r[c].parse::<f64>().unwrap()))
        .fold(0.0, f64::max);
    assert!(worst < 1e-7);
    let last = rows.last().unwrap();
    assert!((last[col(&header, "tau_im")].parse::<f64>().unwrap() - 1.2).abs() < 1e-12);
}

#[test]
fn pvi_free_motion_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let o = elliptica(&["pvi", "--nu", "0,0,0,0", "-o", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&path);
    let last = rows.last().unwrap();
    let u = C::new(
        last[col(&header, "u_re")].parse().unwrap(),
        last[col(&header, "u_im")].parse().unwrap(),
    );
    let want = C::new(0.31, 0.126) + C::new(0.05, 0.0) * C::new(0.0, 0.3);
    assert!((u - want).norm() < 1e-12, "{u}");
}

#[test]
fn pvi_even_rank_reports_single_constant() {
    let o = elliptica(&["pvi", "--n", "2", "--nu", "0.1,0.2,0.3,0.4", "-o", "/dev/null"]);
    assert!(stderr(&o).contains("ν² = Σ ν_a² = 0.300000"), "{}", stderr(&o));
}

#[test]
fn pvi_pole_approach_halts_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let o = elliptica(&[
        "pvi",
        "--nu",
        "0,0,0,0",
        "--u0",
        "0.15",
        "--v0",
        "0.5i",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("pole approach"));
    let (_, rows) = csv_rows(&path);
    assert!(rows.len() > 1);
}

#[test]
fn table_grid_flags_origin() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    let o = elliptica(&["table", "--grid", "10x10", "-o", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&path);
    assert_eq!(header.len(), 13);
    assert_eq!(rows.len(), 100);
    let flag = col(&header, "pole_flag");
    for r in &rows {
        let at_origin = r[0].parse::<f64>().unwrap() == 0.0 && r[1].parse::<f64>().unwrap() == 0.0;
        assert_eq!(r[flag] == "1", at_origin);
        if r[flag] == "0" {
            assert!(r[4..12].iter().all(|x| x.parse::<f64>().unwrap().is_finite()));
        } else {
            assert!(r[4..12].iter().all(|x| x.is_empty()));
        }
    }
}

#[test]
fn table_single_point_matches_library_and_q_series() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let o = elliptica(&["table", "--z", "0.2", "--u", "0.3", "-o", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&path);
    assert_eq!(rows.len(), 1);
    let get = |name: &str| rows[0][col(&header, name)].parse::<f64>().unwrap();
    let phi = C::new(get("phi_re"), get("phi_im"));
    let tau = Tau::new(C::new(0.0, 0.8)).unwrap();
    let (z, u) = (C::new(0.2, 0.0), C::new(0.3, 0.0));
    assert!((phi - kronecker_phi_q_series(z, u, tau).unwrap()).norm() < 1e-12);
    let cv = EllipticCurve::new(tau).unwrap();
    assert_eq!(phi, cv.phi(z, u).unwrap());
    assert_eq!(C::new(get("wp_re"), get("wp_im")), cv.wp(z).unwrap());
}

#[test]
fn list_covers_required_ids() {
    let o = elliptica(&["list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let ids: Vec<String> = r.records().map(|x| x.unwrap()[0].to_string()).collect();
    for id in REQUIRED_IDS {
        assert!(ids.iter().any(|x| x == id), "{id}");
    }
    let o = elliptica(&["list", "--format", "json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), ids.len());
}

#[test]
fn gnuplot_hint_goes_to_stderr() {
    let o = elliptica(&["--gnuplot-hint", "table", "--z", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("gnuplot"));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("gnuplot"));
}
