use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const HEAT: &str = "n = 1\nd = 1\nm = 2\nmass = [1.0]\n\n[[coeff]]\nalpha = [2]\nmatrix = [-1.0]\n";

fn dissipa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dissipa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn heat_doc(dir: &Path) -> PathBuf {
    let p = dir.join("heat.toml");
    std::fs::write(&p, HEAT).unwrap();
    p
}

#[test]
fn analyze_nsk2d_is_regularity_gain() {
    let out = dissipa(&["analyze", "nsk2d"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["status"], "ok");
    let c = &r["verdicts"]["classification"]["result"];
    assert_eq!((c["p"].as_u64(), c["q"].as_u64()), (Some(1), Some(0)));
    assert_eq!(c["kind"], "regularity-gain");
    assert_eq!(r["verdicts"]["coupling"]["coupled"], true);
    assert_eq!(r["verdicts"]["friedrichs"]["verdict"], "infeasible");
    assert!(r["compensator"]["min_theta"].as_f64().unwrap() > 0.0);
    assert_eq!(r["provenance"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn analyze_efk_3d_fails_coupling_with_witness() {
    let out = dissipa(&["analyze", "efk-md", "--d", "3"]);
    assert_eq!(out.status.code(), Some(3));
    let r = json(&out);
    let c = &r["verdicts"]["coupling"];
    assert_eq!(c["coupled"], false);
    let w = &c["witness"];
    assert!(w["b_s_psi_norm"].as_f64().unwrap() <= 1e-10);
    let psi: Vec<f64> = w["psi"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let xi: Vec<f64> = w["xi"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(psi.len(), 5);
    assert!(psi[0].abs() < 1e-8 && psi[4].abs() < 1e-8);
    let dot: f64 = psi[1..4].iter().zip(&xi).map(|(a, b)| a * b).sum();
    assert!(dot.abs() < 1e-8 * xi.iter().map(|x| x * x).sum::<f64>().sqrt());
}

#[test]
fn analyze_full_qhd_reports_infeasibility() {
    let out = dissipa(&["analyze", "qhd-full", "--grid.directions", "8"]);
    assert_eq!(out.status.code(), Some(4));
    let r = json(&out);
    assert_eq!(r["verdicts"]["symmetrizer"]["status"], "absent");
    assert_eq!(r["verdicts"]["friedrichs"]["verdict"], "infeasible");
    let p = &r["verdicts"]["pointwise"];
    let threshold = p["threshold"].as_f64().unwrap();
    let from = p["infeasible_from"].as_f64().unwrap();
    assert!(threshold > 5.0 && threshold < 10.0);
    assert!(
        from >= threshold && from < 1.6 * threshold,
        "{from} vs {threshold}"
    );
}

#[test]
fn heat_sweep_has_one_row_per_radius() {
    let dir = tempfile::tempdir().unwrap();
    let heat = heat_doc(dir.path());
    let out = dissipa(&[
        "sweep",
        heat.to_str().unwrap(),
        "--grid.r_min",
        "0.1",
        "--grid.r_max",
        "10",
        "--grid.per_decade",
        "1",
        "--grid.directions",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "xi_1,radius,re_lambda_1,im_lambda_1,max_re,theta");
    assert!(lines[2].starts_with("1.0,1.0,-1.0,"));
    assert!(!text.contains('\r'));
}

#[test]
fn nsk2d_default_sweep_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dissipa(&["sweep", "nsk2d", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 64 * 97);
}

#[test]
fn outputs_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let heat = heat_doc(dir.path());
    let args = [
        "sweep",
        heat.to_str().unwrap(),
        "--format",
        "json",
        "--grid.per_decade",
        "4",
    ];
    let a = dissipa(&args);
    let b = dissipa(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["records"].as_array().unwrap().len(), 2 * 25);

    let r1 = dissipa(&["analyze", "efk1d", "--seed", "11"]);
    let r2 = dissipa(&["analyze", "efk1d", "--seed", "11"]);
    assert_eq!(r1.stdout, r2.stdout);
    let r3 = dissipa(&["analyze", "efk1d", "--seed", "12"]);
    assert_ne!(
        json(&r1)["provenance"]["config_hash"],
        json(&r3)["provenance"]["config_hash"]
    );
    assert_eq!(json(&r3)["provenance"]["seed"], 12);
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "model = \"nsk2d\"\nseed = 5\n\n[grid]\nper_decade = 10\ndirections = 8\n\n[params]\nk = 2.0\n")
        .unwrap();
    let a = dissipa(&["analyze", "--config", cfg.to_str().unwrap()]);
    let b = dissipa(&[
        "analyze",
        "--model",
        "nsk2d",
        "--seed",
        "5",
        "--grid.per_decade",
        "10",
        "--grid.directions",
        "8",
        "--param",
        "k=2.0",
    ]);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(a.stdout, b.stdout);
    assert!(json(&a)["model"]["params"]
        .as_str()
        .unwrap()
        .contains("k = 2.0"));
}

#[test]
fn simulate_decay_rates() {
    let out = dissipa(&["simulate", "nsk2d", "--format", "json"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let e = json(&out)["series"]["exponent"].as_f64().unwrap();
    assert!((e + 0.5).abs() <= 0.1, "nsk2d exponent {e}");

    let out = dissipa(&["simulate", "efk1d", "--format", "json"]);
    let e = json(&out)["series"]["exponent"].as_f64().unwrap();
    assert!((e + 0.25).abs() <= 0.1, "efk1d exponent {e}");
}

#[test]
fn simulate_starts_at_the_initial_norm() {
    let dir = tempfile::tempdir().unwrap();
    let heat = heat_doc(dir.path());
    let out_dir = dir.path().join("out");
    let out = dissipa(&[
        "simulate",
        heat.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(out_dir.join("decay.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,norm,fitted_rate_running"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0.0");
    // (2π)^{-1} ∫ (1+ξ²) e^{-2ξ²} dξ with the default first-component weight
    let exact = ((std::f64::consts::PI / 2.0).sqrt() * 1.25 / (2.0 * std::f64::consts::PI)).sqrt();
    let norm: f64 = first[1].parse().unwrap();
    assert!((norm - exact).abs() < 1e-3 * exact, "{norm} vs {exact}");
    assert!(out_dir.join("simulate.json").is_file());
}

#[test]
fn asymptotics_table() {
    let out = dissipa(&["asymptotics", "dnsf1d", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let rows = v["closed_forms"].as_array().unwrap();
    let get = |q: &str| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r["quantity"] == q)
            .map(|r| {
                (
                    r["closed_form"].as_f64().unwrap(),
                    r["rel_error"].as_f64().unwrap(),
                )
            })
            .collect()
    };
    let c3 = get("lambda3_fast");
    assert_eq!(c3.len(), 2);
    assert!(c3
        .iter()
        .all(|(c, e)| (c.abs() - 8.0 / 9.0 * 1.5f64.sqrt()).abs() < 1e-12 && *e < 0.01));
    assert!(c3[0].0 * c3[1].0 < 0.0);
    assert!(get("lambda2_fast")
        .iter()
        .all(|(c, e)| *c == 1.0 && *e < 0.01));
    let reference = get("lambda-2_slow_reference");
    assert_eq!(reference[0].0, 1.125);
    assert!(reference[0].1 > 0.4);
    assert!(get("lambda-2_slow_derived")[0].1 < 0.01);

    let dir = tempfile::tempdir().unwrap();
    let heat = heat_doc(dir.path());
    let out = dissipa(&["asymptotics", heat.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text
        .lines()
        .find(|l| l.starts_with("scalar_exact,0,2,"))
        .unwrap();
    let rel: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
    assert!(rel < 1e-10);

    let out = dissipa(&["asymptotics", "nsk2d"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn list_and_errors() {
    let out = dissipa(&["list-models"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 9);
    let out = dissipa(&["list-models", "--format", "json"]);
    assert_eq!(json(&out)["models"].as_array().unwrap().len(), 8);

    let out = dissipa(&["analyze", "no-such-model"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown model"));
    let out = dissipa(&["analyze", "nsk2d", "--tol.strict", "-1"]);
    assert_eq!(out.status.code(), Some(5));
    let out = dissipa(&["analyze", "nsk2d", "--param", "rho=-1"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn thread_cap_is_honoured() {
    let out = Command::new(env!("CARGO_BIN_EXE_dissipa"))
        .args(["analyze", "efk1d"])
        .env("DISSIPA_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let base = dissipa(&["analyze", "efk1d"]);
    assert_eq!(out.stdout, base.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_dissipa"))
        .args(["list-models"])
        .env("DISSIPA_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(5));
}
