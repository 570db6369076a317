//! End-to-end checks of the `dpfeat` binary and its file formats.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dpfeat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpfeat")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = dpfeat(args);
    assert!(
        out.status.success(),
        "dpfeat {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn keys(v: &Value) -> Vec<String> {
    let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
    k.sort();
    k
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_INI: &str = "[oracle]\nd = 4\nn_pub = 400\nn_priv = 200\nmodes = 3\nprivate_modes = 0\n\
[privacy]\neps = inf, 1\n[dre]\niters = 50\n[gan]\niters = 3\neval_samples = 50\npretrain_iters = 3\n\
[metrics]\nn_eval = 200\n[run]\nseeds = 0\ntiming = false\n";

#[test]
fn calibrate_prints_schema() {
    let out = ok(&[
        "calibrate",
        "--eps",
        "1",
        "--delta",
        "1e-5",
        "--q",
        "0.01",
        "--steps",
        "1000",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(keys(&v), ["alpha_star", "eps_achieved", "sigma"]);
    let eps = v["eps_achieved"].as_f64().unwrap();
    assert!((0.9999..=1.0).contains(&eps));
    let grid = ok(&[
        "calibrate",
        "--eps",
        "1",
        "--q",
        "0.01",
        "--steps",
        "1000",
        "--grid-max",
        "32",
    ]);
    let g: Value = serde_json::from_slice(&grid.stdout).unwrap();
    assert!(g["alpha_star"].as_u64().unwrap() <= 32);
}

#[test]
fn model_pipeline_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let ini = p("run.ini");
    std::fs::write(&ini, SMALL_INI).unwrap();
    ok(&[
        "gen-synthetic",
        "--config",
        s(&ini),
        "--seed",
        "1",
        "--pub",
        s(&p("pub.dpfv")),
        "--priv",
        s(&p("priv.csv")),
    ]);
    assert!(std::fs::read_to_string(p("priv.csv")).unwrap().starts_with("d=4"));

    ok(&[
        "fit-mge",
        "--in",
        s(&p("priv.csv")),
        "--eps",
        "1",
        "--seed",
        "2",
        "--out",
        s(&p("mge.json")),
    ]);
    let mge = json_file(&p("mge.json"));
    assert_eq!(keys(&mge), ["delta", "eps", "mu", "s"]);
    ok(&[
        "sample",
        "--model",
        s(&p("mge.json")),
        "--k",
        "50",
        "--out",
        s(&p("mge.csv")),
    ]);
    assert_eq!(std::fs::read_to_string(p("mge.csv")).unwrap().lines().count(), 51);

    ok(&[
        "train-dre",
        "--priv",
        s(&p("priv.csv")),
        "--pub",
        s(&p("pub.dpfv")),
        "--eps",
        "inf",
        "--iters",
        "30",
        "--width",
        "4",
        "--out",
        s(&p("dre.json")),
    ]);
    assert_eq!(json_file(&p("dre.json"))["eps_achieved"], "inf");
    // Discriminators need the pool they reweight.
    assert!(!dpfeat(&[
        "sample",
        "--model",
        s(&p("dre.json")),
        "--k",
        "5",
        "--out",
        s(&p("x.csv"))
    ])
    .status
    .success());
    ok(&[
        "sample",
        "--model",
        s(&p("dre.json")),
        "--pub",
        s(&p("pub.dpfv")),
        "--k",
        "100",
        "--seed",
        "3",
        "--out",
        s(&p("dre.dpfv")),
    ]);

    ok(&[
        "train-gan",
        "--priv",
        s(&p("priv.csv")),
        "--pretrain-pub",
        s(&p("pub.dpfv")),
        "--eps",
        "3",
        "--iters",
        "3",
        "--zdim",
        "3",
        "--width",
        "8",
        "--gp-style",
        "standard",
        "--out",
        s(&p("gan.json")),
    ]);
    ok(&[
        "sample",
        "--model",
        s(&p("gan.json")),
        "--k",
        "20",
        "--out",
        s(&p("gan.csv")),
    ]);

    ok(&[
        "evaluate",
        "--real",
        s(&p("priv.csv")),
        "--fake",
        s(&p("dre.dpfv")),
        "--metric",
        "all",
        "--out",
        s(&p("report.json")),
    ]);
    let report = json_file(&p("report.json"));
    assert_eq!(
        keys(&report),
        [
            "fid",
            "ndb_count",
            "ndb_fraction",
            "per_bin",
            "prd_curve",
            "precision",
            "recall"
        ]
    );
    let fid_only = ok(&[
        "evaluate",
        "--real",
        s(&p("priv.csv")),
        "--fake",
        s(&p("mge.csv")),
        "--metric",
        "fid",
    ]);
    let v: Value = serde_json::from_slice(&fid_only.stdout).unwrap();
    assert!(v["fid"].is_number() && v["precision"].is_null());
}

#[test]
fn experiment_writes_reports_and_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("run.ini");
    std::fs::write(&ini, SMALL_INI).unwrap();
    let out = dir.path().join("res");
    ok(&["experiment", "--config", s(&ini), "--out", s(&out)]);
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,eps,seed,fid,precision,recall,ndb_count,ndb_fraction,superclass_mass,wall_ms"
    );
    // 4 private methods x 2 eps + the uniform baseline, one seed.
    assert_eq!(lines.count(), 9);
    let table = json_file(&out.join("results.json"));
    assert_eq!(table["rows"].as_array().unwrap().len(), 9);

    // An epsilon no noise level in the calibration bracket reaches: the cell fails, the run completes.
    std::fs::write(
        &ini,
        SMALL_INI
            .replace("eps = inf, 1", "eps = 1e-9")
            .replace("[run]", "[run]\nmethods = dp-dre"),
    )
    .unwrap();
    let failed = dpfeat(&["experiment", "--config", s(&ini), "--out", s(&out)]);
    assert_eq!(failed.status.code(), Some(1));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "dp-dre,,0,,,,,,,0");
}

#[test]
fn bad_inputs_report_location() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("bad.ini");
    std::fs::write(&ini, "[oracle]\nd = 4\nwidth = 3\n").unwrap();
    let out = dpfeat(&["experiment", "--config", s(&ini), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "d=2\n0.1,0.2\n0.3,abc\n").unwrap();
    let out = dpfeat(&[
        "fit-mge",
        "--in",
        s(&csv),
        "--eps",
        "1",
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("column 2"), "{err}");

    // Rows outside the unit ball are rejected before any private computation.
    std::fs::write(&csv, "d=2\n0.9,0.9\n0.1,0.1\n").unwrap();
    let out = dpfeat(&[
        "fit-mge",
        "--in",
        s(&csv),
        "--eps",
        "1",
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert!(!out.status.success());
}
