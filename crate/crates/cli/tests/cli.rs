use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mdlsynth::Circuit;
use serde_json::Value;

fn mdlsynth(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdlsynth"))
        .arg("--out-dir")
        .arg(out_dir)
        .args(["--log-level", "warn"])
        .args(args)
        .env_remove("MDLSYN_OUT_DIR")
        .env_remove("MDLSYN_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdlsynth(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "gen",
        "train",
        "synth",
        "oracle",
        "optimize",
        "bench",
        "metrics-trace",
        "quickstart",
    ] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn synth_without_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdlsynth(dir.path(), &["synth", "--target", "x.circ"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mdlsynth(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn operational_errors_exit_one_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdlsynth(dir.path(), &["optimize", "--circuit", "missing.circ"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("missing.circ"));
}

#[test]
fn outputs_cannot_escape_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let inner = dir.path().join("out");
    fs::create_dir(&inner).unwrap();
    let circ = dir.path().join("c.circ");
    fs::write(&circ, "QUBITS 1\nH 0\nH 0\n").unwrap();
    for bad in ["../escape.circ", "/tmp/escape.circ"] {
        let out = mdlsynth(
            &inner,
            &[
                "optimize",
                "--circuit",
                circ.to_str().unwrap(),
                "--out",
                bad,
            ],
        );
        assert_eq!(out.status.code(), Some(1), "{bad}");
    }
    assert!(!dir.path().join("escape.circ").exists());
}

#[test]
fn optimize_cancels_gates() {
    let dir = tempfile::tempdir().unwrap();
    let circ = dir.path().join("c.circ");
    fs::write(&circ, "QUBITS 2\n# comment\nH 0\nH 0\nCX 0 1\nT 1\nT 1\n").unwrap();
    let out = mdlsynth(
        dir.path(),
        &[
            "optimize",
            "--circuit",
            circ.to_str().unwrap(),
            "--out",
            "o.circ",
        ],
    );
    ok(&out);
    let c: Circuit = fs::read_to_string(dir.path().join("o.circ"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(c.len(), 2);
}

#[test]
fn oracle_reports_depth_and_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let ghz = dir.path().join("ghz.circ");
    fs::write(&ghz, "QUBITS 3\nH 0\nCX 0 1\nCX 1 2\n").unwrap();
    let out = mdlsynth(
        dir.path(),
        &[
            "oracle",
            "--target",
            ghz.to_str().unwrap(),
            "--max-depth",
            "4",
            "--out",
            "w.circ",
        ],
    );
    ok(&out);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["found"], true);
    assert_eq!(report["depth"], 3);
    assert!(dir.path().join("w.circ").exists());

    let out = mdlsynth(
        dir.path(),
        &[
            "oracle",
            "--target",
            ghz.to_str().unwrap(),
            "--max-depth",
            "2",
        ],
    );
    ok(&out);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["found"], false);
    assert_eq!(report["lower_bound"], 3);
}

#[test]
fn matrix_targets_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let c: Circuit = "QUBITS 1\nH 0\nT 0\n".parse().unwrap();
    let mat = dir.path().join("t.mat");
    fs::write(&mat, c.unitary().to_mat_text()).unwrap();
    let out = mdlsynth(
        dir.path(),
        &[
            "oracle",
            "--target",
            mat.to_str().unwrap(),
            "--max-depth",
            "3",
        ],
    );
    ok(&out);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["depth"], 2);
}

#[test]
fn gen_train_synth_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&mdlsynth(
        p,
        &[
            "--seed",
            "3",
            "gen",
            "--qubits",
            "2",
            "--count",
            "4000",
            "--t-max",
            "6",
            "--max-gates",
            "14",
        ],
    ));
    let data = p.join("data.mdld");
    assert!(data.exists());
    ok(&mdlsynth(
        p,
        &[
            "--seed",
            "3",
            "train",
            "--data",
            data.to_str().unwrap(),
            "--epochs",
            "3",
            "--steps-per-epoch",
            "80",
            "--validation-size",
            "256",
            "--t-max",
            "6",
            "--max-gates",
            "14",
        ],
    ));
    let metrics = fs::read_to_string(p.join("train_metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,train_mse,val_mse,val_mae,val_r2,lr\n"));
    assert_eq!(metrics.lines().count(), 4);

    // Held out: four gates with no shorter equivalent.
    let target_circ: Circuit = "QUBITS 2\nH 0\nT 0\nCX 0 1\nH 1\n".parse().unwrap();
    let target = p.join("target.circ");
    fs::write(&target, target_circ.to_text()).unwrap();
    let out = mdlsynth(
        p,
        &[
            "--seed",
            "1",
            "synth",
            "--target",
            target.to_str().unwrap(),
            "--model",
            p.join("model.mdlm").to_str().unwrap(),
            "--trials",
            "20",
            "--max-steps",
            "16",
        ],
    );
    ok(&out);
    let report = read_json(&p.join("report.json"));
    assert_eq!(report["success"], true);
    assert_eq!(report["gate_count"], 4);
    assert_eq!(report["t_count"], 1);
    assert!(report["fidelity"].as_f64().unwrap() >= 0.99);
    assert_eq!(report["trials"].as_array().unwrap().len(), 20);
    let found: Circuit = fs::read_to_string(p.join("circuit.circ"))
        .unwrap()
        .parse()
        .unwrap();
    let f = mdlsynth::avg_fidelity(&found.unitary(), &target_circ.unitary()).unwrap();
    assert!(f.value() >= 0.99);

    // The trace ends at the identity.
    ok(&mdlsynth(
        p,
        &[
            "metrics-trace",
            "--circuit",
            target.to_str().unwrap(),
            "--model",
            p.join("model.mdlm").to_str().unwrap(),
        ],
    ));
    let trace = fs::read_to_string(p.join("trace.csv")).unwrap();
    let rows: Vec<&str> = trace.lines().collect();
    assert_eq!(rows[0], "step,d_hs,d_worst,f_avg,predicted_mdl");
    assert_eq!(rows.len(), 6);
    let last: Vec<f64> = rows[5].split(',').map(|x| x.parse().unwrap()).collect();
    assert!(last[1].abs() < 1e-6 && (last[3] - 1.0).abs() < 1e-9);
}

#[test]
fn unreachable_target_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&mdlsynth(
        p,
        &[
            "train",
            "--stream",
            "--qubits",
            "1",
            "--epochs",
            "1",
            "--steps-per-epoch",
            "5",
            "--validation-size",
            "16",
            "--hidden",
            "8",
        ],
    ));
    let target = p.join("t.circ");
    fs::write(
        &target,
        "QUBITS 1\nH 0\nT 0\nH 0\nT 0\nH 0\nT 0\nH 0\nT 0\n",
    )
    .unwrap();
    let out = mdlsynth(
        p,
        &[
            "synth",
            "--target",
            target.to_str().unwrap(),
            "--model",
            p.join("model.mdlm").to_str().unwrap(),
            "--trials",
            "2",
            "--max-steps",
            "2",
            "--report",
            "r.json",
        ],
    );
    ok(&out);
    let report = read_json(&p.join("r.json"));
    assert_eq!(report["success"], false);
    assert!(report["gate_count"].is_null());
    assert!(!p.join("circuit.circ").exists());
}

#[test]
fn single_qubit_quickstart_solves_exhaustive_suite() {
    let dir = tempfile::tempdir().unwrap();
    ok(&mdlsynth(
        dir.path(),
        &[
            "--seed",
            "2",
            "quickstart",
            "--qubits",
            "1",
            "--examples",
            "5000",
        ],
    ));
    let q = dir.path().join("quickstart");
    let report = read_json(&q.join("exhaustive_report.json"));
    let entries = report["entries"].as_array().unwrap();
    assert!(entries.len() > 20);
    for e in entries {
        assert_eq!(e["success"], true, "{}", e["name"]);
    }
    let summary = read_json(&q.join("summary.json"));
    assert!(summary["timing"]["total_secs"].as_f64().unwrap() > 0.0);
}

#[test]
fn bench_subcommands_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&mdlsynth(
        p,
        &[
            "train",
            "--stream",
            "--qubits",
            "2",
            "--epochs",
            "2",
            "--steps-per-epoch",
            "40",
            "--validation-size",
            "64",
        ],
    ));
    let model = p.join("model.mdlm");
    let model = model.to_str().unwrap();
    ok(&mdlsynth(
        p,
        &["bench", "structured", "--model", model, "--trials", "10"],
    ));
    let rep = read_json(&p.join("structured_report.json"));
    assert_eq!(rep["entries"].as_array().unwrap().len(), 3);
    assert!(rep.get("timing").is_some());

    ok(&mdlsynth(
        p,
        &[
            "bench",
            "sweep",
            "--model",
            model,
            "--budgets",
            "1,3,6",
            "--per-bucket",
            "3",
            "--t-max",
            "2",
            "--max-gates",
            "10",
            "--emit-svg",
        ],
    ));
    let csv = fs::read_to_string(p.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("budget,solved,total,rate,ci99_low,ci99_high\n"));
    assert_eq!(csv.lines().count(), 4);
    assert!(fs::read_to_string(p.join("sweep_curve.svg"))
        .unwrap()
        .starts_with("<svg"));

    let bad = mdlsynth(p, &["bench", "sweep", "--model", model, "--budgets", "5,1"]);
    assert_eq!(bad.status.code(), Some(1));
}
