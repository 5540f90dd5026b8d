//! End-to-end tests of the `qpnn` binary: every subcommand runs against
//! real files in a temp directory, and exit codes separate bad input (1),
//! failed verification (2), and numerical breakdown (3).

use num_complex::Complex64;
use qpnn_core::linalg::{haar_unitary_seeded, CMat};
use qpnn_core::mesh::{reconstruct, MeshPlan};
use std::path::Path;
use std::process::{Command, Output};

fn qpnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_matrix(path: &Path, u: &CMat) {
    let grid = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
        u.rows().into_iter().map(|r| r.iter().map(f).collect()).collect()
    };
    let value = serde_json::json!({ "re": grid(|z| z.re), "im": grid(|z| z.im) });
    std::fs::write(path, serde_json::to_string(&value).unwrap()).unwrap();
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn decompose_round_trips_a_fourier_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let n = 3;
    let mut u = CMat::zeros((n, n));
    for j in 0..n {
        for k in 0..n {
            let arg = 2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64;
            u[[j, k]] = Complex64::from_polar(1.0 / (n as f64).sqrt(), arg);
        }
    }
    write_matrix(&dir.path().join("u.json"), &u);
    let out = qpnn(dir.path(), &["decompose", "--config", "u.json", "--out", "run"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let plan: MeshPlan =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/plan.json")).unwrap())
            .unwrap();
    let rebuilt = reconstruct(&plan).unwrap();
    let err = (&rebuilt - &u).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(err < 1e-9, "stored plan must rebuild the input, off by {err:.2e}");
    assert!(dir.path().join("run/manifest.json").exists(), "every run writes a manifest");
}

#[test]
fn decompose_rejects_a_non_unitary_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let mut u = haar_unitary_seeded(4, 5);
    u[[0, 0]] += Complex64::new(0.5, 0.0);
    write_matrix(&dir.path().join("bad.json"), &u);
    let out = qpnn(dir.path(), &["decompose", "--config", "bad.json", "--out", "run"]);
    assert_eq!(out.status.code(), Some(1), "non-unitary input is a validation error");
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("not unitary"),
        "the error names the problem"
    );
}

#[test]
fn schedule_verifies_a_six_mode_mesh() {
    let dir = tempfile::tempdir().unwrap();
    write_matrix(&dir.path().join("u.json"), &haar_unitary_seeded(6, 42));
    let d = qpnn(dir.path(), &["decompose", "--config", "u.json", "--out", "dec"]);
    assert_eq!(d.status.code(), Some(0));
    let out = qpnn(dir.path(), &["schedule", "--config", "dec/plan.json", "--out", "sch"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_of(&out).starts_with("PASS"), "verdict goes to stdout: {}", stdout_of(&out));

    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sch/verification.json")).unwrap())
            .unwrap();
    assert_eq!(verdict["pass"], true);
    assert_eq!(verdict["span"], 28, "a 6-mode layer spans (N+1)(N+2)/2 bins");
    let table = std::fs::read_to_string(dir.path().join("sch/control_table.csv")).unwrap();
    assert!(
        table.starts_with("t,mzi,theta_rad,phi_rad,switch,ps_rad,top,bottom"),
        "control table header names units"
    );
}

#[test]
fn schedule_fails_on_a_corrupted_plan() {
    let dir = tempfile::tempdir().unwrap();
    write_matrix(&dir.path().join("u.json"), &haar_unitary_seeded(6, 43));
    let d = qpnn(dir.path(), &["decompose", "--config", "u.json", "--out", "dec"]);
    assert_eq!(d.status.code(), Some(0));
    let mut plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dec/plan.json")).unwrap())
            .unwrap();
    let dup = plan["placements"][0].clone();
    plan["placements"].as_array_mut().unwrap().push(dup);
    std::fs::write(dir.path().join("dec/plan.json"), serde_json::to_string(&plan).unwrap())
        .unwrap();
    let out = qpnn(dir.path(), &["schedule", "--config", "dec/plan.json", "--out", "sch"]);
    assert_eq!(out.status.code(), Some(2), "a plan that cannot compile fails verification");
    assert!(stdout_of(&out).contains("FAIL"), "verdict goes to stdout");
}

#[test]
fn train_runs_are_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "task": "cnot",
        "train": { "epochs": 25, "trials": 2, "seed": 9 }
    });
    std::fs::write(dir.path().join("cfg.json"), cfg.to_string()).unwrap();
    for run in ["a", "b"] {
        let out = qpnn(dir.path(), &["train", "--config", "cfg.json", "--out", run]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |run: &str, name: &str| std::fs::read(dir.path().join(run).join(name)).unwrap();
    assert_eq!(
        read("a", "records.jsonl"),
        read("b", "records.jsonl"),
        "identical configs reproduce identical records"
    );
    assert_eq!(read("a", "manifest.json"), read("b", "manifest.json"));
    let summary = String::from_utf8(read("a", "summary.csv")).unwrap();
    assert!(summary.starts_with("trial,final_cost,F,eta"), "summary header: {summary}");
    let trajectories = String::from_utf8(read("a", "trajectories.csv")).unwrap();
    assert_eq!(
        trajectories.lines().count(),
        1 + 2 * 25,
        "one row per trial and epoch plus the header"
    );
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "task": "cnot",
        "train": { "epochs": 5, "trials": 1, "seed": 9 }
    });
    std::fs::write(dir.path().join("cfg.json"), cfg.to_string()).unwrap();
    let a = qpnn(dir.path(), &["train", "--config", "cfg.json", "--out", "a", "--seed", "10"]);
    assert_eq!(a.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 10, "the manifest records the effective seed");
}

#[test]
fn evaluate_reports_the_post_selected_linear_gate_under_loss() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "task": "linear_cnot",
        "visibility": [0.0, 0.5, 1.0],
        "budget": { "preset": "nominal", "tau_b": 10.0, "target_alpha": 0.36 }
    });
    std::fs::write(dir.path().join("cfg.json"), cfg.to_string()).unwrap();
    let out = qpnn(dir.path(), &["evaluate", "--config", "cfg.json", "--out", "run"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/report.json")).unwrap())
            .unwrap();
    let last = &reports[2];
    assert!((last["F"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((last["eta"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-9);
    assert!((last["r"].as_f64().unwrap() - 253_968.25).abs() < 1.0, "rate at 36% loss: {last}");
    assert_eq!(last["n_t"], 28);
    let mid = &reports[1];
    assert!((mid["F"].as_f64().unwrap() - 0.75).abs() < 0.01, "F at V = 0.5: {mid}");
    let sweep = std::fs::read_to_string(dir.path().join("run/vsweep.csv")).unwrap();
    assert!(sweep.starts_with("V,F,eta,C_avg,C_raw,alpha,n_t,r_hz"), "sweep header: {sweep}");
}

#[test]
fn evaluate_without_a_model_or_fixed_task_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({ "task": "cnot" });
    std::fs::write(dir.path().join("cfg.json"), cfg.to_string()).unwrap();
    let out = qpnn(dir.path(), &["evaluate", "--config", "cfg.json", "--out", "run"]);
    assert_eq!(out.status.code(), Some(1), "nothing to evaluate is a validation error");
}

#[test]
fn trained_model_evaluates_across_visibilities() {
    let dir = tempfile::tempdir().unwrap();
    let train = serde_json::json!({
        "task": "cnot",
        "train": { "epochs": 60, "trials": 3, "seed": 7 }
    });
    std::fs::write(dir.path().join("train.json"), train.to_string()).unwrap();
    let t = qpnn(dir.path(), &["train", "--config", "train.json", "--out", "model"]);
    assert_eq!(t.status.code(), Some(0));

    let eval = serde_json::json!({
        "model": "model/best_model.json",
        "visibility": [0.0, 1.0]
    });
    std::fs::write(dir.path().join("eval.json"), eval.to_string()).unwrap();
    let out = qpnn(dir.path(), &["evaluate", "--config", "eval.json", "--out", "run"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/report.json")).unwrap())
            .unwrap();
    let f1 = reports[1]["F"].as_f64().unwrap();
    let f0 = reports[0]["F"].as_f64().unwrap();
    assert!(f1 > 0.99, "trained gate at V = 1: F = {f1}");
    assert!(f0 < f1, "distinguishable photons must hurt: F(0) = {f0}, F(1) = {f1}");
}

#[test]
fn visibility_sweep_starts_at_perfect_visibility() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({ "sigma_j": [0.0, 1.0], "samples": 500 });
    std::fs::write(dir.path().join("cfg.json"), cfg.to_string()).unwrap();
    let out = qpnn(dir.path(), &["visibility-sweep", "--config", "cfg.json", "--out", "run"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("run/visibility.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("sigma_j_ns,V,V_analytic,F_in"));
    assert_eq!(lines.next(), Some("0,1,1,1"), "zero jitter leaves photons indistinguishable");
}

#[test]
fn calibrate_loss_hits_the_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "N": 6, "L": 1,
        "budget": { "preset": "nominal", "tau_b": 10.0, "target_alpha": 0.36 }
    });
    std::fs::write(dir.path().join("cfg.json"), cfg.to_string()).unwrap();
    let out = qpnn(dir.path(), &["calibrate-loss", "--config", "cfg.json", "--out", "run"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let budget: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/budget.json")).unwrap())
            .unwrap();
    assert!(
        (budget["achieved_alpha"].as_f64().unwrap() - 0.36).abs() < 1e-6,
        "calibration converges: {budget}"
    );
    let breakdown = std::fs::read_to_string(dir.path().join("run/breakdown.csv")).unwrap();
    assert!(breakdown.starts_with("component,"), "breakdown header: {breakdown}");
    assert_eq!(breakdown.lines().count(), 6, "five components plus the header");
}

#[test]
fn filter_scan_trades_efficiency_for_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let train = serde_json::json!({
        "task": "bsa", "N": 4, "L": 2,
        "grid": { "M": 128, "eval_M": 128 },
        "train": { "epochs": 10, "trials": 1, "seed": 3 }
    });
    std::fs::write(dir.path().join("train.json"), train.to_string()).unwrap();
    let t = qpnn(dir.path(), &["train", "--config", "train.json", "--out", "model"]);
    assert_eq!(t.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&t.stderr));

    let cfg = serde_json::json!({
        "model": "model/best_model.json",
        "grid": { "M": 128 },
        "fractions": [0.1, 0.5, 0.9]
    });
    std::fs::write(dir.path().join("scan.json"), cfg.to_string()).unwrap();
    let out = qpnn(dir.path(), &["filter-scan", "--config", "scan.json", "--out", "run"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let table = std::fs::read_to_string(dir.path().join("run/scan.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("f,window_ns,F,eta,eta_phi+,eta_phi-,eta_psi+,eta_psi-"));
    let etas: Vec<f64> = lines
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(etas.len(), 3);
    assert!(
        etas.windows(2).all(|w| w[1] <= w[0]),
        "tighter filters keep less light: {etas:?}"
    );

    // Binary dumps carry their grid size up front and one complex pair per cell.
    let name = std::fs::read_dir(dir.path().join("run"))
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().into_string().unwrap())
        .find(|n| n.starts_with("dist_") && n.ends_with(".bin"))
        .expect("at least one distribution dump");
    let bin = std::fs::read(dir.path().join("run").join(name)).unwrap();
    let m = u64::from_le_bytes(bin[..8].try_into().unwrap()) as usize;
    assert_eq!(m, 128, "dump grid matches the requested size");
    assert_eq!(bin.len(), 8 + 8 + 8 + m * m * 16, "header plus M² little-endian pairs");
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "task": "cnot",
        "train": { "epochs": 5, "trials": 1, "seed": 1 },
        "typo_field": 3
    });
    std::fs::write(dir.path().join("cfg.json"), cfg.to_string()).unwrap();
    let out = qpnn(dir.path(), &["train", "--config", "cfg.json", "--out", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("typo_field"),
        "the error names the offending field"
    );
}
