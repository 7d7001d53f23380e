use std::process::{Command, Output};

use serde_json::Value;

fn kamforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kamforge"))
        .args(args)
        .env_remove("KAMFORGE_WORKERS")
        .output()
        .expect("spawn kamforge")
}

fn read_json(path: &std::path::Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn golden_solve_writes_curve_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("curve.json");
    let csv = dir.path().join("curve.csv");
    let out = kamforge(&[
        "solve",
        "--omega",
        "0.6180339887498949",
        "--eps",
        "0.05",
        "--out",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--samples",
        "32",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let curve = read_json(&json);
    assert!(curve["dynamical_residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(curve["report"]["converged"], Value::Bool(true));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,re_x,im_x,re_y,im_y"));
    assert_eq!(lines.count(), 32);
}

#[test]
fn resonant_solve_reports_json_error() {
    let out = kamforge(&["solve", "--omega", "0.5", "--eps", "0.05"]);
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["kind"], "resonance");
    assert!(v["error"]["message"].as_str().unwrap().contains("resonan"));
}

#[test]
fn q_chart_input_and_picard() {
    let out = kamforge(&["solve", "--q-re", "0.3", "--q-im", "0.1", "--method", "picard", "--modes", "32"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["converged"], Value::Bool(true));
}

#[test]
fn geometry_measure_within_bound() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("geom.json");
    let out = kamforge(&["geometry", "--M", "6", "--tau", "0.5", "--mmax", "2000", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let g = read_json(&path);
    let total = g["total_gap_measure"].as_f64().unwrap();
    assert!(total > 0.0 && total <= 0.8707, "{total}");
}

#[test]
fn obstruction_at_one_third() {
    let out = kamforge(&["obstruction", "--p", "1", "--m", "3", "--f", "cos", "--max-order", "6"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n_star"], 3);
    assert_eq!(v["betas"].as_array().unwrap().len(), 3);
}

#[test]
fn inline_forcing_matches_cos() {
    let a = kamforge(&["obstruction", "--p", "2", "--m", "5", "--f", "1:0.5,-1:0.5", "--max-order", "6"]);
    let b = kamforge(&["obstruction", "--p", "2", "--m", "5", "--f", "cos", "--max-order", "6"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sweep_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str| {
        let out = dir.path().join(format!("sweep{workers}.jsonl"));
        let fam = dir.path().join(format!("family{workers}.json"));
        let st = kamforge(&[
            "sweep", "--re-min", "0.5", "--re-max", "0.62", "--re-n", "3", "--im-min", "0", "--im-max", "0.06",
            "--im-n", "2", "--eps", "0.03,0.05", "--modes", "48", "--workers", workers, "--out",
            out.to_str().unwrap(), "--family", fam.to_str().unwrap(),
        ]);
        assert!(st.status.success());
        (std::fs::read(out).unwrap(), std::fs::read(fam).unwrap())
    };
    let (a, fa) = run("1");
    let (b, fb) = run("8");
    assert_eq!(a, b);
    assert_eq!(fa, fb);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 12);
    // ω = 0.5 on the real axis fails inline.
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["status"], "failed");
}

#[test]
fn sweep_with_every_point_failing_exits_nonzero() {
    let out = kamforge(&["sweep", "--re-min", "0.5", "--re-max", "0.5", "--eps", "0.05", "--modes", "16"]);
    assert!(!out.status.success());
}

#[test]
fn taylor0_and_crosscheck_emit_json() {
    let out = kamforge(&["taylor0", "--eps", "0.05", "--orders", "12", "--q-re", "0.2"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["data"]["orders"].as_array().unwrap().len(), 12);
    assert_eq!(v["evaluation"]["report"]["decaying"], Value::Bool(true));

    let out = kamforge(&["crosscheck", "--q-re", "0.3", "--q-im", "0", "--modes", "64"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for p in v["pairs"].as_array().unwrap() {
        assert!(p["sup_diff"].as_f64().unwrap() < 1e-10);
    }
}

#[test]
fn forcing_from_json_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.json");
    std::fs::write(&f, r#"{"N": 1, "coeffs": [[0.5, 0.0], [0.0, 0.0], [0.5, 0.0]]}"#).unwrap();
    let a = kamforge(&["obstruction", "--p", "1", "--m", "4", "--f", f.to_str().unwrap()]);
    let b = kamforge(&["obstruction", "--p", "1", "--m", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_single_criterion() {
    let out = kamforge(&["verify", "--suite", "7"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("[PASS]") && text.contains(" 7 obstruction"), "{text}");
}

#[test]
fn bad_arguments_are_rejected() {
    let out = kamforge(&["solve", "--eps", "0.05"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["kind"], "invalid_parameter");
    assert!(!kamforge(&["obstruction", "--p", "2", "--m", "4"]).status.success());
    assert!(!kamforge(&["verify", "--suite", "nope"]).status.success());
}
