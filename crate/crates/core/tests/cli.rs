use std::path::{Path, PathBuf};

use oneshot_qcap::cli::{main_with, EXIT_INPUT, EXIT_PASS};
use serde_json::{json, Value};

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn run(args: &[&str], out: &Path) -> (u8, String) {
    let mut full = vec!["oneshot-qcap"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", out.to_str().unwrap()]);
    let code = main_with(full);
    (code, std::fs::read_to_string(out).unwrap_or_default())
}

#[test]
fn identity_corollary_ceiling() {
    let dir = tempfile::tempdir().unwrap();
    let (code, body) = run(&["bound", "identity_corollary", "--dimA", "2", "--eps", "0"], &dir.path().join("o.json"));
    assert_eq!(code, EXIT_PASS);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["result"]["ceiling"], json!(2.0));
}

#[test]
fn divergence_report_includes_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let rho = write(dir.path(), "rho.json", &json!({"schema": "1", "state": {"diagonal": {"layout": [["A", 2]], "probs": [0.9, 0.1]}}}));
    let sigma = write(dir.path(), "sigma.json", &json!({"schema": "1", "state": {"maximally_mixed": {"layout": [["A", 2]]}}}));
    let (code, body) = run(
        &["divergence", "--rho", rho.to_str().unwrap(), "--sigma", sigma.to_str().unwrap(), "--eps", "0.1"],
        &dir.path().join("o.json"),
    );
    assert_eq!(code, EXIT_PASS);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["inputs"]["state[0]"]["state"]["diagonal"]["probs"], json!([0.9, 0.1]));
    // accept the 0.9 outcome only: type-II 1/2
    let dh = v["result"]["dh"]["value"].as_f64().unwrap();
    assert!((dh - 1.0).abs() < 1e-9, "{dh}");
    assert!((v["result"]["dmax"].as_f64().unwrap() - 1.8f64.log2()).abs() < 1e-9);
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        &json!({"kraus": [[[[1.001, 0], [0, 0]], [[0, 0], [1, 0]]]], "in_dims": [2], "out_dims": [2], "labels": {"in": ["A"], "out": ["B"]}}),
    );
    let out = dir.path().join("o.json");
    let args = ["simulate", "p2p_ea", "--channel", bad.to_str().unwrap(), "--state", "bell", "--R", "1", "--eps", "0.1"];
    assert_eq!(run(&args, &out).0, EXIT_INPUT);
    assert_eq!(run(&["simulate", "p2p_ea", "--channel", "nonsense", "--state", "bell", "--R", "1", "--eps", "0.1"], &out).0, EXIT_INPUT);
    assert_eq!(run(&["verify", "--facts", "no_such_fact"], &out).0, EXIT_INPUT);
    assert_eq!(run(&["simulate", "p2p_ea", "--channel", "identity2", "--state", "bell", "--R", "1", "--eps", "0.95"], &out).0, EXIT_INPUT);
}

#[test]
fn sweep_rows_follow_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let args = [
        "sweep", "p2p_ea", "--channel", "depolarizing2:0.1", "--state", "bell", "--R", "1,2", "--eps", "0.05,0.1", "--deltas", "0.1,0.2",
    ];
    let (code, body) = run(&args, &out);
    assert_eq!(code, EXIT_PASS, "{body}");
    let lines: Vec<&str> = body.lines().collect();
    assert!(lines[0].starts_with("index,rate,eps,delta,worst_error"));
    assert_eq!(lines.len(), 9);
    for (i, l) in lines[1..].iter().enumerate() {
        assert!(l.starts_with(&format!("{i},")), "{l}");
    }
    assert!(lines[1].starts_with("0,1,0.05,0.1,"));
    assert!(lines[8].starts_with("7,2,0.1,0.2,"));
    let seq = dir.path().join("s2.csv");
    let mut a2 = args.to_vec();
    a2.push("--sequential");
    assert_eq!(run(&a2, &seq).1, body);
}

#[test]
fn cq_mac_spec_simulates() {
    let dir = tempfile::tempdir().unwrap();
    let basis = |i: usize| json!({"basis": {"layout": [["C", 2]], "index": i}});
    let ch = write(
        dir.path(),
        "mac.json",
        &json!({"schema": "1", "cq": [basis(0), basis(1), basis(1), basis(0)], "in_dims": [2, 2], "labels": {"in": ["X1", "X2"]}}),
    );
    let alice = write(dir.path(), "a.json", &json!({"schema": "1", "state": {"classical_copy": {"labels": ["U1", "X1"], "probs": [0.5, 0.5]}}, "resource": ["U1"]}));
    let bob = write(dir.path(), "b.json", &json!({"schema": "1", "state": {"classical_copy": {"labels": ["U2", "X2"], "probs": [0.5, 0.5]}}, "resource": ["U2"]}));
    let (code, body) = run(
        &[
            "simulate", "mac_ua", "--channel", ch.to_str().unwrap(), "--state", alice.to_str().unwrap(), "--state",
            bob.to_str().unwrap(), "--R", "0,0", "--eps", "0.1,0.1",
        ],
        &dir.path().join("o.json"),
    );
    assert_eq!(code, EXIT_PASS, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["result"]["scenario"], json!("mac_ua"));
}

#[test]
fn derandomize_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = |y: f64| json!({"diagonal": {"layout": [["B", 2]], "probs": [1.0 - y, y]}});
    let ch = write(dir.path(), "cq.json", &json!({"cq": [out(0.1), out(0.9)], "in_dims": [2], "labels": {"in": ["A"]}}));
    let ens = write(dir.path(), "u.json", &json!({"state": {"classical_copy": {"labels": ["U", "A"], "probs": [0.5, 0.5]}}}));
    let (code, body) = run(
        &["simulate", "p2p_ua", "--channel", ch.to_str().unwrap(), "--state", ens.to_str().unwrap(), "--R", "1", "--eps", "0.1", "--derandomize"],
        &dir.path().join("o.json"),
    );
    assert_eq!(code, EXIT_PASS, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["result"]["holds"], json!(true));
}
