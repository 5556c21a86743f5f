use std::path::{Path, PathBuf};
use std::process::Command;

use qsynth::formats::{CircuitJson, ResultReport};
use qsynth_core::encoding::{fidelity, ComplexMatrix};
use qsynth_core::gates::{builtin_matrix, fibonacci_weaves};

fn qsynth(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qsynth")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn report(path: &Path) -> ResultReport {
    ResultReport::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synthesize_fixture_and_reload_report_for_verify() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("r.json");
    let (code, stdout, stderr) = qsynth(&["synthesize", "--fixture", "control_target_reversal", "--cuts", "all", "--report", rep.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let r = report(&rep);
    assert_eq!(r.status, "optimal");
    assert_eq!(r.counts.total, 5);
    assert_eq!(r.counts.entangling, 1);
    assert!((r.fidelity.unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(r.objective_value, Some(5.0));
    assert!(r.cut_counts.contains_key("identity"));

    let rep2 = dir.path().join("v.json");
    let (code, _, stderr) = qsynth(&["verify", rep.to_str().unwrap(), "--target", "control_target_reversal", "--report", rep2.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let v = report(&rep2);
    assert!((v.fidelity.unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v.gates, r.gates);
    assert_eq!(v.depth, r.depth);
}

#[test]
fn identity_target_gives_empty_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("r.json");
    let (code, _, stderr) = qsynth(&["synthesize", "--fixture", "identity_target", "--report", rep.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    assert!(report(&rep).gates.is_empty());
}

#[test]
fn budget_below_minimum_is_infeasible() {
    let (code, stdout, _) = qsynth(&["synthesize", "--fixture", "reversal_budget_too_small"]);
    assert_eq!(code, 3, "{stdout}");
    let (code, _, _) = qsynth(&["oracle", "--fixture", "control_target_reversal", "-p", "4"]);
    assert_eq!(code, 3);
}

#[test]
fn schema_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.json", r#"{"fixture": "t_squared_is_s", "flavour": 1}"#);
    assert_eq!(qsynth(&["synthesize", "--config", unknown.to_str().unwrap()]).0, 64);
    assert_eq!(qsynth(&["synthesize", "--fixture", "t_squared_is_s", "--backend", "nope"]).0, 64);
    assert_eq!(qsynth(&["synthesize", "--fixture", "no_such_fixture"]).0, 64);
    assert_eq!(qsynth(&["synthesize", "--fixture", "t_squared_is_s", "--objective", "frobenius_oa"]).0, 64);
    assert_eq!(qsynth(&["synthesize", "--fixture", "t_squared_is_s", "--cuts", "bogus"]).0, 64);
    assert_eq!(qsynth(&["frobnicate"]).0, 64);
}

#[test]
fn config_with_inline_gates_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"qubits": 2, "target": {"name": "CZ"}, "gate_set": {"gates": [{"name": "H", "qubits": [2]}, {"name": "CNOT", "qubits": [1, 2]}]}, "p": 2, "phase_mode": "global"}"#,
    );
    assert_eq!(qsynth(&["synthesize", "--config", cfg.to_str().unwrap()]).0, 3);
    let rep = dir.path().join("r.json");
    let (code, _, stderr) = qsynth(&["synthesize", "--config", cfg.to_str().unwrap(), "-p", "3", "--report", rep.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let r = report(&rep);
    assert_eq!(r.counts.total, 3);
    assert_eq!(r.config.p, Some(3));
    assert_eq!(r.config.phase_mode, Some(qsynth::formats::PhaseModeName::Global));
}

#[test]
fn depth_objective_reports_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("r.json");
    let (code, _, stderr) = qsynth(&["synthesize", "--fixture", "parallel_t_then_cnot", "--objective", "depth", "--report", rep.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let r = report(&rep);
    assert_eq!(r.depth, 2);
    assert_eq!(r.objective_value, Some(2.0));
    assert_eq!(*r.schedule.last().unwrap(), 2);
}

/// Best phase-invariant fidelity over all weave sequences of length at most `p`.
fn brute_force_fidelity(target: &ComplexMatrix, p: usize) -> f64 {
    let gates: Vec<ComplexMatrix> = fibonacci_weaves().into_iter().map(|g| g.base_matrix).collect();
    let mut frontier = vec![ComplexMatrix::identity(2)];
    let mut best = fidelity(&frontier[0], target).unwrap();
    for _ in 0..p {
        frontier = frontier.iter().flat_map(|u| gates.iter().map(move |g| u * g)).collect();
        best = frontier.iter().map(|u| fidelity(u, target).unwrap()).fold(best, f64::max);
    }
    best
}

#[test]
fn exact_fidelity_falls_back_and_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"qubits": 1, "target": {"name": "H"}, "p": 4, "objective": "exact_fidelity",
            "gate_set": {"gates": [{"name": "W1", "qubits": [1]}, {"name": "W1dg", "qubits": [1]}, {"name": "W2", "qubits": [1]}, {"name": "W2dg", "qubits": [1]}]}}"#,
    );
    let rep = dir.path().join("r.json");
    let (code, _, stderr) = qsynth(&["approx", "--config", cfg.to_str().unwrap(), "--report", rep.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let r = report(&rep);
    assert!(r.model.as_ref().unwrap().fallback);
    let h = builtin_matrix("H", None).unwrap().1;
    assert!((r.fidelity.unwrap() - brute_force_fidelity(&h, 4)).abs() < 1e-9);
}

#[test]
fn frobenius_report_carries_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"qubits": 1, "target": {"name": "X"}, "p": 3, "epsilon": 1.0, "k": 5,
            "gate_set": {"gates": [{"name": "W1", "qubits": [1]}, {"name": "W1dg", "qubits": [1]}, {"name": "W2", "qubits": [1]}, {"name": "W2dg", "qubits": [1]}]}}"#,
    );
    let rep = dir.path().join("r.json");
    let (code, _, stderr) = qsynth(&["approx", "--config", cfg.to_str().unwrap(), "--report", rep.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let r = report(&rep);
    let (f, lb, fro, alpha) = (r.fidelity.unwrap(), r.fidelity_lower_bound.unwrap(), r.frobenius_sq.unwrap(), r.alpha.unwrap());
    assert!(f + 1e-12 >= lb);
    assert!((fro - 8.0 * (1.0 - alpha)).abs() < 1e-9);
    assert!(r.objective_value.unwrap() <= fro + 1e-8);
}

#[test]
fn rho_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "rho.json",
        r#"{"rho": {"seed": {"fixture": "k4"}, "window_length": 10, "accept_window": 5, "max_qubits": 4, "passes": 2,
            "elementary_gates": [{"name": "CNOT", "qubits": [1, 2]}, {"name": "H", "qubits": [1]}, {"name": "S", "qubits": [1]}]}}"#,
    );
    let rep = dir.path().join("r.json");
    let (code, _, stderr) = qsynth(&["rho", "--config", cfg.to_str().unwrap(), "--report", rep.to_str().unwrap()]);
    assert_eq!(code, 2, "{stderr}");
    let r = report(&rep);
    let rho = r.rho.as_ref().unwrap();
    assert_eq!(rho.seed_gates, 20);
    assert!(r.counts.total < 20);
    assert!((rho.equivalence_fidelity - 1.0).abs() < 1e-9);
    assert!(!rho.windows.is_empty());

    let seed = write(dir.path(), "seed.json", &serde_json::to_string(&CircuitJson::from_specs(4, &qsynth::fixtures::k4_seed())).unwrap());
    let seed_matrix = qsynth_core::rho::circuit_unitary(&qsynth::fixtures::k4_seed(), 4).unwrap();
    let target = write(dir.path(), "t.json", &serde_json::to_string(&serde_json::json!({"matrix": qsynth::formats::matrix_to_json(&seed_matrix)})).unwrap());
    let v = dir.path().join("v.json");
    let (code, _, stderr) = qsynth(&["verify", rep.to_str().unwrap(), "--target", seed.to_str().unwrap(), "--report", v.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    assert!((report(&v).fidelity.unwrap() - 1.0).abs() < 1e-9);
    let (code, _, _) = qsynth(&["verify", rep.to_str().unwrap(), "--target", target.to_str().unwrap()]);
    assert_eq!(code, 0);
}

#[test]
fn verify_empty_circuit_and_qasm() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "e.json", r#"{"qubits": 2, "gates": []}"#);
    let rep = dir.path().join("r.json");
    assert_eq!(qsynth(&["verify", empty.to_str().unwrap(), "--report", rep.to_str().unwrap()]).0, 0);
    assert_eq!(report(&rep).fidelity, Some(1.0));

    let qasm = write(dir.path(), "c.qasm", "OPENQASM 2.0;\nqreg q[2];\nh q[1];\ncx q[0],q[1];\nh q[1];\n");
    let (code, _, stderr) = qsynth(&["verify", qasm.to_str().unwrap(), "--target", "CZ", "--report", rep.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let r = report(&rep);
    assert!((r.fidelity.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r.counts.per_gate["H"], 2);
}

#[test]
fn relations_lists_commuting_pairs() {
    let (code, stdout, stderr) = qsynth(&["relations", "--fixture", "parallel_t_then_cnot"]);
    assert_eq!(code, 0, "{stderr}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let pairs = v["commuting_pairs"].as_array().unwrap();
    assert!(pairs.iter().any(|p| p[0] == "T(1)" && p[1] == "T(2)"));
}

#[test]
fn lp_dump_and_batch_mode() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("m.lp");
    let (code, _, _) = qsynth(&["synthesize", "--fixture", "t_squared_is_s", "--dump-lp", lp.to_str().unwrap(), "-q"]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.contains("Subject To") && text.contains("Binaries"));

    let a = write(dir.path(), "a.json", r#"{"fixture": "t_squared_is_s"}"#);
    let b = write(dir.path(), "b.json", r#"{"fixture": "reversal_budget_too_small"}"#);
    let out = dir.path().join("reports");
    let (code, _, stderr) =
        qsynth(&["synthesize", "--config", a.to_str().unwrap(), "--config", b.to_str().unwrap(), "--jobs", "2", "--report", out.to_str().unwrap(), "-q"]);
    assert_eq!(code, 3, "{stderr}");
    assert_eq!(report(&out.join("a.json")).status, "optimal");
    assert_eq!(report(&out.join("b.json")).status, "infeasible");
}

#[test]
fn toffoli_fixture_with_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("r.json");
    let (code, _, stderr) = qsynth(&["oracle", "--fixture", "toffoli", "--report", rep.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let r = report(&rep);
    assert_eq!(r.counts.total, 5);
    assert!((r.fidelity.unwrap() - 1.0).abs() < 1e-9);
}
