use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn sdot(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdot"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn solve(out: &Path, problem: &str, extra: &[&str]) -> Output {
    let path = fixture(problem);
    let mut args = vec!["solve", "--problem", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    sdot(out, &args)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn diagnostic(output: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&output.stderr);
    let line = stderr.lines().last().expect("a diagnostic line");
    serde_json::from_str(line).unwrap()
}

fn weights(result: &Value) -> Vec<f64> {
    result["w"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
}

#[test]
fn two_site_solve_reaches_the_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let output = solve(dir.path(), "two_site.json", &["--zeta", "1e-10"]);
    assert_eq!(output.status.code(), Some(0));
    let result = read_json(&dir.path().join("result.json"));
    assert_eq!(result["status"], "converged");
    assert!((weights(&result)[0] - 0.51875).abs() < 1e-8);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,err_l1,err_l2,ell,min_mass,shuffle_steps,elapsed_ms\n"));
}

#[test]
fn plane_instance_weights_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let output = solve(dir.path(), "plane10.json", &[]);
    assert_eq!(output.status.code(), Some(0));
    let w = weights(&read_json(&dir.path().join("result.json")));
    assert_eq!(w.len(), 10);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
}

#[test]
fn point_fee_needs_regularization() {
    let dir = tempfile::tempdir().unwrap();
    let output = solve(dir.path(), "point_fee.json", &[]);
    assert_eq!(output.status.code(), Some(2));
    let d = diagnostic(&output);
    assert_eq!(d["name"], "strict_interior");
    assert_eq!(d["details"]["strict_interior"], false);
}

#[test]
fn auto_regularize_solves_the_point_fee() {
    let dir = tempfile::tempdir().unwrap();
    let output = solve(dir.path(), "point_fee.json", &["--auto-regularize", "--eta", "0.05"]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let result = read_json(&dir.path().join("result.json"));
    assert_eq!(result["regularization"]["eta"], 0.05);
    let w = weights(&result);
    let a = [0.3, 0.3, 0.4];
    let dist = w.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    assert!(dist <= 0.2 * 0.05f64.sqrt(), "{w:?}");
}

#[test]
fn malformed_problem_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let output = solve(dir.path(), "bad_cost_scale.json", &[]);
    assert_eq!(output.status.code(), Some(1));
    assert_eq!(diagnostic(&output)["name"], "cost_scale");
}

#[test]
fn unknown_flag_is_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let output = sdot(dir.path(), &["solve", "--bogus"]);
    assert_eq!(output.status.code(), Some(1));
    assert_eq!(diagnostic(&output)["kind"], "malformed_input");
}

#[test]
fn invalid_solver_option_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let output = solve(dir.path(), "two_site.json", &["--eps0", "0.5"]);
    assert_eq!(output.status.code(), Some(1));
    assert_eq!(diagnostic(&output)["name"], "eps0");
}

#[test]
fn iteration_cap_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let output = solve(dir.path(), "plane10.json", &["--max-iters", "1"]);
    assert_eq!(output.status.code(), Some(3));
    assert_eq!(diagnostic(&output)["kind"], "iteration_cap");
    let result = read_json(&dir.path().join("result.json"));
    assert_eq!(result["status"], "iteration_cap");
}

#[test]
fn results_are_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(solve(a.path(), "plane10.json", &[]).status.code(), Some(0));
    assert_eq!(solve(b.path(), "plane10.json", &["--threads", "2"]).status.code(), Some(0));
    let ra = std::fs::read(a.path().join("result.json")).unwrap();
    let rb = std::fs::read(b.path().join("result.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn regularize_writes_a_compliant_fee() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("point_fee.json");
    let output = sdot(
        dir.path(),
        &["regularize", "--problem", problem.to_str().unwrap(), "--eta", "0.1"],
    );
    assert_eq!(output.status.code(), Some(0));
    let report = read_json(&dir.path().join("regularization.json"));
    assert_eq!(report["report"]["branch"], "point_at_lower");
    assert_eq!(report["assumptions"]["essential_smoothness"], true);
    // the written fee loads back and solves
    let fee = dir.path().join("fee.json");
    let output = solve(dir.path(), "point_fee.json", &["--fee", fee.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
}

#[test]
fn verify_suites_pass_with_the_default_seed() {
    let dir = tempfile::tempdir().unwrap();
    let output = sdot(dir.path(), &["verify"]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let report = read_json(&dir.path().join("verify.json"));
    assert_eq!(report["pass"], true);
    let properties = report["properties"].as_array().unwrap();
    assert!(properties.iter().any(|p| p["property"] == "hessian_matches_finite_differences"));
}

#[test]
fn verify_shuffle_suite_covers_one_hundred_instances() {
    let dir = tempfile::tempdir().unwrap();
    let output = sdot(dir.path(), &["verify", "--suite", "shuffle", "--seed", "3"]);
    assert_eq!(output.status.code(), Some(0));
    let report = read_json(&dir.path().join("verify.json"));
    let failed = report["properties"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["property"] == "failed_instances")
        .unwrap();
    assert_eq!(failed["instances"], 100);
    assert_eq!(failed["measured"], 0.0);
}

#[test]
fn verify_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let output = sdot(dir.path(), &["verify", "--suite", "oracle", "--seed", "9"]);
        assert_eq!(output.status.code(), Some(0));
    }
    assert_eq!(
        std::fs::read(a.path().join("verify.json")).unwrap(),
        std::fs::read(b.path().join("verify.json")).unwrap()
    );
}

#[test]
fn oracle_compare_agrees_within_two_grid_steps() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("three_quadratics.json");
    let output = sdot(
        dir.path(),
        &["oracle-compare", "--problem", problem.to_str().unwrap(), "--grid-step", "0.002"],
    );
    assert_eq!(output.status.code(), Some(0));
    let report = read_json(&dir.path().join("oracle.json"));
    assert!(report["sup_distance"].as_f64().unwrap() <= 0.004);
}

#[test]
fn oracle_compare_rejects_planar_problems() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("plane10.json");
    let output = sdot(dir.path(), &["oracle-compare", "--problem", problem.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn stability_ladder_and_pair() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("three_quadratics.json");
    let problem = problem.to_str().unwrap();
    let output = sdot(dir.path(), &["stability", "--problem", problem]);
    assert_eq!(output.status.code(), Some(0));
    let ladder = read_json(&dir.path().join("stability.json"));
    assert_eq!(ladder["pass"], true);
    assert_eq!(ladder["runs"].as_array().unwrap().len(), 3);

    let fee2 = fixture("scaled_fee.json");
    let output = sdot(
        dir.path(),
        &["stability", "--problem", problem, "--fee2", fee2.to_str().unwrap()],
    );
    assert_eq!(output.status.code(), Some(0));
    let pair = read_json(&dir.path().join("stability.json"));
    assert_eq!(pair["bound_form"], "uniform");
    assert!(pair["distance"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_fee_file_is_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let output = solve(dir.path(), "two_site.json", &["--fee", "/nonexistent/fee.json"]);
    assert_eq!(output.status.code(), Some(1));
}
