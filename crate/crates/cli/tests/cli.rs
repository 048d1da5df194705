use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).to_string_lossy().into_owned()
}

fn sdmlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdmlab"))
        .args(args)
        .env_remove("SDMLAB_THREADS")
        .output()
        .expect("sdmlab runs")
}

fn report(args: &[&str]) -> Value {
    let out = sdmlab(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sdmlab-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn validate_exit_codes() {
    assert_eq!(sdmlab(&["validate", &data("grid_family_bundle.json")]).status.code(), Some(0));

    let bad = sdmlab(&["validate", &data("bad_prob.json")]);
    assert_eq!(bad.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(v["result"]["valid"], false);
    assert!(!String::from_utf8_lossy(&bad.stderr).is_empty());

    let malformed = sdmlab(&["validate", &data("malformed.json")]);
    assert_eq!(malformed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&malformed.stderr).contains("line"));

    assert_eq!(sdmlab(&["validate", "/nonexistent/task.json"]).status.code(), Some(2));
}

#[test]
fn zero_threads_is_an_input_error() {
    let out = sdmlab(&["--threads", "0", "validate", &data("chain2.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn threads_come_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_sdmlab"))
        .args(["difficulty", &data("chain2_bundle.json")])
        .env("SDMLAB_THREADS", "3")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["runtime"]["threads"], 3);
}

#[test]
fn exact_difficulty_of_the_chain() {
    let v = report(&["difficulty", &data("chain2_bundle.json")]);
    let total = v["result"]["total"].as_f64().unwrap();
    assert!((total - 0.1).abs() < 1e-12, "{total}");
    assert_eq!(v["result"]["method"], "exact");
}

#[test]
fn identical_train_and_test_have_no_distance_term() {
    let v = report(&["difficulty", &data("chain2_bundle.json"), "--method", "mc", "--n", "200"]);
    assert_eq!(v["result"]["distance_term"].as_f64(), Some(0.0));
}

#[test]
fn enumeration_cap_suggests_monte_carlo() {
    let out = sdmlab(&["difficulty", &data("grid_bundle.json"), "--cap", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--method mc"));
}

#[test]
fn distance_is_symmetric() {
    let ab = report(&["distance", &data("random_a.json"), &data("random_b.json")]);
    let ba = report(&["distance", &data("random_b.json"), &data("random_a.json")]);
    let d = ab["result"]["distance"].as_f64().unwrap();
    assert!(d > 0.0);
    assert!((d - ba["result"]["distance"].as_f64().unwrap()).abs() < 1e-15);
}

#[test]
fn zero_budget_returns_the_prior() {
    let v = report(&["solve", &data("grid_bundle.json"), "--budget", "0", "--eval-rollouts", "5"]);
    assert_eq!(v["result"]["trace"]["stop_reason"], "prior_returned");
    assert_eq!(v["result"]["trace"]["iterations"], 0);
}

#[test]
fn solve_reaches_the_target_on_a_gridworld() {
    let dir = scratch("solve");
    let csv = dir.join("trace.csv");
    let v = report(&[
        "solve",
        &data("grid_bundle.json"),
        "--config",
        &data("solver_grid.json"),
        "--trace-csv",
        csv.to_str().unwrap(),
    ]);
    assert!(v["result"]["trace"]["target_reached_at"].is_u64());
    assert!(v["result"]["final"]["fraction_of_optimum"].as_f64().unwrap() >= 0.95);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("iter,score,factor,drift"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn encoded_task_validates_and_has_the_expected_difficulty() {
    let dir = scratch("encode");
    let out = dir.join("line3.json");
    let out = out.to_str().unwrap();
    for mode in ["optimal", "satisficing", "agile"] {
        let v = report(&["encode", &data("line3_classical.json"), "--mode", mode, "--out", out]);
        assert_eq!(v["result"]["mode"], mode);
        assert_eq!(sdmlab(&["validate", out]).status.code(), Some(0));
    }
    let bundle = dir.join("bundle.json");
    std::fs::write(&bundle, r#"{"train": ["line3.json"]}"#).unwrap();
    report(&["encode", &data("line3_classical.json"), "--mode", "optimal", "--out", out]);
    // Two policies: the plan and the loop back to the start, so the solution
    // is a point mass at total variation 1/2 from uniform.
    let v = report(&["difficulty", bundle.to_str().unwrap()]);
    assert!((v["result"]["total"].as_f64().unwrap() - 0.5).abs() < 1e-12, "{}", v["result"]);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn exact_scorer_carries_more_knowledge_than_one_rollout() {
    let q = |scorer: &str| {
        let v = report(&["knowledge", &data("random_a.json"), "--scorer", scorer, "--n", "400", "--seed", "3"]);
        v["result"]["score"]["q_score"].as_f64().unwrap()
    };
    assert!(q("exact") > q("mc:n=1"));
}

#[test]
fn knowledge_needs_a_measure() {
    assert_eq!(sdmlab(&["knowledge", &data("random_a.json")]).status.code(), Some(2));
    assert_eq!(
        sdmlab(&["knowledge", &data("random_a.json"), "--simfn", "constant:3"]).status.code(),
        Some(2)
    );
}

#[test]
fn similarity_reports_differ_by_function() {
    let q = |sim: &str| {
        let v = report(&["knowledge", &data("random_a.json"), "--simfn", sim, "--n", "300"]);
        v["result"]["sim"]["q_sim"].as_f64().unwrap()
    };
    assert_ne!(q("overlap"), q("constant:0.5"));
}

#[test]
fn evaluate_exact_and_mc_agree_on_a_deterministic_chain() {
    let policy = data("chain2_policy.json");
    let exact = report(&["evaluate", &data("chain2_bundle.json"), "--policy", &policy, "--method", "exact"]);
    let mc = report(&["evaluate", &data("chain2_bundle.json"), "--policy", &policy, "--rollouts", "20"]);
    assert_eq!(exact["result"]["set_quality"], 0.5);
    assert_eq!(mc["result"]["set_quality"], 0.5);
}
