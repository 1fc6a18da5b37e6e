use std::fs;
use std::path::Path;
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use encourage_cli::json::{
    distribution_json, measure_json, outcome_distribution_json, outcome_measure_json, parse_distribution,
    parse_measure, parse_outcome_measure, Distribution,
};
use encourage_cli::{render, run, EXIT_CAPACITY, EXIT_INPUT, EXIT_OK, EXIT_USAGE, EXIT_VERDICT};
use encourage_core::random::{random_measure, random_outcome_measure};
use encourage_core::simulate::rational_weights;
use encourage_core::DesignConfig;

const UNIFORM: &str = r#"{"J": 3, "J0": 0, "p": {
  "0": {"0": "1/3", "1": "1/3", "2": "1/3"},
  "1": {"0": "1/3", "1": "1/3", "2": "1/3"},
  "2": {"0": "1/3", "1": "1/3", "2": "1/3"}}}"#;

const VIOLATING: &str = r#"{"J": 2, "J0": 0, "p": {
  "0": {"0": "0.4", "1": "0.6"},
  "1": {"0": "3/5", "1": "2/5"}}}"#;

fn call(args: &[&str]) -> (i32, Value) {
    let mut argv = vec!["encourage"];
    argv.extend_from_slice(args);
    let out = run(argv);
    let doc = if out.stdout.trim().is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&out.stdout).unwrap_or(Value::Null)
    };
    (out.code, doc)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn enumerate_lists_ten_types() {
    let (code, doc) = call(&["enumerate", "--J", "3", "--J0", "0"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(doc["count"], 10);
    assert_eq!(doc["types"].as_array().unwrap().len(), 10);
    assert_eq!(doc["z_support"], serde_json::json!([0, 1, 2]));
}

#[test]
fn inequalities_default_and_full() {
    let (_, reduced) = call(&["inequalities", "--J", "3", "--J0", "1"]);
    assert_eq!(reduced["family"], "reduced");
    assert_eq!(reduced["count"], 4);
    let (_, full) = call(&["inequalities", "--J", "3", "--J0", "1", "--full"]);
    assert_eq!(full["family"], "full");
    assert_eq!(full["count"], 12);
    let (_, sharp) = call(&["inequalities", "--J", "3"]);
    assert_eq!(sharp["count"], 8);
}

#[test]
fn check_exit_codes_and_slack() {
    let dir = tempfile::tempdir().unwrap();
    let uniform = write(dir.path(), "u.json", UNIFORM);
    let (code, doc) = call(&["check", "--input", &uniform]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["min_slack"], "0");
    let bad = write(dir.path(), "v.json", VIOLATING);
    let (code, doc) = call(&["check", "--input", &bad]);
    assert_eq!(code, EXIT_VERDICT);
    assert_eq!(doc["min_slack"], "-1/5");
    let (code, doc) = call(&["lp-check", "--input", &bad]);
    assert_eq!(code, EXIT_VERDICT);
    assert_eq!(doc["certificate"], Value::Null);
    let (code, doc) = call(&["construct", "--input", &bad]);
    assert_eq!(code, EXIT_VERDICT);
    assert_eq!(doc["constructed"], false);
}

#[test]
fn construct_then_check_the_pushforward() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "u.json", UNIFORM);
    let q_path = dir.path().join("q.json");
    let (code, doc) = call(&["construct", "--input", &input, "--output", q_path.to_str().unwrap(), "--trace"]);
    assert_eq!(code, EXIT_OK);
    assert!(doc["trace"]["assignments"].as_array().unwrap().len() > 3);
    let q = parse_measure(&fs::read_to_string(&q_path).unwrap()).unwrap();
    let p = q.pushforward();
    let Distribution::Choice(original) = parse_distribution(UNIFORM).unwrap() else {
        panic!("choice table expected");
    };
    assert_eq!(p, original);
    let again = write(dir.path(), "p.json", &render(&distribution_json(&p)));
    assert_eq!(call(&["check", "--input", &again]).0, EXIT_OK);
    let (code, doc) = call(&["mixture-verify", "--q", q_path.to_str().unwrap(), "--n", "20000", "--seed", "1"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(doc["mismatches"], 0);
    assert!(doc["max_error"].as_f64().unwrap() < 0.03);
}

#[test]
fn outcome_commands() {
    let dir = tempfile::tempdir().unwrap();
    let feasible = r#"{"J": 2, "J0": 1, "y_support": [0, 1], "p": {
      "0": {"0": {"0": "1/4", "1": "1/4"}, "1": {"0": "1/4", "1": "1/4"}},
      "1": {"0": {"0": "1/8", "1": "1/8"}, "1": {"0": "3/8", "1": "3/8"}}}}"#;
    let path = write(dir.path(), "y.json", feasible);
    assert_eq!(call(&["check-y", "--input", &path]).0, EXIT_OK);
    let (code, doc) = call(&["lp-check-y", "--input", &path]);
    assert_eq!(code, EXIT_OK);
    let cert = parse_outcome_measure(&doc["certificate"].to_string()).unwrap();
    let Distribution::Outcome(py) = parse_distribution(feasible).unwrap() else {
        panic!("outcome table expected");
    };
    assert_eq!(cert.pushforward(), py);
    let (code, doc) = call(&["construct-y", "--input", &path]);
    assert_eq!(code, EXIT_OK);
    let witness = parse_outcome_measure(&doc["witness"].to_string()).unwrap();
    assert_eq!(witness.pushforward(), py);

    // one cell breaks pointwise encouragement
    let broken = feasible.replace(r#""1": {"0": "3/8", "1": "3/8"}"#, r#""1": {"0": "1/8", "1": "5/8"}"#);
    let path = write(dir.path(), "b.json", &broken);
    assert_eq!(call(&["check-y", "--input", &path]).0, EXIT_VERDICT);
    assert_eq!(call(&["construct-y", "--input", &path]).0, EXIT_VERDICT);
    assert_eq!(call(&["lp-check-y", "--input", &path]).0, EXIT_VERDICT);
    // choice commands refuse outcome tables and vice versa
    assert_eq!(call(&["check", "--input", &path]).0, EXIT_INPUT);
    let plain = write(dir.path(), "u.json", UNIFORM);
    assert_eq!(call(&["check-y", "--input", &plain]).0, EXIT_INPUT);
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("not json", "{"),
        ("row sum", r#"{"J": 2, "J0": 0, "p": {"0": {"0": "1/2"}, "1": {"1": "1"}}}"#),
        ("bad z", r#"{"J": 2, "J0": 0, "p": {"0": {"0": "1"}, "1": {"1": "1"}, "5": {"1": "1"}}}"#),
        ("bad j", r#"{"J": 2, "J0": 0, "p": {"0": {"3": "1"}, "1": {"1": "1"}}}"#),
        ("bad number", r#"{"J": 2, "J0": 0, "p": {"0": {"0": "x"}, "1": {"1": "1"}}}"#),
        ("bad design", r#"{"J": 2, "J0": 2, "p": {}}"#),
        ("negative", r#"{"J": 2, "J0": 0, "p": {"0": {"0": "-1/2", "1": "3/2"}, "1": {"1": "1"}}}"#),
        ("bad pz", r#"{"J": 2, "J0": 0, "pz": ["1/2", "1/3"], "p": {"0": {"0": "1"}, "1": {"1": "1"}}}"#),
    ];
    for (name, text) in cases {
        let path = write(dir.path(), "bad.json", text);
        let out = run(["encourage", "check", "--input", &path]);
        assert_eq!(out.code, EXIT_INPUT, "{name}: {}", out.stderr);
        assert!(out.stderr.starts_with("error:"), "{name}");
    }
    let out = run(["encourage", "check", "--input", "/nonexistent/file.json"]);
    assert_eq!(out.code, EXIT_INPUT);
}

#[test]
fn usage_and_capacity_codes() {
    assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(call(&["enumerate"]).0, EXIT_USAGE);
    assert_eq!(call(&["simulate", "--J", "2", "--betas", "1,1", "--n", "10", "--eps", "cauchy"]).0, EXIT_USAGE);
    assert_eq!(run(["encourage", "--help"]).code, EXIT_OK);
    assert_eq!(call(&["enumerate", "--J", "30"]).0, EXIT_CAPACITY);
    assert_eq!(call(&["inequalities", "--J", "12"]).0, EXIT_CAPACITY);
    assert_eq!(call(&["enumerate", "--J", "1"]).0, EXIT_INPUT);
}

#[test]
fn simulate_then_test() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let csv_s = csv.to_str().unwrap();
    let args = [
        "simulate", "--J", "3", "--J0", "1", "--betas", "0,1,2", "--eps", "normal", "--pz", "0.4,0.3,0.3", "--n",
        "4000", "--seed", "9", "--out", csv_s,
    ];
    let (code, doc) = call(&args);
    assert_eq!(code, EXIT_OK);
    assert_eq!(doc["inadmissible"], 0);
    let (_, again) = call(&args);
    assert_eq!(doc, again);
    let empirical = parse_distribution(&doc["empirical"].to_string()).unwrap();
    assert!(matches!(empirical, Distribution::Choice(_)));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("d,z\n"));
    assert_eq!(text.lines().count(), 4001);

    let (code, report) = call(&["test", "--data", csv_s, "--J", "3", "--J0", "1", "--B", "199", "--seed", "2"]);
    assert_eq!(code, EXIT_OK, "{report}");
    assert_eq!(report["reject"], false);
    assert_eq!(report["B"], 199);
    let arms: u64 = report["arms"].as_array().unwrap().iter().map(|a| a["n"].as_u64().unwrap()).sum();
    assert_eq!(arms, 4000);

    assert_eq!(call(&["test", "--data", csv_s, "--J", "3", "--J0", "1", "--B", "10"]).0, EXIT_INPUT);
    assert_eq!(call(&["test", "--data", csv_s, "--J", "3", "--J0", "1", "--alpha", "1.5"]).0, EXIT_INPUT);
    assert_eq!(call(&["test", "--data", csv_s, "--J", "3", "--J0", "1", "--y"]).0, EXIT_INPUT);
    // d = 2 rows are out of range for a binary design
    assert_eq!(call(&["test", "--data", csv_s, "--J", "2", "--J0", "0"]).0, EXIT_INPUT);
}

#[test]
fn simulate_with_outcomes_and_test_them() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let csv_s = csv.to_str().unwrap();
    let (code, doc) = call(&[
        "simulate", "--J", "2", "--betas", "1,1", "--n", "3000", "--seed", "4", "--y-support", "0,1", "--y-probs",
        "0.3,0.7;0.6,0.4", "--out", csv_s,
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(doc["empirical_outcome"].is_object());
    assert!(fs::read_to_string(&csv).unwrap().starts_with("y,d,z\n"));
    let (code, report) = call(&["test", "--data", csv_s, "--J", "2", "--y", "--B", "199"]);
    assert_eq!(code, EXIT_OK, "{report}");
    assert_eq!(report["y_support"], serde_json::json!([0, 1]));
}

#[test]
fn test_rejects_violating_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("d,z\n");
    for i in 0..1000 {
        // P(D=1|Z=0) = 0.6, P(D=1|Z=1) = 0.4
        text.push_str(&format!("{},0\n", usize::from(i % 5 < 3)));
        text.push_str(&format!("{},1\n", usize::from(i % 5 < 2)));
    }
    let path = write(dir.path(), "v.csv", &text);
    let (code, report) = call(&["test", "--data", &path, "--J", "2", "--B", "199"]);
    assert_eq!(code, EXIT_VERDICT);
    assert_eq!(report["reject"], true);
}

#[test]
fn serialization_roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (j, j0) in [(2, 0), (3, 1), (4, 2)] {
        let config = DesignConfig::new(j, j0).unwrap();
        for _ in 0..20 {
            let pz = rational_weights(&vec![1.0 / config.num_instruments() as f64; config.num_instruments()]);
            let q = random_measure(&config, &mut rng, 6).unwrap().with_instrument_marginal(Some(pz.clone())).unwrap();
            assert_eq!(parse_measure(&render(&measure_json(&q))).unwrap(), q);
            let p = q.pushforward();
            assert_eq!(parse_distribution(&render(&distribution_json(&p))).unwrap(), Distribution::Choice(p));
            let qy = random_outcome_measure(&config, &[-1, 0, 4], &mut rng, 5).unwrap();
            assert_eq!(parse_outcome_measure(&render(&outcome_measure_json(&qy))).unwrap(), qy);
            let py = qy.pushforward();
            assert_eq!(
                parse_distribution(&render(&outcome_distribution_json(&py))).unwrap(),
                Distribution::Outcome(py)
            );
        }
    }
}

#[test]
fn binary_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "u.json", UNIFORM);
    let bin = env!("CARGO_BIN_EXE_encourage");
    let go = || Command::new(bin).args(["construct", "--input", &input, "--trace"]).output().unwrap();
    let (a, b) = (go(), go());
    assert_eq!(a.status.code(), Some(EXIT_OK));
    assert_eq!(a.stdout, b.stdout);
    let bad = write(dir.path(), "v.json", VIOLATING);
    let out = Command::new(bin).args(["check", "--input", &bad]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_VERDICT));
    let out = Command::new(bin).args(["check"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
}
