//! End-to-end runs of the `ctrlplace` binary against checked-in fixtures and
//! golden outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctrlplace"))
}

fn here(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("failed to start ctrlplace")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "ctrlplace {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn gramian_of_negative_identity_has_half_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "-1,0\n0,-1\n");
    let b = write(dir.path(), "b.csv", "1,0\n0,1\n");
    let csv = stdout(&["gramian", "--system", path(&a), "--input", path(&b)]);
    assert_eq!(
        csv,
        "5.0000000000000000e-1,0.0000000000000000e0\n0.0000000000000000e0,5.0000000000000000e-1\n"
    );
}

#[test]
fn malformed_row_is_a_validation_error_naming_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "-1,0\n0,-1,7\n");
    let b = write(dir.path(), "b.csv", "1\n0\n");
    let out = run(&["gramian", "--system", path(&a), "--input", path(&b)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("row 1"), "{err}");
}

#[test]
fn unstable_system_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "0.5,0\n0,-1\n");
    let out = run(&["centrality", "--system", path(&a)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn randomized_commands_require_a_seed() {
    for args in [
        vec!["verify"],
        vec!["generate", "random", "--n", "4"],
        vec!["experiment", "eig-compare", "--trials", "1"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    }
}

#[test]
fn unknown_metric_is_rejected() {
    let out = run(&["select", "--system", path(&here("fixtures/diag3.csv")), "--k", "1", "--metric", "volume"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn modular_trace_on_diagonal_fixture_picks_the_slow_modes() {
    let json = stdout(&[
        "select",
        "--system",
        path(&here("fixtures/diag3.csv")),
        "--metric",
        "trace",
        "--k",
        "2",
        "--algorithm",
        "modular",
    ]);
    let compact: String = json.split_whitespace().collect();
    assert!(compact.contains(r#""chosen":[1,2]"#), "{json}");
}

#[test]
fn diagonal_fixture_average_controllability() {
    let csv = stdout(&["centrality", "--system", path(&here("fixtures/diag3.csv")), "--measure", "ac"]);
    assert_eq!(
        csv,
        "node,score,rank\n\
         1,5.0000000000000000e-1,1\n\
         2,2.5000000000000000e-1,2\n\
         3,1.6666666666666666e-1,3\n"
    );
}

#[test]
fn volumetric_centrality_equals_log_det_for_full_rank_nodes() {
    let csv = stdout(&["centrality", "--system", path(&here("fixtures/diag3.csv")), "--measure", "vce"]);
    let scores: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    // 1x1 nonzero block of each single-node Gramian: 1 / (2 |a_ii|)
    for (s, a) in scores.iter().zip([1.0f64, 2.0, 3.0]) {
        assert!((s - (0.5 / a).ln()).abs() < 1e-12, "{s}");
    }
}

#[test]
fn exhaustive_logdet_matches_golden() {
    let json = stdout(&[
        "select",
        "--system",
        path(&here("fixtures/random10.csv")),
        "--metric",
        "logdet",
        "--k",
        "3",
        "--algorithm",
        "exhaustive",
    ]);
    assert_eq!(json, fs::read_to_string(here("golden/select_random10_logdet_k3.json")).unwrap());
}

#[test]
fn exhaustive_golden_is_independent_of_worker_count() {
    let golden = fs::read_to_string(here("golden/select_random10_logdet_k3.json")).unwrap();
    for workers in ["1", "3"] {
        let json = stdout(&[
            "select",
            "--system",
            path(&here("fixtures/random10.csv")),
            "--metric",
            "logdet",
            "--k",
            "3",
            "--algorithm",
            "exhaustive",
            "--workers",
            workers,
        ]);
        assert_eq!(json, golden, "workers {workers}");
    }
}

#[test]
fn ring_oscillator_centrality_matches_golden() {
    let csv = stdout(&[
        "centrality",
        "--system",
        path(&here("fixtures/ring20.csv")),
        "--candidates",
        path(&here("fixtures/ring20_candidates.json")),
        "--measure",
        "ac",
    ]);
    assert_eq!(csv, fs::read_to_string(here("golden/centrality_ring20_ac.csv")).unwrap());
}

#[test]
fn generated_fixtures_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let c = dir.path().join("c.json");
    stdout(&["generate", "oscillator", "--n", "20", "--seed", "1", "--out", path(&a), "--candidates", path(&c)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(here("fixtures/ring20.csv")).unwrap());
    assert_eq!(fs::read(&c).unwrap(), fs::read(here("fixtures/ring20_candidates.json")).unwrap());
    let r = stdout(&["generate", "random", "--n", "10", "--seed", "5"]);
    assert_eq!(r, fs::read_to_string(here("fixtures/random10.csv")).unwrap());
}

#[test]
fn lazy_and_greedy_choose_identically() {
    let sys = here("fixtures/random10.csv");
    let chosen = |alg: &str| {
        let json = stdout(&["select", "--system", path(&sys), "--metric", "logdet", "--k", "4", "--algorithm", alg]);
        let compact: String = json.split_whitespace().collect();
        let start = compact.find(r#""chosen":"#).unwrap();
        let end = compact[start..].find(']').unwrap();
        compact[start..start + end + 1].to_string()
    };
    assert_eq!(chosen("lazy"), chosen("greedy"));
}

#[test]
fn config_file_is_layered_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        &format!(
            r#"{{"command": "select", "system": {:?}, "metric": "trace", "k": 1, "algorithm": "modular"}}"#,
            path(&here("fixtures/diag3.csv"))
        ),
    );
    let one: String = stdout(&["select", "--config", path(&cfg)]).split_whitespace().collect();
    assert!(one.contains(r#""chosen":[1]"#), "{one}");
    let two: String = stdout(&["select", "--config", path(&cfg), "--k", "2"]).split_whitespace().collect();
    assert!(two.contains(r#""chosen":[1,2]"#), "{two}");
    let wrong = run(&["gramian", "--config", path(&cfg)]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn verify_passes_on_a_small_probe() {
    let out = stdout(&["verify", "--seed", "2", "--trials", "60", "--n", "5"]);
    assert!(out.contains("PASS counterexample"), "{out}");
    assert!(!out.contains("FAIL"), "{out}");
}

#[test]
fn histogram_degenerate_k_equals_m_is_percentile_100() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hist");
    stdout(&[
        "experiment", "histogram", "--seed", "4", "--n", "5", "--k", "5", "--trials", "2", "--out", path(&out),
    ]);
    let trials = fs::read_to_string(out.join("trials.csv")).unwrap();
    for line in trials.lines().skip(1) {
        assert_eq!(line.split(',').nth(4), Some("1.0000000000000000e2"), "{line}");
    }
    assert!(out.join("summary.json").exists() && out.join("histogram.csv").exists());
}

#[test]
fn eig_compare_single_trial_is_deterministic() {
    let args = ["experiment", "eig-compare", "--seed", "11", "--trials", "1", "--n", "8", "--k", "3"];
    let a = stdout(&args);
    let b = stdout(&args);
    assert_eq!(a, b);
    assert!(a.starts_with("index,trace,trinv,logdet,lmin\n"), "{a}");
    assert_eq!(a.lines().count(), 9);
}
