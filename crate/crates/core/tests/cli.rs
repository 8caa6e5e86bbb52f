//! The `aladin-pf` binary end to end: exit codes, output files, manifests.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aladin_pf::runner::SolutionFile;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aladin-pf")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_writes_solution_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (reference, solution, trace) = (dir.path().join("ref.json"), dir.path().join("sol.json"), dir.path().join("trace.csv"));
    let (case, part) = (data("case30.m"), data("case30_partition.json"));

    let out = run(&["solve", "--case", arg(&case), "--algorithm", "centralized", "--solution-out", arg(&reference)]);
    assert_eq!(out.status.code(), Some(0));

    let out = run(&[
        "solve",
        "--case",
        arg(&case),
        "--partition",
        arg(&part),
        "--algorithm",
        "aladin-standard",
        "--model",
        "original",
        "--reference",
        arg(&reference),
        "--solution-out",
        arg(&solution),
        "--trace-out",
        arg(&trace),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.starts_with("converged algorithm=aladin-standard"), "{summary}");

    let sol = SolutionFile::load(&solution).unwrap();
    let nr = SolutionFile::load(&reference).unwrap();
    let dev = sol.to_solution().max_deviation(&nr.to_solution());
    assert!(dev[0] <= 1e-6 && dev[1] <= 1e-6 && dev[2] <= 1e-5 && dev[3] <= 1e-5, "{dev:?}");
    assert!(sol.primal_inf.unwrap() <= 1e-8);

    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,primal_inf,dual_inf,objective,gap,deviation_inf"));
    let last = lines.last().unwrap();
    let deviation: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
    assert!(deviation <= 1e-6);
}

#[test]
fn manifest_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("run.json");
    let case = data("case14.m");
    let part = data("case14_partition.json");
    std::fs::write(
        &manifest,
        serde_json::json!({
            "case": case,
            "partition": part,
            "algorithm": "aladin-gn",
            "max_iter": 1,
            "trace_out": "trace.jsonl"
        })
        .to_string(),
    )
    .unwrap();
    // the manifest alone stops after one iteration
    let out = run(&["solve", "--manifest", arg(&manifest)]);
    assert_eq!(out.status.code(), Some(2));
    // the trace path is relative to the manifest
    let trace = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 1);

    let out = run(&["solve", "--manifest", arg(&manifest), "--max-iter", "30"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unknown_manifest_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("run.json");
    std::fs::write(&manifest, r#"{"case": "x.m", "penalty": 3}"#).unwrap();
    let out = run(&["solve", "--manifest", arg(&manifest)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("penalty"));
}

#[test]
fn input_errors_exit_one() {
    let case = data("case9.m");
    // distributed algorithm without a partition
    let out = run(&["solve", "--case", arg(&case)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));
    // missing file
    assert_eq!(run(&["solve", "--case", "/nonexistent.m", "--algorithm", "centralized"]).status.code(), Some(1));
    // unknown subcommand and bad enum value
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--case", arg(&case), "--model", "tiny"]).status.code(), Some(1));
    // invalid solver setting
    let part = data("case9_partition.json");
    assert_eq!(run(&["solve", "--case", arg(&case), "--partition", arg(&part), "--rho", "-1"]).status.code(), Some(1));
}

#[test]
fn dims_reports_both_models() {
    let out = run(&["dims", "--case", arg(&data("case118.m")), "--partition", arg(&data("case118_partition.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let json: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    let (reduced, original) = (&json[0], &json[1]);
    // tie lines of this partition share endpoints, so count copies directly
    let n = reduced["n_bus"].as_u64().unwrap();
    let copies: u64 = reduced["regions"].as_array().unwrap().iter().map(|r| r["n_copy"].as_u64().unwrap()).sum();
    assert!(copies < 2 * reduced["n_conn"].as_u64().unwrap());
    assert_eq!(reduced["dimension"].as_u64(), Some(2 * n + 2 * copies));
    assert_eq!(original["dimension"].as_u64(), Some(4 * n + 2 * copies));
}

#[test]
fn bench_prints_one_line_per_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let long = dir.path().join("long.csv");
    let out = run(&[
        "bench",
        arg(&data("bench/case9.json")),
        arg(&data("bench/case14.json")),
        "--long-out",
        arg(&long),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("case,buses,n_reg,n_conn,dim_original,dim_reduced"));
    assert!(lines[1].starts_with("case9,9,2,"));
    let long = std::fs::read_to_string(&long).unwrap();
    assert_eq!(long.lines().count(), 1 + 2 * 5);
    assert_eq!(long.lines().filter(|l| l.ends_with(",ok")).count(), 10);
}

#[test]
fn validate_flags_broken_partition() {
    let dir = tempfile::tempdir().unwrap();
    let part = dir.path().join("part.json");
    std::fs::write(&part, r#"{"1": 1, "2": 2, "3": 1}"#).unwrap();
    let out = run(&["validate", "--case", arg(&data("case9.m")), "--partition", arg(&part)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}
