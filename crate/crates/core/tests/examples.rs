//! Every example runs to completion. The examples are built (or brought
//! up to date) once, then run from next to the test executable's `deps`
//! directory.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Once;

static BUILD: Once = Once::new();

fn example(name: &str) -> PathBuf {
    BUILD.call_once(|| {
        let status = Command::new(env!("CARGO"))
            .args(["build", "--quiet", "--examples", "--manifest-path"])
            .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/Cargo.toml"))
            .status()
            .unwrap();
        assert!(status.success(), "building the examples failed");
    });
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    profile_dir.join("examples").join(format!("{name}{}", std::env::consts::EXE_SUFFIX))
}

fn run(name: &str, args: &[&str]) -> String {
    let path = example(name);
    assert!(path.exists(), "{} not built", path.display());
    let out = Command::new(&path).args(args).output().unwrap();
    assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn case_examples() {
    assert!(run("parse_case", &[]).contains("14 (1 REF, 4 PV, 9 PQ)"));
    assert!(run("build_ybus", &[]).contains("max |Y_ik − Y_ki| = 0.00e0"));
    assert!(run("centralized_nr", &[]).contains("30 buses"));
}

#[test]
fn partition_example() {
    let out = run("partition_dims", &[]);
    assert!(out.contains("case118 in 4 regions"));
    assert!(out.contains("21416"));
}

#[test]
fn solver_examples() {
    let out = run("standard_aladin", &[]);
    assert_eq!(out.matches("‖λ‖∞").count(), 2);
    let out = run("gn_inexact_aladin", &["2"]);
    assert!(out.contains("converged in 4 iterations on 2 thread(s)"), "{out}");
}

#[test]
fn output_examples() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    run("convergence_trace", &[traces.to_str().unwrap()]);
    assert_eq!(std::fs::read_dir(&traces).unwrap().count(), 8);

    run("synthetic_fixtures", &[dir.path().to_str().unwrap()]);
    assert!(dir.path().join("meshed13_partition.json").exists());

    let out = run("benchmark", &["1"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("meshed13,294,13,")).count(), 1);
}
