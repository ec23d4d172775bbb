//! End-to-end runs of the `kinlab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kinlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinlab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const SMALL_LLN: &str = r#"
experiment = "lln"
seed = 7

[model]
t_end = 0.25

[particles]
n_ladder = [16, 64, 256]
replicas = 3
snapshots = 5

[solver]
nx = 128
nv = 128

[frequency]
xi_max = 8.0
eta_max = 8.0
n_xi = 33
n_eta = 33
"#;

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinlab(dir.path(), &["verify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("semigroup-law") && text.contains("PASS"));
}

#[test]
fn usage_and_validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kinlab(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&kinlab(dir.path(), &["--config", "missing.toml", "lln"])), 1);
    fs::write(dir.path().join("bad.toml"), "[particles]\nreplicas = 3\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&kinlab(dir.path(), &["--config", "bad.toml", "lln"])), 1);
    assert_eq!(code(&kinlab(dir.path(), &["--help"])), 0);
}

#[test]
fn boundary_breach_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("box.toml"), "experiment = \"solver-verify\"\n[solver]\nlx = 6.0\nlv = 6.0\nnx = 128\nnv = 128\n").unwrap();
    let o = kinlab(dir.path(), &["--config", "box.toml", "--out", "o", "solve"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("boundary mass"));
}

#[test]
fn repeated_lln_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL_LLN).unwrap();
    let a = kinlab(dir.path(), &["--config", "small.toml", "--out", "a", "lln"]);
    let b = kinlab(dir.path(), &["--config", "small.toml", "--out", "b", "lln"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code(&b), 0);
    assert_eq!(a.stdout, b.stdout);
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n.to_string_lossy() == "lln_report.json"), "{names:?}");
    assert!(names.iter().all(|n| !n.to_string_lossy().ends_with(".partial")));
    for n in &names {
        let read = |d: &str| {
            let text = fs::read_to_string(dir.path().join(d).join(n)).unwrap();
            // The saved configuration records where it was written.
            text.lines().filter(|l| !l.starts_with("output_dir")).collect::<Vec<_>>().join("\n")
        };
        assert!(read("a") == read("b"), "{n:?} differs between runs");
    }
}

#[test]
fn simulate_and_norm_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinlab(dir.path(), &["--out", "s", "simulate", "--n", "8"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("s/paths.csv").exists());
    assert!(dir.path().join("s/increments.bin").exists());
    fs::write(dir.path().join("pts.csv"), "x,v\n0.0,0.0\n").unwrap();
    let o = kinlab(dir.path(), &["norm", "--points", "pts.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_object());
}
