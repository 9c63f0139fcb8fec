//! End-to-end checks of the `kms` binary: exit codes, determinism of the
//! construct round trip, and the text renderings.

use std::path::PathBuf;
use std::process::{Command, Output};

fn kms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kms"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("kms-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn analyze_builtin_graph() {
    let out = kms(&["analyze", "--graph", "exx1", "--beta", "2.0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("exists=Yes"), "{text}");
    assert!(text.contains("transient"), "{text}");
    assert!(text.contains("boundary_rays=2"), "{text}");
}

#[test]
fn analyze_grid_is_inclusive_and_ordered() {
    let out = kms(&[
        "analyze",
        "--graph",
        "twoloops",
        "--beta-grid",
        "0.5:0.9:0.2",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let betas: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix("beta ").and_then(|r| r.split(':').next()))
        .collect();
    assert_eq!(betas, ["0.500000", "0.700000", "0.900000"], "{text}");
}

#[test]
fn construct_round_trips_bit_identically() {
    let path = tmp("rev2.kgd");
    let args = [
        "construct",
        "--theorem",
        "rev2",
        "--entropy",
        "0.6931471805599453",
        "--interval",
        "[h,inf)",
        "--interval",
        "[h+1,h+2]",
        "--out",
        path.to_str().unwrap(),
    ];
    let first = kms(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    let bytes1 = std::fs::read(&path).unwrap();
    let second = kms(&args);
    assert!(second.status.success(), "{}", stderr(&second));
    let bytes2 = std::fs::read(&path).unwrap();
    assert_eq!(bytes1, bytes2, "construct output is not deterministic");

    let analyzed = kms(&["analyze", "--graph", path.to_str().unwrap(), "--beta", "2.2"]);
    assert!(analyzed.status.success(), "{}", stderr(&analyzed));
    assert!(stdout(&analyzed).contains("exists="), "{}", stdout(&analyzed));
    let _ = std::fs::remove_file(&path);
}

#[test]
fn construct_rejects_missing_maximal_interval() {
    let path = tmp("bad.kgd");
    let out = kms(&[
        "construct",
        "--theorem",
        "rev1",
        "--entropy",
        "0.7",
        "--interval",
        "[1.7,1.9]",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(
        stderr(&out).contains("maximal interval"),
        "diagnostic should name the violated hypothesis: {}",
        stderr(&out)
    );
    assert!(!path.exists());
}

#[test]
fn export_backbone_is_a_chain() {
    let out = kms(&[
        "export", "--graph", "backbone", "--dot", "--depth", "4", "--width", "8",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("digraph"), "{text}");
    assert_eq!(text.matches("->").count(), 3, "4-node chain expected: {text}");
}

#[test]
fn export_rejects_zero_width() {
    let out = kms(&[
        "export", "--graph", "backbone", "--dot", "--depth", "4", "--width", "0",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn malformed_file_is_a_clean_error() {
    let path = tmp("garbage.kgd");
    std::fs::write(&path, "{ not json").unwrap();
    let out = kms(&["analyze", "--graph", path.to_str().unwrap(), "--beta", "1.0"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(!stderr(&out).is_empty());
    let _ = std::fs::remove_file(&path);
}
