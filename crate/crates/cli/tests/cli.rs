use std::path::{Path, PathBuf};
use std::process::{Command as Proc, Output};

use pentropy_cli::config::{ExperimentConfig, IndexSet};
use pentropy_cli::{run, Command};

const GOLDEN: &str = r#"{"type":"rotation","alpha":0.6180339887498949}"#;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("plab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn plab(args: &[&str]) -> Output {
    Proc::new(env!("CARGO_BIN_EXE_plab")).args(args).output().expect("plab runs")
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr carries a JSON error report")
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = scratch("determinism");
    let runs: Vec<_> = ["1", "3", "1"]
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let out = dir.join(format!("run{i}"));
            let status = plab(&[
                "oracle",
                "--system",
                GOLDEN,
                "--j",
                "1:4",
                "--m",
                "1:2",
                "--samples",
                "70000",
                "--seed",
                "11",
                "--workers",
                w,
                "--output",
                out.to_str().unwrap(),
            ]);
            assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
            read_dir(&out)
        })
        .collect();
    assert_eq!(runs[0].len(), 2);
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn seeds_change_monte_carlo_output() {
    let dir = scratch("seeds");
    for seed in ["1", "2"] {
        let out = plab(&[
            "oracle",
            "--system",
            GOLDEN,
            "--j",
            "2",
            "--m",
            "1",
            "--samples",
            "5000",
            "--seed",
            seed,
            "--output",
            dir.join(seed).to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_ne!(read_dir(&dir.join("1")), read_dir(&dir.join("2")));
}

#[test]
fn binary_writes_what_the_library_returns() {
    let dir = scratch("library");
    let out = plab(&["pentropy", "--system", GOLDEN, "--j", "1:6", "--output", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let config = ExperimentConfig {
        system: Some(serde_json::from_str(GOLDEN).unwrap()),
        j: Some(IndexSet::Range { from: 1, to: 6, step: 1 }),
        ..Default::default()
    };
    let lib = run(Command::Pentropy, &config);
    assert!(lib.failure.is_none());
    assert_eq!(lib.files.len(), 1);
    assert_eq!(std::fs::read_to_string(dir.join("profile.csv")).unwrap(), lib.files[0].1);
    assert!(lib.files[0].1.starts_with("j,L,H_join,h_j,method,stderr\n"));
}

#[test]
fn empty_index_set_is_a_validation_error() {
    let out = plab(&["pentropy", "--system", GOLDEN, "--j", "5:1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "validation");
}

#[test]
fn all_validation_problems_are_reported_together() {
    let out = plab(&["scan", "--system", GOLDEN, "--c", "1.5", "--pairs", "some", "--j", "0:2"]);
    assert_eq!(out.status.code(), Some(2));
    let messages = stderr_json(&out)["messages"].as_array().unwrap().len();
    assert_eq!(messages, 3);
}

#[test]
fn malformed_descriptor_is_a_validation_error() {
    let out = plab(&["pentropy", "--system", r#"{"type":"rotation"}"#, "--j", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = plab(&["pentropy", "--system", r#"{"type":"iet","lengths":[0.5,0.5],"permutation":[1,1]}"#, "--j", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cap_exhaustion_exits_3_and_keeps_partial_rows() {
    let dir = scratch("cap");
    let out = plab(&[
        "pentropy",
        "--system",
        GOLDEN,
        "--partition",
        r#"{"dyadic":4}"#,
        "--j",
        "1:40",
        "--cap",
        "200",
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_json(&out)["error"].as_str().unwrap().contains("cap"));
    let csv = std::fs::read_to_string(dir.join("profile.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",exact,"));
    assert!(csv.lines().last().unwrap().contains("error:"));
}

#[test]
fn exhausted_rigidity_scan_exits_3() {
    let dir = scratch("rigidity");
    let out = plab(&[
        "scan",
        "--system",
        r#"{"type":"bernoulli","probs":[0.5,0.5]}"#,
        "--m",
        "1:3",
        "--j",
        "1",
        "--m-cap",
        "20",
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "cap_exhausted");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("rigidity.json")).unwrap()).unwrap();
    assert!(report[0]["N"].is_null());
}

#[test]
fn schedule_with_positive_entropy_member_exits_3_with_witness() {
    let family = format!(r#"[{GOLDEN},{{"type":"bernoulli","probs":[0.5,0.5]}}]"#);
    let out = plab(&[
        "schedule",
        "--family",
        &family,
        "--j",
        "1:4",
        "--l-cap",
        "64",
        "--output",
        scratch("witness").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let report = stderr_json(&out);
    let text = report["messages"][0].as_str().unwrap();
    assert!(text.contains("member 2"), "{text}");
}

#[test]
fn config_file_overrides_flags_with_warning() {
    let dir = scratch("config");
    let path = dir.join("run.json");
    std::fs::write(&path, format!(r#"{{"system": {GOLDEN}, "j": [1, 2], "output": "{}"}}"#, dir.join("out").display()))
        .unwrap();
    let out = plab(&["pentropy", "--config", path.to_str().unwrap(), "--j", "1:5"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--j"));
    let csv = std::fs::read_to_string(dir.join("out/profile.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = scratch("unknown");
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"sead": 4}"#).unwrap();
    let out = plab(&["pentropy", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tower_outputs_chacon_heights() {
    let dir = scratch("tower");
    let out = plab(&[
        "tower",
        "--system",
        r#"{"type":"rankone","stages":[{"r":3,"spacers":[0,1,0]}],"repeat":6}"#,
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let heights: Vec<String> = std::fs::read_to_string(dir.join("heights.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(heights, ["1", "4", "13", "40", "121", "364", "1093"]);
}

#[test]
fn scan_writes_every_table() {
    let dir = scratch("scan");
    let out = plab(&[
        "scan",
        "--system",
        r#"{"type":"rotation","alpha":"2/5"}"#,
        "--m",
        "1:10",
        "--j",
        "1:4",
        "--support",
        "0,1",
        "--times",
        "[[1,2]]",
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = read_dir(&dir).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["correlation.csv", "fingerprint.json", "fit.csv", "kappa.csv", "rigidity.json", "theta.csv"]);
    let kappa = std::fs::read_to_string(dir.join("kappa.csv")).unwrap();
    assert_eq!(kappa, "m,kappa,residual\n5,0,0\n10,0,0\n");
}
