use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use varinverse_cli::commands::Settings;
use varinverse_cli::corpus;

fn corpus_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join(name)
}

fn varinverse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varinverse"))
        .current_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("varinverse-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    let _ = std::fs::remove_file(&p);
    p
}

#[test]
fn every_corpus_example_has_its_expected_exit_code() {
    let base = Settings::default();
    for ex in corpus::examples() {
        let out = ex.run(&base);
        assert_eq!(out.code, ex.expected_exit, "{}: {}", ex.name, out.message);
    }
}

#[test]
fn corpus_reports_are_reproducible() {
    let base = Settings::default();
    for ex in corpus::examples() {
        let a = ex.run(&base);
        let b = ex.run(&base);
        let ra = a.report.map(|r| varinverse_cli::render(&r));
        let rb = b.report.map(|r| varinverse_cli::render(&r));
        assert_eq!(ra, rb, "{}", ex.name);
        assert_eq!(a.message, b.message, "{}", ex.name);
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let (p1, p2) = (scratch("a.json"), scratch("b.json"));
    for p in [&p1, &p2] {
        let o = varinverse(&[
            "build",
            "--system",
            "dissipative.json",
            "--ansatz",
            "scaled_time",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn report_layout() {
    let o = varinverse(&[
        "first-order",
        "--system",
        "linear_oscillator.json",
        "--grid",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let c = &v["conditions"][0];
    for key in ["id", "pass", "max_residual", "witness"] {
        assert!(!c[key].is_null(), "{key} missing in {c}");
    }
    assert!(v["certify"]["max_residual"].as_f64().unwrap() < 1e-4);
    assert!((v["certify"]["order_estimate"].as_f64().unwrap() - 2.0).abs() < 0.3);
    assert_eq!(v["action"]["path"], "closed_form");
    assert_eq!(v["action"]["table"].as_array().unwrap().len(), 3);
}

#[test]
fn oscillator_lagrangian_is_the_textbook_one() {
    let o = varinverse(&[
        "build",
        "--system",
        "oscillator.json",
        "--ansatz",
        "constant",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["lagrangian"]["L"], "-0.5*q^2 + 0.5*dq^2");
}

#[test]
fn douglas_identity_check_names_the_failing_condition() {
    let o = varinverse(&["check", "--system", "douglas.json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let failing: Vec<&str> = v["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["id"].as_str().unwrap())
        .collect();
    assert_eq!(failing, ["sym11"]);
}

#[test]
fn douglas_build_prints_the_forcing_chain() {
    let o = varinverse(&[
        "build",
        "--system",
        "douglas.json",
        "--ansatz",
        "diagonal_functions",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Eq19→h12=0; Eq11→h11=0; det=0"));
}

#[test]
fn failed_certificate_writes_nothing() {
    let p = scratch("refused.json");
    let o = varinverse(&[
        "build",
        "--system",
        "oscillator.json",
        "--ansatz",
        "constant",
        "--certify-tol",
        "1e-12",
        "--out",
        p.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!p.exists());
}

#[test]
fn input_errors_exit_with_code_two() {
    let cases: [&[&str]; 5] = [
        &["check", "--system", "malformed.json"],
        &["check", "--system", "does_not_exist.json"],
        &[
            "first-order",
            "--system",
            "linear_oscillator.json",
            "--grid",
            "0",
        ],
        &["build", "--system", "oscillator.json", "--ansatz", "cubic"],
        &[
            "check",
            "--system",
            "oscillator.json",
            "--multiplier",
            "magnetic_multiplier.json",
        ],
    ];
    for args in cases {
        let o = varinverse(args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn blow_up_exits_with_code_four() {
    let o = varinverse(&["first-order", "--system", "riccati.json", "--t", "4"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn verify_accepts_a_hand_written_lagrangian() {
    let good = varinverse(&[
        "verify",
        "--system",
        "oscillator.json",
        "--lagrangian",
        "oscillator_lagrangian.json",
    ]);
    assert_eq!(good.status.code(), Some(0));
    let p = scratch("wrong_l.json");
    std::fs::write(&p, r#"{"L": "dq^2/2 - q^2"}"#).unwrap();
    let bad = varinverse(&[
        "verify",
        "--system",
        "oscillator.json",
        "--lagrangian",
        p.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn corpus_subcommand_passes() {
    let o = varinverse(&["corpus", "--filter", "douglas"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["examples"].as_array().unwrap().len(), 4);
    assert!(corpus_path("manifest.json").exists());
}
