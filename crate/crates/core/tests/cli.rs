use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn ringsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringsim"))
        .args(args)
        .env_remove("RINGSIM_SEED")
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    ringsim(args).status.code().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ringsim-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(path: &PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_le_reports_one_leader() {
    let report = scratch("le.json");
    let trace = scratch("le.ndjson");
    let out = ringsim(&[
        "run", "--protocol", "le", "--n", "4", "--seed", "7",
        "--report", report.to_str().unwrap(),
        "--trace", trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&report);
    assert_eq!(v["summary"]["leaders"], 1);
    assert_eq!(v["summary"]["outcome"], "completed");
    let lines: Vec<Value> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!lines.is_empty());
    for key in ["step", "actor", "action", "detail", "ledger"] {
        assert!(lines[0].get(key).is_some(), "trace field {key}");
    }
}

#[test]
fn run_dp_records_first_eat() {
    let report = scratch("dp.json");
    let c = code(&[
        "run", "--protocol", "dp", "--n", "5", "--hunger", "all", "--seed", "1",
        "--report", report.to_str().unwrap(),
    ]);
    assert_eq!(c, 0);
    assert!(json(&report)["summary"]["first_eat_step"].is_u64());
}

#[test]
fn run_exit_codes() {
    assert_eq!(code(&["run", "--protocol", "le", "--n", "0"]), 1);
    assert_eq!(code(&["run", "--protocol", "nope", "--n", "3"]), 1);
    assert_eq!(code(&["run", "--protocol", "le-bounded", "--n", "4", "--N", "3"]), 1);
    assert_eq!(code(&["run", "--protocol", "le", "--n", "4", "--budget", "1", "--no-timestamp"]), 3);
}

#[test]
fn env_seed_is_the_default() {
    let a = Command::new(env!("CARGO_BIN_EXE_ringsim"))
        .args(["run", "--protocol", "le", "--n", "5", "--policy", "seeded-random", "--no-timestamp"])
        .env("RINGSIM_SEED", "12")
        .output()
        .unwrap();
    let b = ringsim(&["run", "--protocol", "le", "--n", "5", "--policy", "seeded-random", "--seed", "12", "--no-timestamp"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_with_flag_override() {
    let cfg = scratch("cfg.json");
    std::fs::write(&cfg, r#"{"protocol": "le", "n": 3, "seed": 4, "policy": "seeded-random"}"#).unwrap();
    let r1 = scratch("r1.json");
    let r2 = scratch("r2.json");
    for r in [&r1, &r2] {
        let c = code(&[
            "run", "--config", cfg.to_str().unwrap(), "--n", "5", "--no-timestamp",
            "--report", r.to_str().unwrap(),
        ]);
        assert_eq!(c, 0);
    }
    // Deterministic byte for byte.
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
    let v = json(&r1);
    assert_eq!(v["config"]["n"], 5);
    assert_eq!(v["config"]["seed"], 4);
    assert!(v.get("timestamp").is_none());
}

#[test]
fn verify_exit_codes() {
    assert_eq!(code(&["verify", "--protocol", "le", "--n", "3", "--exhaustive", "--no-timestamp"]), 0);
    assert_eq!(
        code(&["verify", "--protocol", "sb", "--n", "2", "--exhaustive", "--property", "symmetry-broken"]),
        0
    );
    assert_eq!(code(&["verify", "--protocol", "le", "--n", "9", "--exhaustive"]), 1);
    assert_eq!(code(&["verify", "--protocol", "le", "--n", "3", "--property", "nonsense"]), 1);
    assert_eq!(code(&["verify", "--protocol", "dp", "--n", "4", "--hunger", "all", "--seeds", "20"]), 0);
}

#[test]
fn bench_sb_qubits_equal_n() {
    let csv = scratch("sb.csv");
    let report = scratch("sb-bench.json");
    let c = code(&[
        "bench", "--protocol", "sb", "--n", "3..10", "--seeds", "20",
        "--csv", csv.to_str().unwrap(), "--report", report.to_str().unwrap(),
    ]);
    assert_eq!(c, 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,seed,time,cbits,qubits,mem_bits_max,qubits_max,iterations");
    let mut rows = 0;
    for l in lines {
        let f: Vec<u64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[4], f[0]);
        rows += 1;
    }
    assert_eq!(rows, 8 * 20);
    assert_eq!(json(&report)["passed"], true);
}

#[test]
fn bench_le_iterations_within_log() {
    let out = ringsim(&["bench", "--protocol", "le", "--n", "3..8", "--seeds", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for l in text.lines().skip(1) {
        let f: Vec<u64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        let n = f[0];
        let lg = 64 - (n - 1).leading_zeros() as u64;
        assert!(f[7] <= lg, "n = {n}: {} iterations", f[7]);
    }
}

#[test]
fn bench_bad_ranges() {
    assert_eq!(code(&["bench", "--protocol", "sb", "--n", "5..3"]), 1);
    assert_eq!(code(&["bench", "--protocol", "sb", "--n", "3..4", "--seeds", "20"]), 1);
    assert_eq!(code(&["bench", "--protocol", "sb", "--n", "3..8", "--seeds", "3"]), 1);
}

#[test]
fn validate_magic_reports_rows() {
    let report = scratch("magic.json");
    let c = code(&["validate-magic", "--m", "2..6", "--report", report.to_str().unwrap()]);
    assert!(c == 0 || c == 6, "exit {c}");
    let v = json(&report);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for r in rows {
        if r["m"].as_u64().unwrap() % 2 == 0 {
            assert_eq!(r["supported"], true);
        }
    }
    assert_eq!(code(&["validate-magic", "--m", "1..3"]), 1);
}
