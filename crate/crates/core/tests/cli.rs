use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn tool() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polymer-lab"));
    cmd.env_remove("POLYMER_LAB_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    tool().args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn rows(report: &Value) -> &Vec<Value> {
    report["result"]["report"]["rows"].as_array().unwrap()
}

#[test]
fn free_enumeration_is_normalised() {
    let r = json_of(&run(&["enumerate", "-n", "8"]));
    assert_eq!(r["command"], "enumerate");
    assert_eq!(r["partial"], false);
    for row in rows(&r) {
        assert!((row["z"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn self_avoiding_counts_come_out_exactly() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "saw.json", r#"{"model": {"phi": {"mode": "saw"}}}"#);
    let r = json_of(&run(&["--config", &cfg, "enumerate", "-n", "4"]));
    assert_eq!(r["result"]["report"]["exact_denominator"], 4);
    let numerators: Vec<u64> = rows(&r)[1..]
        .iter()
        .map(|row| row["exact_z_numerator"].as_u64().unwrap())
        .collect();
    assert_eq!(numerators, vec![4, 12, 36, 100]);
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.json", "{not json");
    let out_path = dir.path().join("out.json");
    let out = run(&[
        "--config",
        &cfg,
        "--out",
        out_path.to_str().unwrap(),
        "enumerate",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists());
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(run(&["enumerate", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn invalid_potential_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "m.json",
        r#"{"model": {"phi": {"mode": "table", "values": [0, 1, 2]}}}"#,
    );
    let out = run(&["--config", &cfg, "enumerate", "-n", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
}

#[test]
fn budget_overrun_exits_4_with_partial_report() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("partial.json");
    let out = run(&[
        "--budget",
        "10",
        "--out",
        out_path.to_str().unwrap(),
        "enumerate",
        "-n",
        "6",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["partial"], true);
    assert_eq!(r["result"]["report"]["partial"], true);
}

#[test]
fn verify_reports_total_variation_on_stderr() {
    let out = run(&["verify", "--n", "4"]);
    let r = json_of(&out);
    assert_eq!(r["result"][0]["holds"], true);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("n = 4: TV distance 0.0e0"), "{stderr}");
}

#[test]
fn unfolding_from_the_command_line() {
    let r = json_of(&run(&["transform", "--walk", "EENWNEE", "--site", "3,5"]));
    assert_eq!(r["result"]["output_walk"], "EENENEE");
    assert!(r["result"]["checks"]
        .as_object()
        .unwrap()
        .values()
        .all(|v| v == true));
}

#[test]
fn compass_and_point_inputs_agree() {
    let a = json_of(&run(&["decompose", "--walk", "EENSE"]));
    let b = json_of(&run(&[
        "decompose",
        "--walk",
        "[[0,0],[1,0],[2,0],[2,1],[2,0],[3,0]]",
    ]));
    assert_eq!(a["result"], b["result"]);
    assert_eq!(a["result"]["renewal_times"], serde_json::json!([1, 4]));
}

#[test]
fn walk_outside_the_step_set_is_rejected() {
    let out = run(&["decompose", "--walk", "[[0,0],[2,0]]"]);
    assert!(!out.status.success());
}

#[test]
fn exact_sampling_repeats_byte_for_byte() {
    let args = ["--seed", "7", "sample", "-n", "5", "--count", "50"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
    let other = run(&["--seed", "8", "sample", "-n", "5", "--count", "50"]).stdout;
    assert_ne!(run(&args).stdout, other);
}

#[test]
fn report_config_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first.json");
    let args = [
        "--seed",
        "3",
        "--out",
        first.to_str().unwrap(),
        "sample",
        "--mode",
        "mcmc",
        "-n",
        "5",
        "--sweeps",
        "300",
        "--burn-in",
        "50",
    ];
    assert!(run(&args).status.success());
    let second = dir.path().join("second.json");
    let out = run(&[
        "--config",
        first.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
        "sample",
    ]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap()
    );
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# command: enumerate\n"));
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn csv_and_json_carry_the_same_numbers() {
    let dir = TempDir::new().unwrap();
    let j = json_of(&run(&["enumerate", "-n", "5", "--lambda", "-0.5"]));
    let path = dir.path().join("e.csv");
    let out = run(&[
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
        "enumerate",
        "-n",
        "5",
        "--lambda",
        "-0.5",
    ]);
    assert!(out.status.success());
    let records = csv_rows(&path);
    assert_eq!(records.len(), 6);
    for (rec, row) in records.iter().zip(rows(&j)) {
        let z: f64 = rec[1].parse().unwrap();
        let h: f64 = rec[3].parse().unwrap();
        assert_eq!(z, row["z"].as_f64().unwrap());
        assert_eq!(h, row["h"].as_f64().unwrap());
    }
}

#[test]
fn thread_count_from_environment_does_not_change_results() {
    let plain = run(&["enumerate", "-n", "7"]).stdout;
    for threads in ["1", "3"] {
        let out = tool()
            .env("POLYMER_LAB_THREADS", threads)
            .args(["enumerate", "-n", "7"])
            .output()
            .unwrap();
        assert!(out.status.success());
        assert_eq!(out.stdout, plain);
    }
}
