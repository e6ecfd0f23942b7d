use std::fs;
use std::process::{Command, Output};

fn massshell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_massshell"))
        .args(args)
        .env("MASSSHELL_THREADS", "1")
        .output()
        .unwrap()
}

fn parse_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn simulate_writes_one_row_per_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = massshell(&[
        "simulate",
        "--d",
        "3",
        "--gamma",
        "10",
        "--n-paths",
        "50",
        "--t-end",
        "2",
        "--observable",
        "s",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("path_id,t,value\n"));
    let rows = parse_rows(&text);
    assert_eq!(rows.len(), 50);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], i as f64);
        assert_eq!(r[1], 2.0);
        assert!(r[2] > 0.0);
    }
    assert!(!dir.path().join("s.csv.failures").exists());
}

#[test]
fn full_record_includes_every_step() {
    let o = massshell(&[
        "simulate",
        "--d",
        "2",
        "--gamma",
        "4",
        "--n-paths",
        "3",
        "--t-end",
        "1",
        "--dt",
        "0.125",
        "--record",
        "full",
        "--observable",
        "p_component(2)",
    ]);
    assert!(o.status.success());
    let rows = parse_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 3 * 9);
    // start on the first axis
    assert_eq!(rows[0][2], 0.0);
    assert_eq!(rows[8][1], 1.0);
}

#[test]
fn densities_match_closed_form() {
    let o = massshell(&["densities", "--d", "3", "--gamma", "4", "--observable", "speed"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("x,density\n"));
    let rows = parse_rows(&text);
    assert_eq!(rows.len(), 512);
    for r in &rows {
        assert!((r[1] - 3.0 * r[0] * r[0]).abs() < 1e-13, "{r:?}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# radial run\nd = 2\ngamma = 4\nn_paths = 7\nt_end = 1\n").unwrap();
    let o = massshell(&["simulate", "--config", cfg.to_str().unwrap(), "--n-paths", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(parse_rows(&String::from_utf8(o.stdout).unwrap()).len(), 4);
}

#[test]
fn invalid_settings_exit_with_usage_code() {
    let o = massshell(&["simulate", "--d", "3", "--gamma", "4", "--dt", "zero"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt"));

    let o = massshell(&["densities", "--d", "3", "--gamma", "1", "--observable", "p0"]);
    assert_eq!(o.status.code(), Some(2));

    let o = massshell(&["simulate", "--gamma", "4", "--observable", "p_component(4)"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("observable"));
}

#[test]
fn validate_reports_and_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.txt");
    // far from equilibrium after a short horizon started at s0 = 3
    let o = massshell(&[
        "validate",
        "--d",
        "3",
        "--gamma",
        "10",
        "--n-paths",
        "400",
        "--t-end",
        "0.5",
        "--s0",
        "3",
        "--observable",
        "s,speed",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("check.0.observable=s\n"));
    assert!(text.contains("check.1.observable=speed\n"));
    assert!(text.contains("check.0.pass=false\n"));
    assert!(text.ends_with("pass=false\n"));
    for line in text.lines() {
        assert!(line.contains('='), "{line}");
    }

    let o = massshell(&[
        "validate",
        "--d",
        "3",
        "--gamma",
        "10",
        "--n-paths",
        "400",
        "--t-end",
        "20",
        "--observable",
        "s",
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("failed_paths=0\n"));
}
