use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aimh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aimh")).args(args).output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const FILES: [&str; 5] = ["run_report.json", "efficiency.csv", "acceptance_trace.csv", "monitors.csv", "density_grid.csv"];

#[test]
fn toy1d_default_run_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = aimh(&["--experiment", "toy1d", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in FILES {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let trace = read(dir.path(), "acceptance_trace.csv");
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "sampler,iteration,alpha,accepted,rolling_acceptance");
    assert_eq!(lines.count(), 15_000);
}

#[test]
fn both_samplers_report_relative_inefficiency() {
    let dir = tempfile::tempdir().unwrap();
    let out = aimh(&[
        "--experiment", "toy15d", "--sampler", "both", "--iterations", "3000", "--seed", "3", "--timing", "unit",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eff = read(dir.path(), "efficiency.csv");
    let header: Vec<&str> = eff.lines().next().unwrap().split(',').collect();
    assert!(header.contains(&"relative_inefficiency"));
    assert_eq!(eff.lines().count(), 1 + 15 + 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = aimh(&[
            "--experiment", "tvp", "--synthetic", "--sampler", "both", "--iterations", "2500", "--seed", "11",
            "--timing", "unit", "--out", d.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in FILES {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f} differs");
    }
}

#[test]
fn config_file_is_read_and_flags_take_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    let out_dir = dir.path().join("out");
    fs::write(
        &cfg,
        format!(
            "# toy run\nexperiment = toy1d\nseed = 5\niterations = 50000\nburn_in = 100\nout = {}\n",
            out_dir.display()
        ),
    )
    .unwrap();
    let out = aimh(&["--config", cfg.to_str().unwrap(), "--iterations", "1200"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&out_dir, "acceptance_trace.csv").lines().count(), 1201);
    assert!(read(&out_dir, "run_report.json").contains("\"burn_in\": 100"));
}

#[test]
fn configuration_errors_exit_with_code_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cases: [(&[&str], &str); 5] = [
        (&["--experiment", "toy1d", "--seed", "1", "--out", d, "--iterations", "100", "--burn-in", "100"], "iterations"),
        (&["--experiment", "toy3d", "--seed", "1", "--out", d], "experiment"),
        (&["--experiment", "toy1d", "--out", d], "seed"),
        (&["--experiment", "toy1d", "--seed", "1", "--out", d, "--omega1", "0.9", "--omega2", "0.2"], "omega"),
        (&["--experiment", "toy1d", "--seed", "1", "--out", d, "--beta-policy", "sometimes"], "beta-policy"),
    ];
    for (args, name) in cases {
        let out = aimh(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(name), "{args:?}: {err}");
    }
    assert_eq!(aimh(&["--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn missing_data_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = aimh(&["--experiment", "tvp", "--seed", "1", "--out", d, "--data", "/nonexistent/cpi.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let out = aimh(&["--experiment", "semiparam", "--seed", "1", "--out", d]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn help_documents_output_columns() {
    let out = aimh(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for col in ["relative_inefficiency", "rolling_acceptance", "dominance_max", "proposal_density", "posterior_mean"] {
        assert!(text.contains(col), "{col}");
    }
}
