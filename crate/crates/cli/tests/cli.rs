use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pkm-motion"));
    c.env_remove("PKM_MOTION_CONFIG").env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn plan_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan");
    let cfg = data("default_config.toml");
    let wp = data("spherical_section.csv");
    let o = run(&["--config", cfg.to_str().unwrap(), "plan", "-w", wp.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("duration") && text.contains("binding: task_v"), "{text}");
    for f in ["samples.csv", "joint_lut.csv", "metrics.json", "plotdata/feed.csv", "plotdata/joints.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn compare_prints_one_row_per_method() {
    let wp = data("fan_path.csv");
    let cfg = data("default_config.toml");
    let o = run(&["--config", cfg.to_str().unwrap(), "compare", "-w", wp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("method,segments,feed_max_dev_mm_s,feed_mean_dev_mm_s"));
    assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 8));
    assert!(lines[6].starts_with("modifier(1e-12),"));
    // deterministic across runs
    let again = run(&["--config", cfg.to_str().unwrap(), "compare", "-w", wp.to_str().unwrap()]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn compare_writes_file_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    let wp = data("fan_path.csv");
    let o = run(&["compare", "-w", wp.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 7);
}

#[test]
fn kincheck_passes_on_default_machine() {
    let o = run(&["kincheck", "--poses", "50", "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).trim_end().ends_with("ok"));
}

#[test]
fn step_prints_samples() {
    let wp = data("spherical_section.csv");
    let o = run(&["step", "-w", wp.to_str().unwrap(), "--from", "0", "--to", "0.5", "--dt", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("t_s,q1_mm"));
}

#[test]
fn step_outside_plan_is_validation_error() {
    let wp = data("spherical_section.csv");
    let o = run(&["step", "-w", wp.to_str().unwrap(), "--time", "1000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(run(&["plan", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_waypoint_file_exits_one() {
    let o = run(&["plan", "-w", "/nonexistent/path.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_from_environment_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[plan]\neps_mse = -1.0\n").unwrap();
    let wp = data("spherical_section.csv");
    let o = bin().env("PKM_MOTION_CONFIG", &cfg).args(["plan", "-w", wp.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("plan.eps_mse") && err.contains("line 2"), "{err}");
}
