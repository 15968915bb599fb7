//! End-to-end checks of the installed binary: exit codes, required-key
//! reporting, file contracts, and cross-process determinism.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cavity-bundles"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should launch")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cavity-bundles-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("scratch dir");
    dir.join(name)
}

/// Pull the value off a `name = value` line of the steady record.
fn record_value(stdout: &str, name: &str) -> String {
    let prefix = format!("{name} = ");
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no line {name:?} in:\n{stdout}"))
        .to_string()
}

#[test]
fn dark_point_record_is_defined_and_exits_zero() {
    let out = run(&["steady", "--delta-a", "25", "--omega", "0", "--n-c", "3"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let n_s: f64 = record_value(&text, "n_s").parse().unwrap();
    assert!(n_s.abs() < 1e-12, "dark cavity reported n_s = {n_s}");
    assert_eq!(record_value(&text, "g2_0"), "undefined");
}

#[test]
fn missing_required_key_is_named_on_exit_1() {
    let out = run(&["steady"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(err.contains("delta_a"), "stderr: {err}");
}

#[test]
fn degenerate_delay_grid_is_rejected() {
    let target = scratch("empty-grid.csv");
    let out = run(&[
        "gtau",
        "--delta-a",
        "2",
        "--g-a",
        "2",
        "--order",
        "2",
        "--n-c",
        "3",
        "--tau-points",
        "1",
        "--output",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).contains("at least 2 points"),
        "stderr: {}",
        stderr_of(&out)
    );
    assert!(!target.exists(), "no data file may appear on failure");
}

#[test]
fn unknown_config_key_is_named_on_exit_1() {
    let file = scratch("bad.conf");
    fs::write(&file, "delta_a = 25\nomga = 0.5\n").unwrap();
    let out = run(&["steady", "--config", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("omga"), "stderr: {}", stderr_of(&out));
}

#[test]
fn flag_overrides_config_file() {
    let file = scratch("base.conf");
    fs::write(&file, "delta_a = 3\nomega = 0\nn_c = 3\n").unwrap();
    let out = run(&[
        "steady",
        "--config",
        file.to_str().unwrap(),
        "--delta-a",
        "25",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("# delta_a = 25"), "echo block:\n{text}");
}

#[test]
fn forced_small_cutoff_fails_the_convergence_suite() {
    let out = run(&["validate", "--force-cutoff", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout_of(&out);
    assert!(text.contains("suite convergence: FAIL"), "stdout:\n{text}");
    assert!(text.contains("7/8 suites passed"), "stdout:\n{text}");
}

#[test]
fn validation_passes_on_defaults() {
    let out = run(&["validate"]);
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        stdout_of(&out),
        stderr_of(&out)
    );
    assert!(stdout_of(&out).contains("8/8 suites passed"));
}

#[test]
fn resonance_reruns_are_byte_identical() {
    let f1 = scratch("res-a.csv");
    let f2 = scratch("res-b.csv");
    for f in [&f1, &f2] {
        let out = run(&[
            "resonance",
            "--manifold",
            "2",
            "--g-a",
            "8",
            "--chi-max",
            "5",
            "--chi-points",
            "9",
            "--output",
            f.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }
    let a = fs::read(&f1).unwrap();
    assert_eq!(a, fs::read(&f2).unwrap(), "rerun changed output bytes");
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "chi,branch,delta_a_root");
    assert!(!text.contains('\r'));
    let meta = fs::read_to_string(sidecar(&f1)).unwrap();
    assert!(meta.contains("# manifold = 2"), "{meta}");
}

#[test]
fn sweep_csv_contract_and_cross_process_determinism() {
    let f1 = scratch("sweep-a.csv");
    let f2 = scratch("sweep-b.csv");
    for (f, workers) in [(&f1, "1"), (&f2, "3")] {
        let out = run(&[
            "sweep",
            "--delta-a",
            "2",
            "--g-a",
            "2",
            "--chi",
            "0.7",
            "--delta-abs",
            "1",
            "--force-cutoff",
            "3",
            "--workers",
            workers,
            "--axis1",
            "omega",
            "--axis1-min",
            "0.3",
            "--axis1-max",
            "0.6",
            "--axis1-points",
            "2",
            "--output",
            f.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }
    let a = fs::read(&f1).unwrap();
    assert_eq!(
        a,
        fs::read(&f2).unwrap(),
        "worker count changed output bytes"
    );
    let text = String::from_utf8(a).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "delta_a,chi,phi,delta,omega,n_s,g2_0,g3_0,g4_0,status"
    );
    assert_eq!(text.lines().count(), 3, "header plus one row per grid point");
}

#[test]
fn decoupled_auxiliary_mode_matches_the_single_mode_limit() {
    let out = run(&[
        "fullmodel",
        "--delta-a",
        "2",
        "--g-a",
        "2",
        "--delta-abs",
        "1",
        "--g-b",
        "0",
        "--delta-b",
        "-50",
        "--kappa-b",
        "1",
        "--n-c",
        "3",
        "--n-b",
        "1",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    for line in text.lines().filter(|l| l.contains("rel dev = ")) {
        let dev: f64 = line
            .rsplit("rel dev = ")
            .next()
            .unwrap()
            .trim()
            .parse()
            .unwrap();
        assert!(dev < 1e-10, "decoupled deviation {dev} on line {line:?}");
    }
    assert!(
        text.contains("n_s: two-mode"),
        "comparison lines missing:\n{text}"
    );
}

fn sidecar(p: &PathBuf) -> PathBuf {
    let mut s = p.as_os_str().to_os_string();
    s.push(".meta");
    PathBuf::from(s)
}
