//! Black-box checks of the command-line binary: reproducible artifacts,
//! batched config diagnostics, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_singular-sde-lab"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Non-comment lines of a CSV artifact (the `# manifest=` header carries
/// the config hash, which legitimately differs when only the output path
/// differs).
fn body(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success for {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn dgiter_example_invocation_converges() {
    let out = run_ok(&["dgiter", "--N", "1", "--C0", "2", "--alpha", "1", "--y0", "0.5"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("threshold 5.000000e-1"), "stdout: {stdout}");
    assert!(stdout.contains("converged"), "stdout: {stdout}");
}

#[test]
fn certify_example_invocation_reports_both_rows() {
    let out = run_ok(&["certify", "--drift", "inverse-square:d=3:delta=1"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("analytic"), "stdout: {stdout}");
    assert!(stdout.contains("rayleigh_numeric"), "stdout: {stdout}");
}

#[test]
fn same_seed_reruns_are_byte_identical() {
    let a = tmp("scan_a.csv");
    let b = tmp("scan_b.csv");
    let args = |out: &Path| {
        vec![
            "hitting-scan".to_string(),
            "--deltas".into(),
            "1,9".into(),
            "--m".into(),
            "300".into(),
            "--dt".into(),
            "1e-3".into(),
            "--horizon".into(),
            "0.3".into(),
            "--seed".into(),
            "7".into(),
            "--output".into(),
            out.display().to_string(),
        ]
    };
    run_ok(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    run_ok(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    let (body_a, body_b) = (body(&a), body(&b));
    assert!(!body_a.is_empty());
    assert_eq!(body_a, body_b, "same-seed bodies must match byte for byte");
}

#[test]
fn config_file_problems_are_all_reported_with_line_numbers() {
    let path = tmp("broken.ini");
    std::fs::write(
        &path,
        "drift = inverse-square:d=3:delta=2.25\n\
         p = 3.0\n\
         frobz = 1\n\
         m = not-a-number\n\
         tau = 0.01\n\
         tau = 0.02\n",
    )
    .unwrap();
    let out = bin()
        .args(["energy", "--config", path.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2), "bad config must exit 2");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown key `frobz`"), "stderr: {stderr}");
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
    assert!(stderr.contains("duplicate key `tau`"), "stderr: {stderr}");
    assert!(
        stderr.contains("line 6") && stderr.contains("first occurrence at line 5"),
        "stderr: {stderr}"
    );
    assert!(stderr.contains("line 4"), "stderr: {stderr}");
    assert!(
        stderr.contains("must exceed max(p_delta, 2)"),
        "stderr: {stderr}"
    );
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}

#[test]
fn flags_override_config_file_values() {
    let path = tmp("override.ini");
    std::fs::write(
        &path,
        "dg_n = 1\ndg_c0 = 2\ndg_alpha = 1\ndg_y0 = 0.9\n",
    )
    .unwrap();
    // y0 = 0.9 diverges; the flag pulls it back under the threshold
    let out = run_ok(&[
        "dgiter",
        "--config",
        path.to_str().unwrap(),
        "--y0",
        "0.25",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("converged"), "stdout: {stdout}");
}

#[test]
fn unknown_criterion_number_is_a_hard_error() {
    let out = bin()
        .args(["suite", "--only", "12"])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("1..=9"), "stderr: {stderr}");
}
