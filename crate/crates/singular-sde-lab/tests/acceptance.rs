//! End-to-end acceptance gate. Runs the nine numbered checks of the
//! suite module against a scratch artifact directory and requires every
//! one to pass; the per-criterion verdict lines are printed so a plain
//! `cargo test -- --nocapture` shows the scoreboard.

use singular_sde_lab::run_suite;

#[test]
fn acceptance_criteria() {
    let out = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let reports = run_suite(&out, None).expect("the suite runs to completion");
    assert_eq!(reports.len(), 9);
    let mut verdicts = Vec::new();
    for report in &reports {
        println!("{}", report.line());
        for detail in &report.details {
            println!("    {detail}");
        }
        verdicts.push(report.line());
    }
    assert!(
        reports.iter().all(|r| r.pass),
        "acceptance scoreboard:\n{}",
        verdicts.join("\n")
    );
}
