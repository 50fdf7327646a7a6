//! The canned acceptance suite: nine numbered checks covering the
//! certificate oracle, the iteration lemma, the PDE reference solution,
//! the energy inequality, sup-bound uniformity, the critical hitting
//! threshold, martingale defects, occupation estimates, and artifact
//! reproducibility. Each check writes its CSV artifacts under the given
//! output directory and returns a [`CriterionReport`]; the CLI `suite`
//! subcommand and the acceptance integration test share this module, so a
//! criterion is reproducible by `suite --only <k>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::certify::{certify_refined, exponent_gate};
use crate::config::parse_config;
use crate::cutoff::CutoffFamily;
use crate::degiorgi::{
    default_theta, dg_iterate, exact_threshold_scan, sup_bound_check, SupBoundMode,
    SupBoundReport,
};
use crate::drift::{mollify, DriftField, MollificationSchedule};
use crate::duhamel::{heat_initial_solution, heat_source_solution};
use crate::energy::{energy_identity_residual, energy_report, EnergyReport, WindowFunction};
use crate::error::{LabError, LabResult};
use crate::grid::{Grid, GridSolution, ScalarSpec, SourceSpec};
use crate::runner::{config_hash, csv_body, run, write_artifact};
use crate::sim::simulate;
use crate::solver::{solve_cauchy, DriftEval, SolveOptions};
use crate::stats::{
    drift_integral_scaling, krylov_statistic, martingale_defect, GFunctional, ScalarField,
    TestFunction,
};

/// Seed used by every seeded suite computation.
pub const SUITE_SEED: u64 = 20_260_816;

/// Reference hitting frequency `(p_hat, ci95)` of the scalar radial image
/// walk ([`crate::sim::radial_image_oracle`]) at `d = 3, delta = 9,
/// r0 = 0.5, epsilon = 0.05, T = 1, dt = 1e-4`, measured once at
/// `M = 10^6` paths with seed 20260816 before the full-dimensional scan
/// was wired up (reproduce with `cargo run --release --example
/// bessel_oracle -- --scheme image --delta 9 --m 1000000 --dt 1e-4`).
/// The image walk reproduces the law of the d-dimensional walker's radius
/// at the same step size exactly, so the joint-interval comparison in
/// criterion 6 is calibrated: it fails only on a genuine engine defect,
/// not on the O(dt) detection bias every scheme carries.
pub const RADIAL_IMAGE_DELTA9: (f64, f64) = (0.550910, 0.000975);

/// `(p_hat, ci95)` of the step-refined direct radial walk
/// ([`crate::sim::radial_oracle`] at `dt = 1e-5`, `M = 10^6`, seed
/// 20260816): the continuum anchor for the same hitting probability. The
/// gap to [`RADIAL_IMAGE_DELTA9`] (about 0.011) is the finite-step
/// detection bias at `dt = 1e-4`; it exceeds the Monte Carlo intervals
/// severalfold, which is why criterion 6 checks the engine against the
/// law-matched image walk rather than against this number.
pub const RADIAL_BESSEL_DELTA9_DEEP: (f64, f64) = (0.562188, 0.000972);

/// Outcome of one acceptance check.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub index: usize,
    pub name: &'static str,
    pub pass: bool,
    pub details: Vec<String>,
    pub wall_s: f64,
    pub artifacts: Vec<PathBuf>,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {} ({}): {} ({:.1} s)",
            self.index,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.wall_s
        )
    }
}

struct Check {
    index: usize,
    name: &'static str,
    start: Instant,
    pass: bool,
    details: Vec<String>,
    artifacts: Vec<PathBuf>,
}

impl Check {
    fn new(index: usize, name: &'static str) -> Self {
        Check {
            index,
            name,
            start: Instant::now(),
            pass: true,
            details: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn note(&mut self, line: impl Into<String>) {
        self.details.push(line.into());
    }

    /// Record a named assertion; a failed one flips the report to FAIL.
    fn assert_that(&mut self, what: &str, ok: bool) {
        if ok {
            self.details.push(format!("ok: {what}"));
        } else {
            self.details.push(format!("FAILED: {what}"));
            self.pass = false;
        }
    }

    fn budget(&mut self, seconds: f64) {
        let elapsed = self.start.elapsed().as_secs_f64();
        self.assert_that(
            &format!("runtime {elapsed:.1} s within {seconds:.0} s"),
            elapsed < seconds,
        );
    }

    fn finish(self) -> CriterionReport {
        CriterionReport {
            index: self.index,
            name: self.name,
            pass: self.pass,
            details: self.details,
            wall_s: self.start.elapsed().as_secs_f64(),
            artifacts: self.artifacts,
        }
    }
}

fn write_suite_csv(
    check: &mut Check,
    out_dir: &Path,
    name: &str,
    pseudo_config: &str,
    body: &str,
) -> LabResult<PathBuf> {
    let path = out_dir.join(name);
    let header = format!(
        "# manifest={} version={}",
        config_hash(pseudo_config),
        env!("CARGO_PKG_VERSION")
    );
    write_artifact(&path, &header, body)?;
    check.artifacts.push(path.clone());
    Ok(path)
}

/// Criterion 1: the Rayleigh-quotient certificate recovers the analytic
/// form bound of the inverse-square field within 5% at three refinement
/// levels, for `delta` in {0.25, 1, 2.25}, in under a minute.
pub fn criterion_1(out_dir: &Path) -> LabResult<CriterionReport> {
    let mut check = Check::new(1, "hardy-certificate");
    let mut body = String::from(crate::certify::FormBoundCertificate::csv_header());
    body.push('\n');
    for delta in [0.25, 1.0, 2.25] {
        let field = DriftField::inverse_square(3, delta)?;
        let certs = certify_refined(&field, 3)?;
        for cert in &certs {
            body.push_str(&cert.csv_row());
            body.push('\n');
        }
        let last = certs.last().expect("three levels");
        let rel = (last.delta - delta).abs() / delta;
        check.note(format!(
            "delta = {delta}: numeric {:.6} ({:.2}% off)",
            last.delta,
            rel * 1e2
        ));
        check.assert_that(
            &format!("numeric certificate within 5% of {delta}"),
            rel <= 0.05,
        );
    }
    write_suite_csv(
        &mut check,
        out_dir,
        "certify.csv",
        "suite=certify\ndeltas=0.25,1,2.25\nlevels=3\n",
        &body,
    )?;
    check.budget(60.0);
    Ok(check.finish())
}

/// Criterion 2: on a 10x10x10 lattice of `(N, C0, alpha)` with
/// `alpha = 1/k`, the recurrence started exactly on the threshold
/// `N^{-1/alpha} C0^{-1/alpha^2}` converges below 1e-12 within 200 steps —
/// verified in exact rational arithmetic, where the threshold orbit is
/// representable (floating point cannot ride the orbit: deviations grow
/// by `1 + alpha` per step). The witnessed divergent start `(1, 2, 1, 0.6)`
/// exceeds 1 by step 5. Runs in under a second.
pub fn criterion_2(out_dir: &Path) -> LabResult<CriterionReport> {
    let mut check = Check::new(2, "iteration-lemma");
    let ns: [(u64, u64); 10] =
        [(1, 2), (3, 4), (1, 1), (3, 2), (2, 1), (3, 1), (4, 1), (5, 1), (8, 1), (10, 1)];
    let c0s: [(u64, u64); 10] =
        [(3, 2), (2, 1), (5, 2), (3, 1), (4, 1), (5, 1), (6, 1), (7, 1), (8, 1), (10, 1)];
    let ks: [u32; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
    let scan = exact_threshold_scan(&ns, &c0s, &ks, 200)?;
    check.note(format!(
        "{} exact instances, slowest convergence in {} step(s)",
        scan.instances, scan.max_steps
    ));
    check.assert_that("lattice covers 1000 instances", scan.instances == 1000);
    check.assert_that(
        "every threshold start converges below 1e-12 within 200 steps",
        scan.all_converged && scan.max_steps <= 200,
    );
    check.assert_that(
        "exact iterates equal the closed-form orbit at every step",
        scan.closed_form_mismatches == 0,
    );

    let witness = dg_iterate(1.0, 2.0, 1.0, 0.6, 16)?;
    let exceed = witness.y.iter().position(|y| *y > 1.0);
    check.note(format!(
        "witness (1, 2, 1, 0.6): y_5 = {:.6}, diverged = {}",
        witness.y.get(5).copied().unwrap_or(f64::NAN),
        witness.diverged
    ));
    check.assert_that(
        "witnessed divergent start exceeds 1 by step 5",
        matches!(exceed, Some(i) if i <= 5) && witness.y.len() > 5 && witness.y[5] > 1.0,
    );
    check.assert_that("witness is flagged divergent", witness.diverged);

    let mut body = String::from("m,y\n");
    for (m, y) in witness.y.iter().enumerate() {
        body.push_str(&format!("{m},{y:.12e}\n"));
    }
    write_suite_csv(
        &mut check,
        out_dir,
        "dgiter.csv",
        "suite=dgiter\ndg_n=1\ndg_c0=2\ndg_alpha=1\ndg_y0=0.6\n",
        &body,
    )?;
    check.budget(1.0);
    Ok(check.finish())
}

/// Criterion 3: with zero drift the finite-difference solution matches the
/// heat-kernel quadrature on the unit ball to 1e-2 at
/// `(h, tau) = (0.05, 0.0025)`, with observed order at least one across
/// the ladder `(0.2, 0.04) -> (0.1, 0.01) -> (0.05, 0.0025)`.
pub fn criterion_3(out_dir: &Path) -> LabResult<CriterionReport> {
    let mut check = Check::new(3, "pde-oracle");
    let d = 3;
    let t_end = 0.08;
    // sigma trades initial curvature (which drives the discretization
    // error) against tail mass at the Dirichlet boundary; 0.55 keeps both
    // comfortably inside the 1e-2 budget at the finest level
    let initial = ScalarSpec::Gaussian { center: vec![0.0; d], sigma: 0.55, amplitude: 1.0 };
    let f = ScalarSpec::Bump { center: vec![0.0; d], radius: 0.8, amplitude: 1.0 };
    let src = SourceSpec { h_field: None, f: f.clone() };
    let ladder = [(0.2, 0.04), (0.1, 0.01), (0.05, 0.0025)];
    let mut rels = Vec::new();
    let mut body = String::from("h,tau,rel_linf\n");
    for &(h, tau) in &ladder {
        let grid = Grid::new(d, 2.0, h, tau, t_end)?;
        let steps = (t_end / tau).round() as usize;
        let opts = SolveOptions {
            store_every: steps,
            initial: Some(initial.clone()),
            ..SolveOptions::default()
        };
        let u = solve_cauchy(None, &src, &grid, &opts)?;
        for w in &u.warnings {
            check.note(format!("solver warning at h={h}: {w}"));
            check.pass = false;
        }
        let mut reference = heat_initial_solution(&grid, &initial, t_end, None)?;
        let forced = heat_source_solution(&grid, &f, t_end, None)?;
        for (r, s) in reference.iter_mut().zip(&forced) {
            *r += *s;
        }
        let numeric = u.final_slice();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        grid.for_each_node(|flat, _, x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if r2 <= 1.0 + 1e-10 {
                num = num.max((numeric[flat] - reference[flat]).abs());
                den = den.max(reference[flat].abs());
            }
        });
        let rel = num / den;
        check.note(format!("(h, tau) = ({h}, {tau}): relative Linf {rel:.3e}"));
        body.push_str(&format!("{h},{tau},{rel:.12e}\n"));
        rels.push(rel);
    }
    let xs: Vec<f64> = ladder.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = rels.iter().map(|r| r.ln()).collect();
    let (order, _, _) = crate::numerics::linear_fit(&xs, &ys);
    check.note(format!("observed order in h: {order:.2}"));
    check.assert_that(
        "finest level matches the heat-kernel quadrature within 1e-2",
        rels[2] <= 1e-2,
    );
    check.assert_that("error decreases along the ladder", rels[0] > rels[1] && rels[1] > rels[2]);
    check.assert_that("observed order is at least 1", order >= 1.0);
    write_suite_csv(
        &mut check,
        out_dir,
        "convergence.csv",
        "suite=convergence\nladder=0.2:0.04,0.1:0.01,0.05:0.0025\nt_end=0.08\n\
         initial=gaussian:sigma=0.55:amp=1\nsource_f=bump:r=0.8:amp=1\n",
        &body,
    )?;
    check.budget(300.0);
    Ok(check.finish())
}

fn energy_instance(h: f64, tau: f64) -> LabResult<(GridSolution, DriftField, SourceSpec)> {
    let base = DriftField::inverse_square(3, 1.0)?;
    let b = mollify(&base, MollificationSchedule::standard(8)?)?;
    let grid = Grid::new(3, 2.0, h, tau, 0.1)?;
    let src = SourceSpec {
        h_field: None,
        f: ScalarSpec::Bump { center: vec![0.0; 3], radius: 0.8, amplitude: 1.0 },
    };
    let opts = SolveOptions {
        store_every: 1,
        initial: Some(ScalarSpec::unit_bump(3)),
        ..SolveOptions::default()
    };
    let u = solve_cauchy(Some(&b as &dyn DriftEval), &src, &grid, &opts)?;
    Ok((u, b, src))
}

/// Criterion 4: for the mollified inverse-square field at `delta = 1`,
/// `p = 2.5`, the discrete energy-identity residual drops by at least 1.5x
/// when `(h, tau)` halve, the inequality with recipe constants holds at
/// both levels and at truncation levels `c` in {0, 0.25, 0.5} of the max,
/// and the exponent gate errors exactly when `p <= max(p_delta, 2)`.
pub fn criterion_4(out_dir: &Path) -> LabResult<CriterionReport> {
    let mut check = Check::new(4, "energy-inequality");
    let p = 2.5;
    let mut body = String::from("h,tau,");
    body.push_str(EnergyReport::csv_header());
    body.push('\n');
    let mut residuals = Vec::new();
    for &(h, tau) in &[(0.2, 0.02), (0.1, 0.01)] {
        let (u, b, src) = energy_instance(h, tau)?;
        let window = (0.0, 0.1);
        let chi = WindowFunction::Cutoff(CutoffFamily::new(1.0, 2.0)?);
        let max_u = u.max_abs();
        for frac in [0.0, 0.25, 0.5] {
            let c = frac * max_u;
            let report = energy_report(&u, &b, &src, p, window, c, &chi)?;
            check.assert_that(
                &format!("inequality holds at (h, tau) = ({h}, {tau}), c = {c:.4e}"),
                report.satisfied,
            );
            body.push_str(&format!("{h},{tau},{}\n", report.csv_row()));
        }
        let eta = CutoffFamily::new(1.0, 2.0)?;
        let res = energy_identity_residual(&u, &b, &src, p, window, 0.0, &eta)?;
        check.note(format!("identity residual at (h, tau) = ({h}, {tau}): {res:.4e}"));
        residuals.push(res);
    }
    let factor = residuals[0] / residuals[1];
    check.note(format!("residual contraction factor: {factor:.2}"));
    check.assert_that("identity residual halves (factor >= 1.5)", factor >= 1.5);

    // gate probes on both sides of the floor for two form bounds
    let gate_ok = exponent_gate(1.9, 1.0).is_err()
        && exponent_gate(2.0, 1.0).is_err()
        && exponent_gate(2.01, 1.0).is_ok()
        && exponent_gate(2.5, 1.0).is_ok()
        && exponent_gate(3.99, 2.25).is_err()
        && exponent_gate(4.0, 2.25).is_err()
        && exponent_gate(4.01, 2.25).is_ok();
    check.assert_that(
        "exponent gate errors exactly when p <= max(p_delta, 2)",
        gate_ok,
    );
    write_suite_csv(
        &mut check,
        out_dir,
        "energy.csv",
        "suite=energy\ndelta=1\nmollify=8\np=2.5\nladder=0.2:0.02,0.1:0.01\n",
        &body,
    )?;
    Ok(check.finish())
}

fn supbound_instance(delta: f64, n: u32) -> LabResult<(GridSolution, SourceSpec)> {
    let base = DriftField::inverse_square(3, delta)?;
    let b = mollify(&base, MollificationSchedule::standard(n)?)?;
    let grid = Grid::new(3, 2.0, 0.2, 0.02, 0.1)?;
    let src = SourceSpec {
        h_field: Some(b.clone()),
        f: ScalarSpec::Bump { center: vec![0.0; 3], radius: 1.0, amplitude: 1.0 },
    };
    let opts = SolveOptions {
        store_every: 1,
        initial: Some(ScalarSpec::unit_bump(3)),
        ..SolveOptions::default()
    };
    let u = solve_cauchy(Some(&b as &dyn DriftEval), &src, &grid, &opts)?;
    Ok((u, src))
}

/// Criterion 5: the implied constants of the local and weighted sup bounds
/// stay within a 5x band across mollification levels `n` in {4, 8, 16} at
/// `delta = 1` and across `delta` in {0.5, 1, 2} at `n = 8`.
pub fn criterion_5(out_dir: &Path) -> LabResult<CriterionReport> {
    let mut check = Check::new(5, "supbound-uniformity");
    let p = 2.5;
    let theta = default_theta(3);
    let cases: [(f64, u32); 5] = [(1.0, 4), (1.0, 8), (1.0, 16), (0.5, 8), (2.0, 8)];
    let mut body = format!("delta,n,{}\n", SupBoundReport::csv_header());
    let mut constants: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for &(delta, n) in &cases {
        let (u, src) = supbound_instance(delta, n)?;
        for mode in [SupBoundMode::LocalBall, SupBoundMode::WeightedGlobal] {
            let report = sup_bound_check(&u, &src, p, theta, 0.1, mode)?;
            body.push_str(&format!("{delta},{n},{}\n", report.csv_row()));
            check.note(format!(
                "delta = {delta}, n = {n}, {}: implied constant {:.4e}",
                report.mode.name(),
                report.implied_constant
            ));
            let scans: &[&str] = match (delta, n) {
                (d, 8) if d == 1.0 => &["n-scan", "delta-scan"],
                (d, _) if d == 1.0 => &["n-scan"],
                _ => &["delta-scan"],
            };
            for scan in scans {
                constants
                    .entry((scan, report.mode.name()))
                    .or_default()
                    .push(report.implied_constant);
            }
        }
    }
    for ((scan, mode), values) in &constants {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(0.0f64, f64::max);
        check.note(format!("{scan} {mode}: constants in [{lo:.4e}, {hi:.4e}]"));
        check.assert_that(
            &format!("{scan} {mode} constants within a 5x band"),
            lo > 0.0 && hi <= 5.0 * lo,
        );
    }
    write_suite_csv(
        &mut check,
        out_dir,
        "supbound.csv",
        "suite=supbound\ncases=1:4,1:8,1:16,0.5:8,2:8\np=2.5\n",
        &body,
    )?;
    Ok(check.finish())
}

/// Criterion 6: at `d = 3, |x0| = 0.5, T = 1, epsilon = 0.05, dt = 1e-4,
/// M = 1e5`, the engine's hitting frequency at `delta = 9` agrees with
/// the radial reference walk within the joint 95% interval, exceeds the
/// `delta = 1` frequency by at least 0.2, and the scan over
/// {0.25, 1, 4, 9, 16} is monotone nondecreasing. Under ten minutes.
pub fn criterion_6(out_dir: &Path) -> LabResult<CriterionReport> {
    let mut check = Check::new(6, "critical-threshold");
    let out = out_dir.join("hitting.csv");
    let cfg = parse_config(&format!(
        "experiment = hitting-scan\n\
         deltas = 0.25,1,4,9,16\n\
         m = 100000\n\
         dt = 1e-4\n\
         horizon = 1\n\
         epsilon = 0.05\n\
         x0_radius = 0.5\n\
         seed = {SUITE_SEED}\n\
         output = {}\n",
        out.display()
    ))?;
    let manifest = run(&cfg)?;
    for w in &manifest.warnings {
        check.note(format!("runner warning: {w}"));
    }
    check.artifacts.push(out.clone());
    let text = fs::read_to_string(&out)?;
    let mut scan: Vec<(f64, f64, f64)> = Vec::new();
    for line in csv_body(&text).lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() == 6 {
            let delta: f64 = cols[0].parse().expect("delta column");
            let p_hat: f64 = cols[4].parse().expect("p_hat column");
            let ci: f64 = cols[5].parse().expect("ci95 column");
            scan.push((delta, p_hat, ci));
            check.note(format!("delta = {delta}: p_hat = {p_hat:.4} +- {ci:.4}"));
        }
    }
    check.assert_that("scan produced five rows", scan.len() == 5);
    if scan.len() == 5 {
        let (p1, _) = (scan[1].1, scan[1].2);
        let (p9, ci9) = (scan[3].1, scan[3].2);
        let (oracle_p, oracle_ci) = RADIAL_IMAGE_DELTA9;
        let joint = (ci9 * ci9 + oracle_ci * oracle_ci).sqrt();
        check.note(format!(
            "delta = 9 walker {p9:.4} vs radial image walk {oracle_p:.4} \
             (joint 95% interval {joint:.4}); step-refined radial walk puts \
             the continuum value at {:.4}",
            RADIAL_BESSEL_DELTA9_DEEP.0
        ));
        check.assert_that(
            "delta = 9 frequency matches the radial image walk within the joint interval",
            (p9 - oracle_p).abs() <= joint,
        );
        check.assert_that(
            "delta = 9 frequency exceeds delta = 1 by at least 0.2",
            p9 - p1 >= 0.2,
        );
        let monotone = scan.windows(2).all(|w| w[0].1 <= w[1].1);
        check.assert_that("scan is monotone nondecreasing in delta", monotone);
    }
    check.budget(600.0);
    Ok(check.finish())
}

/// Criterion 7: the martingale defect of a compactly supported C^2 test
/// function is within 3 standard errors of zero at `M = 1e5` for zero and
/// bounded smooth drifts, and the defects across mollification levels
/// {4, 8, 16} of the inverse-square field at `delta = 1` agree pairwise
/// within their joint intervals.
pub fn criterion_7(out_dir: &Path) -> LabResult<CriterionReport> {
    let mut check = Check::new(7, "martingale-defect");
    let phi = TestFunction::radial_bump(3, 1.5, 1.0)?;
    let (t0, t1) = (0.05, 0.2);
    let mut body = String::from("phi,t0,t1,n,defect,stderr\n");

    for (label, field) in [
        ("zero", DriftField::zero(3)?),
        ("bounded-smooth", DriftField::bounded_smooth(3, 1.5)?),
    ] {
        let ens = simulate(&field, &[0.3, 0.0, 0.0], 1e-4, 0.2, 100_000, SUITE_SEED)?;
        let d = martingale_defect(&ens, &phi, &field, t0, t1, GFunctional::One)?;
        body.push_str(&format!(
            "{},{t0},{t1},0,{:.12e},{:.12e}\n",
            d.phi, d.defect, d.stderr
        ));
        check.note(format!(
            "{label}: defect {:.3e} vs 3 stderr {:.3e}",
            d.defect,
            3.0 * d.stderr
        ));
        check.assert_that(
            &format!("{label} drift defect within 3 standard errors at M = 1e5"),
            d.within(3.0),
        );
    }

    let base = DriftField::inverse_square(3, 1.0)?;
    let mut defects = Vec::new();
    for n in [4u32, 8, 16] {
        let b_n = mollify(&base, MollificationSchedule::standard(n)?)?;
        let ens = simulate(&b_n, &[0.3, 0.0, 0.0], 2e-4, 0.2, 20_000, SUITE_SEED)?;
        let d = martingale_defect(&ens, &phi, &b_n, t0, t1, GFunctional::One)?;
        body.push_str(&format!(
            "{},{t0},{t1},{n},{:.12e},{:.12e}\n",
            d.phi, d.defect, d.stderr
        ));
        check.note(format!("n = {n}: defect {:.3e} +- {:.3e}", d.defect, d.stderr));
        defects.push((n, d));
    }
    for i in 0..defects.len() {
        for j in i + 1..defects.len() {
            let (ni, di) = &defects[i];
            let (nj, dj) = &defects[j];
            check.assert_that(
                &format!("defects at n = {ni} and n = {nj} agree within the joint interval"),
                di.consistent_with(dj, 1.96),
            );
        }
    }
    write_suite_csv(
        &mut check,
        out_dir,
        "defects.csv",
        "suite=defects\ncases=zero,bounded-smooth,mollified-1:4,mollified-1:8,mollified-1:16\n",
        &body,
    )?;
    Ok(check.finish())
}

/// Criterion 8: for `h = b_n, f = 1` the fitted occupation constant is
/// stable within 2x across three windows; the drift-integral scaling fit
/// has exponent above 0.1 with R^2 at least 0.9; and the occupation of
/// `|b_m - b_{2m}| |grad phi|` decreases monotonically over
/// m in {4, 8, 16, 32} on one fixed ensemble.
pub fn criterion_8(out_dir: &Path) -> LabResult<CriterionReport> {
    let mut check = Check::new(8, "krylov-statistic");
    let base = DriftField::inverse_square(3, 1.0)?;
    let b8 = mollify(&base, MollificationSchedule::standard(8)?)?;
    let ens = simulate(&b8, &[0.5, 0.0, 0.0], 1e-3, 1.0, 2_000, SUITE_SEED)?;
    let weight = crate::cutoff::Weight::standard(3)?;
    let (p, theta) = (2.5, default_theta(3));

    let mut body = String::from("t0,t1,lhs,rhs,fitted_C\n");
    let mut fitted = Vec::new();
    for (t0, t1) in [(0.0, 0.25), (0.0, 0.5), (0.25, 0.75)] {
        let pair =
            krylov_statistic(&ens, &b8, &ScalarField::one(), p, theta, t0, t1, &weight)?;
        body.push_str(&pair.csv_row());
        body.push('\n');
        check.note(format!(
            "window [{t0}, {t1}]: lhs {:.4e}, rhs {:.4e}, fitted C {:.4e}",
            pair.lhs, pair.rhs, pair.fitted_c
        ));
        check.assert_that(
            &format!("window [{t0}, {t1}] pair is non-degenerate"),
            !pair.degenerate && pair.fitted_c > 0.0,
        );
        fitted.push(pair.fitted_c);
    }
    let lo = fitted.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = fitted.iter().cloned().fold(0.0f64, f64::max);
    check.note(format!("fitted constants span x{:.2}", hi / lo));
    check.assert_that("fitted constant stable within 2x across windows", hi <= 2.0 * lo);
    write_suite_csv(&mut check, out_dir, "krylov.csv", "suite=krylov\nmollify=8\n", &body)?;

    let windows = [(0.0, 0.125), (0.0, 0.25), (0.0, 0.5), (0.0, 1.0)];
    let fit = drift_integral_scaling(&ens, &b8, &windows)?;
    check.note(format!("scaling fit: mu_hat {:.3}, R^2 {:.4}", fit.mu_hat, fit.r2));
    check.assert_that("scaling exponent exceeds 0.1", fit.mu_hat > 0.1);
    check.assert_that("scaling fit has R^2 >= 0.9", fit.r2 >= 0.9);
    let mut scaling_body = String::from("t0,t1,occupation\n");
    for (t0, t1, v) in &fit.points {
        scaling_body.push_str(&format!("{t0},{t1},{v:.12e}\n"));
    }
    write_suite_csv(
        &mut check,
        out_dir,
        "scaling.csv",
        "suite=scaling\nmollify=8\n",
        &scaling_body,
    )?;

    let phi = TestFunction::radial_bump(3, 1.5, 1.0)?;
    let f_grad = ScalarField::grad_of(&phi);
    let mut lhs_values = Vec::new();
    let mut est2_body = String::from("m,lhs\n");
    for m in [4u32, 8, 16, 32] {
        let b_m = mollify(&base, MollificationSchedule::standard(m)?)?;
        let b_2m = mollify(&base, MollificationSchedule::standard(2 * m)?)?;
        let diff = DriftField::difference(b_m, b_2m)?;
        let pair = krylov_statistic(&ens, &diff, &f_grad, p, theta, 0.0, 0.5, &weight)?;
        check.note(format!("m = {m}: difference occupation {:.4e}", pair.lhs));
        est2_body.push_str(&format!("{m},{:.12e}\n", pair.lhs));
        lhs_values.push(pair.lhs);
    }
    let decreasing = lhs_values.windows(2).all(|w| w[1] < w[0]);
    check.assert_that(
        "difference occupation decreases monotonically over m in {4, 8, 16, 32}",
        decreasing,
    );
    write_suite_csv(
        &mut check,
        out_dir,
        "estimate2.csv",
        "suite=estimate2\nlevels=4,8,16,32\n",
        &est2_body,
    )?;
    Ok(check.finish())
}

/// Criterion 9: running every CSV-producing check a second time with the
/// same seeds reproduces each artifact body byte for byte.
pub fn criterion_9(out_dir: &Path) -> LabResult<CriterionReport> {
    let mut check = Check::new(9, "reproducibility");
    let rerun_dir = out_dir.join("rerun");
    fs::create_dir_all(&rerun_dir)?;
    let mut first: Vec<PathBuf> = Vec::new();
    for k in 1..=8 {
        let report = run_criterion(k, &rerun_dir)?;
        first.extend(report.artifacts);
    }
    check.assert_that("rerun produced artifacts", !first.is_empty());
    for rerun_path in &first {
        let name = rerun_path.file_name().expect("artifact has a name");
        let original = out_dir.join(name);
        let name = name.to_string_lossy();
        if !original.is_file() {
            check.assert_that(&format!("{name} exists in both runs"), false);
            continue;
        }
        let a = fs::read_to_string(&original)?;
        let b = fs::read_to_string(rerun_path)?;
        check.assert_that(
            &format!("{name} body is byte-identical across runs"),
            csv_body(&a) == csv_body(&b),
        );
    }
    Ok(check.finish())
}

/// Run acceptance check `k` (1..=9), writing artifacts under `out_dir`.
pub fn run_criterion(k: usize, out_dir: &Path) -> LabResult<CriterionReport> {
    fs::create_dir_all(out_dir)?;
    match k {
        1 => criterion_1(out_dir),
        2 => criterion_2(out_dir),
        3 => criterion_3(out_dir),
        4 => criterion_4(out_dir),
        5 => criterion_5(out_dir),
        6 => criterion_6(out_dir),
        7 => criterion_7(out_dir),
        8 => criterion_8(out_dir),
        9 => criterion_9(out_dir),
        other => Err(LabError::InvalidParameter(format!(
            "acceptance criteria are numbered 1..=9, got {other}"
        ))),
    }
}

/// Run the whole suite (or criterion `only`), in order.
pub fn run_suite(out_dir: &Path, only: Option<usize>) -> LabResult<Vec<CriterionReport>> {
    let indices: Vec<usize> = match only {
        Some(k) => vec![k],
        None => (1..=9).collect(),
    };
    let mut reports = Vec::new();
    for k in indices {
        reports.push(run_criterion(k, out_dir)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    // The full suite is exercised by the acceptance integration test; here
    // only the cheap criteria run, to keep the unit cycle fast.

    #[test]
    fn iteration_lemma_criterion_passes_in_under_a_second() {
        let dir = tempfile::tempdir().unwrap();
        let report = criterion_2(dir.path()).unwrap();
        assert!(report.pass, "{:#?}", report.details);
        assert!(report.wall_s < 1.0);
        assert!(dir.path().join("dgiter.csv").is_file());
    }

    #[test]
    fn certificate_criterion_passes_within_budget() {
        let dir = tempfile::tempdir().unwrap();
        let report = criterion_1(dir.path()).unwrap();
        assert!(report.pass, "{:#?}", report.details);
    }

    #[test]
    fn criterion_indices_are_validated() {
        let dir = tempfile::tempdir().unwrap();
        assert!(run_criterion(0, dir.path()).is_err());
        assert!(run_criterion(10, dir.path()).is_err());
    }
}
