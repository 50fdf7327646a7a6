//! Experiment orchestration: dispatch a parsed [`ExperimentConfig`] to the
//! library operations, time the stages, and emit CSV artifacts.
//!
//! Every CSV starts with the comment line `# manifest=<hash>
//! version=<semver>`, where the hash identifies the effective key=value
//! configuration; re-running a config with the same seed reproduces every
//! artifact byte for byte. Files are written atomically (tmp + rename).
//! Warnings collected in the manifest are acceptance-relevant: a run with
//! a non-empty warning list should exit nonzero.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::certify::{analytic_certificate, certify_refined};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::cutoff::{CutoffFamily, Weight};
use crate::degiorgi::{
    dg_iterate, sup_bound_check, SupBoundMode, SupBoundReport, DG_CONVERGENCE_TOL,
};
use crate::drift::{mollify, DriftField, MollificationSchedule};
use crate::energy::{energy_identity_residual, energy_report, EnergyReport, WindowFunction};
use crate::error::{LabError, LabResult};
use crate::grid::{GridSolution, SourceSpec};
use crate::sim::{hitting_probability, simulate, PathEnsemble};
use crate::solver::{solve_cauchy, SolveOptions, SteppingMode};
use crate::stats::{
    drift_integral_scaling, krylov_statistic, martingale_defect, GFunctional, ScalarField,
    TestFunction,
};

/// Record of one `run` invocation.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub experiment: ExperimentKind,
    /// First 16 hex digits of the SHA-256 of the canonical config text.
    pub config_hash: String,
    pub version: &'static str,
    pub wall_ms: f64,
    /// `(stage name, milliseconds)` in execution order.
    pub stages: Vec<(String, f64)>,
    /// Acceptance-relevant problems; exit nonzero when non-empty.
    pub warnings: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    /// Human-readable result lines, also printed to stdout.
    pub summary: Vec<String>,
}

impl RunManifest {
    pub fn header_comment(&self) -> String {
        format!("# manifest={} version={}", self.config_hash, self.version)
    }

    pub fn describe(&self) -> String {
        let mut s = format!(
            "{} manifest={} version={} wall={:.1}ms",
            self.experiment, self.config_hash, self.version, self.wall_ms
        );
        for (name, ms) in &self.stages {
            let _ = write!(s, "\n  stage {name}: {ms:.1}ms");
        }
        for w in &self.warnings {
            let _ = write!(s, "\n  warning: {w}");
        }
        for a in &self.artifacts {
            let _ = write!(s, "\n  wrote {}", a.display());
        }
        s
    }
}

/// First 16 hex digits of the SHA-256 of the canonical config text.
pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(16);
    for byte in &digest[..8] {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

/// Cap the global worker pool. `None` falls back to the `SSL_LAB_JOBS`
/// environment variable; an unset or unparsable variable keeps the default
/// (one worker per core). Safe to call more than once — only the first
/// call can take effect.
pub fn configure_jobs(jobs: Option<usize>) {
    let n = jobs.or_else(|| {
        std::env::var("SSL_LAB_JOBS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        if n >= 1 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Write `header_comment` + `body` to `path` atomically (tmp + rename),
/// creating parent directories.
pub fn write_artifact(path: &Path, header_comment: &str, body: &str) -> LabResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.tmp-{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or("csv"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(header_comment.as_bytes())?;
        f.write_all(b"\n")?;
        f.write_all(body.as_bytes())?;
        f.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// The non-comment lines of a CSV artifact: what reproducibility compares.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

struct RunCtx<'a> {
    config: &'a ExperimentConfig,
    manifest: RunManifest,
    csv: String,
}

impl RunCtx<'_> {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> LabResult<T>) -> LabResult<T> {
        let start = Instant::now();
        let out = f(self);
        self.manifest
            .stages
            .push((name.to_string(), start.elapsed().as_secs_f64() * 1e3));
        out
    }

    fn say(&mut self, line: impl Into<String>) {
        self.manifest.summary.push(line.into());
    }

    fn warn(&mut self, line: impl Into<String>) {
        self.manifest.warnings.push(line.into());
    }

    fn row(&mut self, line: impl AsRef<str>) {
        self.csv.push_str(line.as_ref());
        self.csv.push('\n');
    }

    fn drift(&self) -> LabResult<&DriftField> {
        self.config.drift.as_ref().ok_or_else(|| {
            LabError::InvalidParameter(format!(
                "experiment `{}` needs a `drift` key",
                self.config.experiment
            ))
        })
    }

    fn simulated_drift(&mut self) -> LabResult<DriftField> {
        let field = self.drift()?.clone();
        if field.sup_magnitude().is_finite() {
            return Ok(field);
        }
        // unbounded fields cannot be driven directly; regularize visibly
        let level = 64;
        let regular = mollify(&field, MollificationSchedule::standard(level)?)?;
        self.say(format!(
            "drift `{field}` is unbounded; simulating its level-{level} mollification"
        ));
        Ok(regular)
    }

    fn ensemble(&mut self) -> LabResult<PathEnsemble> {
        let field = self.simulated_drift()?;
        let mc = &self.config.mc;
        let mut x0 = vec![0.0; field.dim()];
        x0[0] = mc.x0_radius;
        let ens = simulate(&field, &x0, mc.dt, mc.horizon, mc.m, mc.seed)?;
        let excluded = ens.excluded.iter().filter(|e| **e).count();
        if excluded > 0 {
            self.warn(format!("{excluded} path(s) went non-finite and were excluded"));
        }
        let cap_rate = ens.cap_activations as f64 / ens.total_steps.max(1) as f64;
        if cap_rate > 1e-3 {
            self.warn(format!(
                "step cap engaged on {:.3e} of steps (> 1e-3): dt is too coarse \
                 for this drift",
                cap_rate
            ));
        }
        Ok(ens)
    }

    fn solved(&mut self) -> LabResult<(GridSolution, SourceSpec)> {
        let grid = self.config.grid.clone().ok_or_else(|| {
            LabError::InvalidParameter(format!(
                "experiment `{}` needs grid keys",
                self.config.experiment
            ))
        })?;
        let src = SourceSpec {
            h_field: self.config.source_h.clone(),
            f: self.config.source_f.clone(),
        };
        let opts = SolveOptions {
            mode: SteppingMode::ImplicitEuler,
            store_every: self.config.store_every,
            initial: Some(self.config.initial.clone()),
            ..SolveOptions::default()
        };
        let drift = self.config.drift.clone();
        let u = solve_cauchy(
            drift.as_ref().map(|f| f as &dyn crate::solver::DriftEval),
            &src,
            &grid,
            &opts,
        )?;
        for w in &u.warnings {
            self.warn(format!("solver: {w}"));
        }
        Ok((u, src))
    }
}

/// Execute one experiment. CSV artifacts go to the config's `output` path
/// when set (atomically) and into the manifest summary otherwise.
pub fn run(config: &ExperimentConfig) -> LabResult<RunManifest> {
    let start = Instant::now();
    let mut ctx = RunCtx {
        config,
        manifest: RunManifest {
            experiment: config.experiment,
            config_hash: config_hash(&config.canonical),
            version: env!("CARGO_PKG_VERSION"),
            wall_ms: 0.0,
            stages: Vec::new(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
            summary: Vec::new(),
        },
        csv: String::new(),
    };

    match config.experiment {
        ExperimentKind::Certify => run_certify(&mut ctx)?,
        ExperimentKind::Solve => run_solve(&mut ctx)?,
        ExperimentKind::Energy => run_energy(&mut ctx)?,
        ExperimentKind::Supbound => run_supbound(&mut ctx)?,
        ExperimentKind::Dgiter => run_dgiter(&mut ctx)?,
        ExperimentKind::HittingScan => run_hitting_scan(&mut ctx)?,
        ExperimentKind::Martingale => run_martingale(&mut ctx)?,
        ExperimentKind::Krylov => run_krylov(&mut ctx)?,
        ExperimentKind::Scaling => run_scaling(&mut ctx)?,
    }

    let RunCtx { config, mut manifest, csv } = ctx;
    if !csv.is_empty() {
        if let Some(path) = &config.output {
            let path = PathBuf::from(path);
            write_artifact(&path, &manifest.header_comment(), &csv)?;
            manifest.artifacts.push(path);
        } else {
            manifest.summary.push(manifest.header_comment());
            manifest.summary.push(csv.trim_end().to_string());
        }
    }
    manifest.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(manifest)
}

fn run_certify(ctx: &mut RunCtx) -> LabResult<()> {
    let field = ctx.drift()?.clone();
    ctx.row(crate::certify::FormBoundCertificate::csv_header());
    let analytic = analytic_certificate(&field);
    if let Some(cert) = &analytic {
        ctx.row(cert.csv_row());
        ctx.say(cert.to_string());
    }
    let certs = ctx.stage("rayleigh-refinement", |_| certify_refined(&field, 3))?;
    for cert in &certs {
        ctx.row(cert.csv_row());
    }
    let last = certs.last().expect("certify_refined returns >= 1 level");
    ctx.say(last.to_string());
    if let Some(reference) = analytic {
        let rel = (last.delta - reference.delta).abs() / reference.delta.max(1e-300);
        ctx.say(format!(
            "numeric delta {:.6} vs analytic {:.6}: {:.2}% off",
            last.delta,
            reference.delta,
            rel * 1e2
        ));
        if rel > 0.05 {
            ctx.warn(format!(
                "numeric certificate {:.6} deviates more than 5% from the analytic \
                 form bound {:.6}",
                last.delta, reference.delta
            ));
        }
    }
    Ok(())
}

fn run_solve(ctx: &mut RunCtx) -> LabResult<()> {
    let (u, _) = ctx.stage("solve", |c| c.solved())?;
    ctx.say(format!(
        "solved {} slices on {} nodes; max |u| = {:.6e}",
        u.times.len(),
        u.grid.node_count(),
        u.max_abs()
    ));
    if let Some(path) = ctx.config.output.clone() {
        if path.ends_with(".bin") {
            let path = PathBuf::from(path);
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)?;
                }
            }
            let mut buf = Vec::new();
            u.write_binary(&mut buf)?;
            fs::write(&path, buf)?;
            ctx.manifest.artifacts.push(path);
            return Ok(());
        }
    }
    let mut buf = Vec::new();
    u.write_csv(&mut buf)?;
    ctx.csv = String::from_utf8(buf).expect("csv is ascii");
    Ok(())
}

fn energy_windows(u: &GridSolution) -> (f64, f64) {
    let s = u.times[0];
    let t = *u.times.last().expect("solution has slices");
    (s, t)
}

fn run_energy(ctx: &mut RunCtx) -> LabResult<()> {
    let field = ctx.drift()?.clone();
    let (u, src) = ctx.stage("solve", |c| c.solved())?;
    let (s, t) = energy_windows(&u);
    let p = ctx.config.analysis.p;
    let chi = WindowFunction::Cutoff(CutoffFamily::new(
        u.grid.half_width / 2.0,
        u.grid.half_width,
    )?);
    ctx.row(EnergyReport::csv_header());
    let mut last: Option<EnergyReport> = None;
    for frac in [0.0, 0.25, 0.5] {
        let c = frac * u.max_abs();
        let report = energy_report(&u, &field, &src, p, (s, t), c, &chi)?;
        if !report.satisfied {
            ctx.warn(format!(
                "energy inequality violated at level c = {c:.6e}"
            ));
        }
        ctx.row(report.csv_row());
        last = Some(report);
    }
    if let Some(report) = last {
        ctx.say(report.explain());
    }
    let eta = CutoffFamily::new(u.grid.half_width / 2.0, u.grid.half_width)?;
    let residual = energy_identity_residual(&u, &field, &src, p, (s, t), 0.0, &eta)?;
    ctx.say(format!("identity residual at c = 0: {residual:.6e}"));
    Ok(())
}

fn run_supbound(ctx: &mut RunCtx) -> LabResult<()> {
    let (u, src) = ctx.stage("solve", |c| c.solved())?;
    let p = ctx.config.analysis.p;
    let theta = ctx.config.analysis.theta;
    let t_end = u.grid.t_end;
    ctx.row(SupBoundReport::csv_header());
    for mode in [SupBoundMode::LocalBall, SupBoundMode::WeightedGlobal] {
        let report = sup_bound_check(&u, &src, p, theta, t_end, mode)?;
        ctx.say(format!(
            "{}: implied constant {:.6e} (lhs {:.6e})",
            report.mode.name(),
            report.implied_constant,
            report.lhs
        ));
        ctx.row(report.csv_row());
    }
    Ok(())
}

fn run_dgiter(ctx: &mut RunCtx) -> LabResult<()> {
    let dg = &ctx.config.dg;
    let seq = dg_iterate(dg.n, dg.c0, dg.alpha, dg.y0, dg.max_m)?;
    ctx.row("m,y");
    for (m, y) in seq.y.iter().enumerate() {
        ctx.row(format!("{m},{y:.12e}"));
    }
    ctx.say(format!(
        "N={} C0={} alpha={} y0={}: threshold {:.6e}, {}",
        dg.n,
        dg.c0,
        dg.alpha,
        dg.y0,
        seq.threshold,
        if seq.converged {
            let first = seq
                .y
                .iter()
                .position(|y| *y < DG_CONVERGENCE_TOL)
                .unwrap_or(seq.y.len() - 1);
            format!("converged below {DG_CONVERGENCE_TOL:e} by step {first}")
        } else if seq.diverged {
            format!("diverged (blow-up index {:?})", seq.blowup_index)
        } else {
            "neither converged nor diverged within the budget".to_string()
        }
    ));
    Ok(())
}

fn run_hitting_scan(ctx: &mut RunCtx) -> LabResult<()> {
    let mc = ctx.config.mc.clone();
    let deltas = ctx.config.analysis.deltas.clone();
    let d = ctx.config.drift.as_ref().map(|f| f.dim()).unwrap_or(3);
    let mut x0 = vec![0.0; d];
    x0[0] = mc.x0_radius;
    ctx.row("delta,epsilon,dt,M,p_hat,ci95");
    let mut prev: Option<(f64, f64)> = None;
    for &delta in &deltas {
        let stats = ctx.stage(&format!("delta={delta}"), |c| {
            let base = DriftField::inverse_square(d, delta)?;
            let field = mollify(&base, MollificationSchedule::standard(64)?)?;
            let ens = simulate(&field, &x0, mc.dt, mc.horizon, mc.m, mc.seed)?;
            let excluded = ens.excluded.iter().filter(|e| **e).count();
            if excluded > 0 {
                c.warn(format!(
                    "delta={delta}: {excluded} path(s) went non-finite and were excluded"
                ));
            }
            hitting_probability(&ens, mc.epsilon)
        })?;
        ctx.row(format!(
            "{delta},{},{},{},{:.6},{:.6}",
            mc.epsilon, mc.dt, mc.m, stats.p_hat, stats.ci95
        ));
        if let Some((prev_delta, prev_p)) = prev {
            if stats.p_hat + stats.ci95 < prev_p {
                ctx.warn(format!(
                    "hitting probability fell from {prev_p:.4} (delta={prev_delta}) \
                     to {:.4} (delta={delta}) beyond noise",
                    stats.p_hat
                ));
            }
        }
        prev = Some((delta, stats.p_hat));
    }
    Ok(())
}

fn run_martingale(ctx: &mut RunCtx) -> LabResult<()> {
    let ens = ctx.stage("simulate", |c| c.ensemble())?;
    let field = ens.drift().clone();
    let level = field.mollification_level().unwrap_or(0);
    let d = field.dim();
    let phi = TestFunction::radial_bump(d, 1.5, 1.0)?;
    let windows = ctx.config.analysis.windows.clone();
    ctx.row("phi,t0,t1,n,defect,stderr");
    for (t0, t1) in windows {
        let t1 = t1.min(ctx.config.mc.horizon);
        if !(t0 < t1) {
            continue;
        }
        let defect = ctx.stage(&format!("defect[{t0},{t1}]"), |_| {
            martingale_defect(&ens, &phi, &field, t0, t1, GFunctional::One)
        })?;
        ctx.row(format!(
            "{},{t0},{t1},{level},{:.12e},{:.12e}",
            defect.phi, defect.defect, defect.stderr
        ));
        let verdict = if defect.within(3.0) { "within" } else { "OUTSIDE" };
        ctx.say(format!(
            "window [{t0}, {t1}]: defect {:.4e} ({verdict} 3 stderr = {:.4e})",
            defect.defect,
            3.0 * defect.stderr
        ));
        if !defect.within(3.0) {
            ctx.warn(format!(
                "martingale defect {:.4e} exceeds 3 stderr on [{t0}, {t1}]",
                defect.defect
            ));
        }
    }
    Ok(())
}

fn run_krylov(ctx: &mut RunCtx) -> LabResult<()> {
    let ens = ctx.stage("simulate", |c| c.ensemble())?;
    let h = match &ctx.config.source_h {
        Some(h) => h.clone(),
        None => ens.drift().clone(),
    };
    let f = ScalarField::Spec(ctx.config.source_f.clone());
    let a = ctx.config.analysis.clone();
    let weight = Weight::new(ens.d, a.kappa, a.beta, vec![0.0; ens.d])?;
    ctx.row("t0,t1,lhs,rhs,fitted_C");
    let mut fitted = Vec::new();
    for &(t0, t1) in &a.windows {
        let pair = ctx.stage(&format!("krylov[{t0},{t1}]"), |_| {
            krylov_statistic(&ens, &h, &f, a.p, a.theta, t0, t1, &weight)
        })?;
        ctx.row(pair.csv_row());
        if pair.degenerate {
            ctx.say(format!("window [{t0}, {t1}]: degenerate pair (zero rhs)"));
        } else {
            fitted.push(pair.fitted_c);
            ctx.say(format!(
                "window [{t0}, {t1}]: lhs {:.6e}, rhs {:.6e}, fitted C {:.6e}",
                pair.lhs, pair.rhs, pair.fitted_c
            ));
        }
    }
    if fitted.len() >= 2 {
        let lo = fitted.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fitted.iter().cloned().fold(0.0f64, f64::max);
        ctx.say(format!("fitted C spread across windows: x{:.3}", hi / lo));
        if hi > 2.0 * lo {
            ctx.warn(format!(
                "fitted constant varies more than x2 across windows ({lo:.4e} .. {hi:.4e})"
            ));
        }
    }
    Ok(())
}

fn run_scaling(ctx: &mut RunCtx) -> LabResult<()> {
    let ens = ctx.stage("simulate", |c| c.ensemble())?;
    let b_n = ens.drift().clone();
    let windows = ctx.config.analysis.windows.clone();
    let fit = ctx.stage("fit", |_| drift_integral_scaling(&ens, &b_n, &windows))?;
    ctx.row("t0,t1,occupation");
    for (t0, t1, v) in &fit.points {
        ctx.row(format!("{t0},{t1},{v:.12e}"));
    }
    ctx.say(format!(
        "mu_hat = {:.4}, intercept = {:.4}, R^2 = {:.4}",
        fit.mu_hat, fit.intercept, fit.r2
    ));
    if fit.r2 < 0.9 {
        ctx.warn(format!("scaling fit has R^2 = {:.4} < 0.9", fit.r2));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn dgiter_example_converges_and_reruns_identically() {
        let cfg = parse_config(
            "experiment = dgiter\n\
             dg_n = 1\n\
             dg_c0 = 2\n\
             dg_alpha = 1\n\
             dg_y0 = 0.5\n",
        )
        .unwrap();
        let manifest = run(&cfg).unwrap();
        assert!(manifest.warnings.is_empty());
        assert!(manifest.summary.iter().any(|s| s.contains("converged")));

        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("dg.csv");
        let mut cfg_file = cfg.clone();
        cfg_file.output = Some(out.to_string_lossy().into_owned());
        run(&cfg_file).unwrap();
        let first = std::fs::read_to_string(&out).unwrap();
        run(&cfg_file).unwrap();
        let second = std::fs::read_to_string(&out).unwrap();
        assert_eq!(first, second);
        assert!(first.starts_with(&format!(
            "# manifest={} version=",
            config_hash(&cfg_file.canonical)
        )));
        assert_eq!(csv_body(&first).lines().next(), Some("m,y"));
    }

    #[test]
    fn certify_run_reports_the_analytic_and_numeric_rows() {
        let cfg = parse_config(
            "experiment = certify\ndrift = inverse-square:d=3:delta=1\n",
        )
        .unwrap();
        let manifest = run(&cfg).unwrap();
        assert!(manifest.warnings.is_empty(), "{:?}", manifest.warnings);
        assert!(manifest
            .summary
            .iter()
            .any(|s| s.contains("% off")));
    }

    #[test]
    fn hitting_scan_emits_the_scan_columns() {
        let cfg = parse_config(
            "experiment = hitting-scan\n\
             deltas = 1,9\n\
             m = 400\n\
             dt = 1e-3\n\
             horizon = 0.5\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("scan.csv");
        let mut cfg = cfg;
        cfg.output = Some(out.to_string_lossy().into_owned());
        let manifest = run(&cfg).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let body = csv_body(&text);
        let mut lines = body.lines();
        assert_eq!(lines.next(), Some("delta,epsilon,dt,M,p_hat,ci95"));
        assert_eq!(lines.count(), 2);
        assert!(manifest.artifacts.len() == 1);
    }

    #[test]
    fn unbounded_drift_is_mollified_with_a_note() {
        let cfg = parse_config(
            "experiment = scaling\n\
             drift = inverse-square:d=3:delta=1\n\
             m = 200\n\
             dt = 1e-3\n\
             horizon = 0.2\n\
             windows = 0:0.05, 0:0.1, 0:0.15, 0:0.2\n",
        )
        .unwrap();
        let manifest = run(&cfg).unwrap();
        assert!(manifest
            .summary
            .iter()
            .any(|s| s.contains("mollification")));
        assert!(manifest.summary.iter().any(|s| s.contains("mu_hat")));
    }

    #[test]
    fn missing_drift_is_reported_with_the_experiment_name() {
        let cfg = parse_config("experiment = certify\n").unwrap();
        let err = run(&cfg).unwrap_err();
        assert!(err.to_string().contains("certify"));
    }
}
