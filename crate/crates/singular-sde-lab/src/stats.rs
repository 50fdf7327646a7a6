//! Path statistics over replayed ensembles: martingale-problem defects,
//! occupation-time estimates against weighted source quadratures, and the
//! window-length scaling of drift integrals.
//!
//! For a compactly supported C^2 test function `phi` the process
//! `M^phi_t = phi(w_t) - phi(w_0) + int_0^t (-Lap phi + b . grad phi)(s, w_s) ds`
//! is a martingale under a solution law, so
//! `E[M^phi_{t1} G] - E[M^phi_{t0} G] = 0` for any bounded functional `G`
//! measurable at time `t0`. The defect statistic estimates that difference
//! with its standard error; for simulated approximations it measures the
//! combined time-discretization and mollification error.
//!
//! The occupation estimate pairs the Monte Carlo value of
//! `E int |h(s, w_s)| f(w_s) ds` with the grid quadrature of
//! `sup_z (int < (1_{|h|>=1} + 1_{|h|<1}|h|^p)^{theta'} |f|^{p theta'}
//! rho_z^2 >)^{1/(p theta')}` over lattice translates `z`, recording the
//! fitted constant of the pair.

use crate::certify::{analytic_certificate, exponent_gate};
use crate::cutoff::Weight;
use crate::drift::DriftField;
use crate::error::{LabError, LabResult};
use crate::grid::ScalarSpec;
use crate::numerics::{linear_fit, mean_stderr};
use crate::sim::PathEnsemble;

/// A compactly supported C^2 test function with coded gradient and
/// Laplacian.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub id: String,
    spec: ScalarSpec,
}

impl TestFunction {
    /// `amplitude (1 - |x-center|^2/radius^2)^3` inside the ball, zero
    /// outside: C^2 with analytic derivatives.
    pub fn radial_bump(d: usize, radius: f64, amplitude: f64) -> LabResult<Self> {
        if !(radius > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "test-function radius must be positive, got {radius}"
            )));
        }
        Ok(TestFunction {
            id: format!("bump:r={radius}:amp={amplitude}"),
            spec: ScalarSpec::Bump { center: vec![0.0; d], radius, amplitude },
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.spec.eval(x)
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.spec.gradient_into(x, out);
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.spec.laplacian(x)
    }
}

/// Scalar factor `f` of the occupation integrand.
#[derive(Debug, Clone)]
pub enum ScalarField {
    Spec(ScalarSpec),
    /// `|grad phi|` of a test function
    GradMagnitude(ScalarSpec),
}

impl ScalarField {
    pub fn one() -> Self {
        ScalarField::Spec(ScalarSpec::Constant(1.0))
    }

    pub fn grad_of(phi: &TestFunction) -> Self {
        ScalarField::GradMagnitude(phi.spec.clone())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Spec(s) => s.eval(x),
            ScalarField::GradMagnitude(s) => {
                let mut g = vec![0.0; x.len()];
                s.gradient_into(x, &mut g);
                g.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
        }
    }

    pub fn describe(&self) -> String {
        fn spec_name(s: &ScalarSpec) -> String {
            match s {
                ScalarSpec::Constant(c) => format!("const:{c}"),
                ScalarSpec::Bump { radius, amplitude, .. } => {
                    format!("bump:r={radius}:amp={amplitude}")
                }
                ScalarSpec::Gaussian { sigma, amplitude, .. } => {
                    format!("gaussian:sigma={sigma}:amp={amplitude}")
                }
            }
        }
        match self {
            ScalarField::Spec(s) => spec_name(s),
            ScalarField::GradMagnitude(s) => format!("gradmag({})", spec_name(s)),
        }
    }
}

/// Bounded functionals measurable from the path up to `t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GFunctional {
    /// constant 1
    One,
    /// `clamp(phi(w_{t0}), -clip, clip)`
    ClippedPhi { clip: f64 },
    /// `clamp(mean of w_s[axis] over s in [0, t0], -clip, clip)`
    ClippedTimeAverage { axis: usize, clip: f64 },
}

impl GFunctional {
    pub fn describe(self) -> String {
        match self {
            GFunctional::One => "one".into(),
            GFunctional::ClippedPhi { clip } => format!("clipped-phi:{clip}"),
            GFunctional::ClippedTimeAverage { axis, clip } => {
                format!("clipped-avg:axis={axis}:clip={clip}")
            }
        }
    }
}

/// Estimated `E[M^phi_{t1} G] - E[M^phi_{t0} G]` with its standard error.
#[derive(Debug, Clone)]
pub struct MartingaleDefect {
    pub phi: String,
    pub g: String,
    pub t0: f64,
    pub t1: f64,
    pub defect: f64,
    pub stderr: f64,
    pub m_used: usize,
}

impl MartingaleDefect {
    pub fn within(&self, sigmas: f64) -> bool {
        self.defect.abs() <= sigmas * self.stderr
    }

    /// Whether two defect estimates agree within a joint interval of
    /// `sigmas` standard errors.
    pub fn consistent_with(&self, other: &MartingaleDefect, sigmas: f64) -> bool {
        let joint = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        (self.defect - other.defect).abs() <= sigmas * joint
    }
}

fn step_index(t: f64, dt: f64, steps: usize, name: &str) -> LabResult<usize> {
    if t < -1e-12 {
        return Err(LabError::InvalidParameter(format!("{name}={t} is negative")));
    }
    let k = (t / dt).round() as usize;
    if k > steps {
        return Err(LabError::InvalidParameter(format!(
            "{name}={t} lies beyond the simulated horizon"
        )));
    }
    Ok(k)
}

/// Per-path martingale increment `(M^phi_{t1} - M^phi_{t0}) G`, averaged
/// over the ensemble. The drift appearing in `M^phi` is `b_eval`, which
/// need not be the drift the paths were simulated with (testing a limit
/// drift under an approximating law is the point).
pub fn martingale_defect(
    ens: &PathEnsemble,
    phi: &TestFunction,
    b_eval: &DriftField,
    t0: f64,
    t1: f64,
    g: GFunctional,
) -> LabResult<MartingaleDefect> {
    if b_eval.dim() != ens.d {
        return Err(LabError::Incompatible(format!(
            "drift dimension {} vs ensemble dimension {}",
            b_eval.dim(),
            ens.d
        )));
    }
    if t0 >= t1 {
        return Err(LabError::InvalidParameter(format!(
            "need t0 < t1, got ({t0}, {t1})"
        )));
    }
    if let GFunctional::ClippedTimeAverage { axis, .. } = g {
        if axis >= ens.d {
            return Err(LabError::InvalidParameter(format!(
                "G axis {axis} out of range for dimension {}",
                ens.d
            )));
        }
    }
    let steps = ens.steps();
    let k0 = step_index(t0, ens.dt, steps, "t0")?;
    let k1 = step_index(t1, ens.dt, steps, "t1")?;
    if k0 >= k1 {
        return Err(LabError::InvalidParameter(
            "t0 and t1 round to the same simulation step".into(),
        ));
    }
    let d = ens.d;
    let dt = ens.dt;
    let values = ens.map_paths(|i| {
        let mut grad = vec![0.0; d];
        let mut b = vec![0.0; d];
        let mut integral = 0.0f64;
        let mut prev = 0.0f64;
        let mut phi_start = 0.0f64;
        let mut m0 = 0.0f64;
        let mut m1 = 0.0f64;
        let mut g_phi = 0.0f64;
        let mut g_avg = 0.0f64;
        ens.replay(i, |k, t, x| {
            phi.gradient_into(x, &mut grad);
            b_eval.eval_into(t, x, &mut b);
            let dot: f64 = grad.iter().zip(&b).map(|(gv, bv)| gv * bv).sum();
            let integrand = -phi.laplacian(x) + dot;
            if k == 0 {
                phi_start = phi.eval(x);
            } else {
                integral += dt / 2.0 * (prev + integrand);
            }
            prev = integrand;
            if let GFunctional::ClippedTimeAverage { axis, .. } = g {
                if k <= k0 {
                    g_avg += x[axis];
                }
            }
            if k == k0 {
                m0 = phi.eval(x) - phi_start + integral;
                g_phi = phi.eval(x);
            }
            if k == k1 {
                m1 = phi.eval(x) - phi_start + integral;
            }
        });
        let g_value = match g {
            GFunctional::One => 1.0,
            GFunctional::ClippedPhi { clip } => g_phi.clamp(-clip, clip),
            GFunctional::ClippedTimeAverage { clip, .. } => {
                (g_avg / (k0 + 1) as f64).clamp(-clip, clip)
            }
        };
        (m1 - m0) * g_value
    });
    let (defect, stderr) = mean_stderr(&values);
    Ok(MartingaleDefect {
        phi: phi.id.clone(),
        g: g.describe(),
        t0,
        t1,
        defect,
        stderr,
        m_used: values.len(),
    })
}

/// Monte Carlo occupation integral against its weighted-quadrature bound.
#[derive(Debug, Clone)]
pub struct KrylovPair {
    pub t0: f64,
    pub t1: f64,
    /// `|E int_{t0}^{t1} |h| f ds|` over the ensemble
    pub lhs: f64,
    /// `sup_z (int (split)^{theta'} |f|^{p theta'} rho_z^2)^{1/(p theta')}`
    pub rhs: f64,
    pub fitted_c: f64,
    /// both sides vanished (e.g. `h = 0`)
    pub degenerate: bool,
}

impl KrylovPair {
    pub fn csv_header() -> &'static str {
        "t0,t1,lhs,rhs,fitted_C"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.12e},{:.12e},{:.12e}",
            self.t0, self.t1, self.lhs, self.rhs, self.fitted_c
        )
    }
}

/// Internal quadrature box for the weighted translate sup: hard-coded
/// lattice wide enough for the weight's slow tails to matter little and
/// fine enough for the mollified cores that appear in the scans.
const QUAD_HALF_WIDTH: f64 = 4.0;
const QUAD_STEP: f64 = 0.125;
const TRANSLATE_REACH: i64 = 2;

fn translate_sup(
    h_field: &DriftField,
    f: &ScalarField,
    p: f64,
    theta_conj: f64,
    t0: f64,
    t1: f64,
    weight: &Weight,
) -> LabResult<(f64, Vec<i64>)> {
    let d = h_field.dim();
    let n = (2.0 * QUAD_HALF_WIDTH / QUAD_STEP).round() as usize + 1;
    let nodes = n.pow(d as u32);
    // time samples: one suffices for time-constant fields
    let time_samples: Vec<f64> = if h_field.time_constant_through() >= t1 {
        vec![0.5 * (t0 + t1)]
    } else {
        (0..=32).map(|j| t0 + (t1 - t0) * j as f64 / 32.0).collect()
    };
    let t_weight = (t1 - t0) / time_samples.len() as f64;
    // collapse time into a per-node density
    let mut density = vec![0.0f64; nodes];
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0f64; d];
    for (flat, dens) in density.iter_mut().enumerate() {
        let mut rem = flat;
        for a in (0..d).rev() {
            idx[a] = rem % n;
            rem /= n;
        }
        for a in 0..d {
            x[a] = -QUAD_HALF_WIDTH + QUAD_STEP * idx[a] as f64;
        }
        let fv = f.eval(&x).abs();
        if fv == 0.0 {
            continue;
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut acc = 0.0;
        for t in &time_samples {
            let m = h_field.magnitude(*t, r);
            let split = if m >= 1.0 { 1.0 } else { m.powf(p) };
            acc += split.powf(theta_conj);
        }
        *dens = acc * t_weight * fv.powf(p * theta_conj);
    }
    // sup over integer translates of the weight
    let mut best = 0.0f64;
    let mut best_z = vec![0i64; d];
    let mut z = vec![-TRANSLATE_REACH; d];
    loop {
        let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
        let rho = weight.translated(&zf)?;
        let mut acc = 0.0;
        for (flat, dens) in density.iter().enumerate() {
            if *dens == 0.0 {
                continue;
            }
            let mut rem = flat;
            for a in (0..d).rev() {
                idx[a] = rem % n;
                rem /= n;
            }
            for a in 0..d {
                x[a] = -QUAD_HALF_WIDTH + QUAD_STEP * idx[a] as f64;
            }
            let w = rho.eval(&x);
            acc += dens * w * w;
        }
        if acc > best {
            best = acc;
            best_z.copy_from_slice(&z);
        }
        let mut axis = d;
        while axis > 0 {
            axis -= 1;
            z[axis] += 1;
            if z[axis] <= TRANSLATE_REACH {
                break;
            }
            z[axis] = -TRANSLATE_REACH;
            if axis == 0 {
                axis = usize::MAX;
                break;
            }
        }
        if axis == usize::MAX {
            break;
        }
    }
    Ok((best * QUAD_STEP.powi(d as i32), best_z))
}

/// Pair the path average of `int_{t0}^{t1} |h(s, w_s)| f(w_s) ds` with the
/// weighted-quadrature functional of `(h, f)`; `fitted_C = lhs / rhs`.
#[allow(clippy::too_many_arguments)]
pub fn krylov_statistic(
    ens: &PathEnsemble,
    h_field: &DriftField,
    f: &ScalarField,
    p: f64,
    theta: f64,
    t0: f64,
    t1: f64,
    weight: &Weight,
) -> LabResult<KrylovPair> {
    let d = ens.d;
    if h_field.dim() != d {
        return Err(LabError::Incompatible(format!(
            "h dimension {} vs ensemble dimension {}",
            h_field.dim(),
            d
        )));
    }
    let theta_max = d as f64 / (d as f64 - 1.0);
    if !(theta > 1.0 && theta < theta_max) {
        return Err(LabError::InvalidParameter(format!(
            "theta must lie in (1, {theta_max}), got {theta}"
        )));
    }
    if p < 2.0 {
        return Err(LabError::InvalidParameter(format!(
            "occupation estimate needs p >= 2, got {p}"
        )));
    }
    // gate p against the driving drift when its form bound is known
    if let Some(cert) = analytic_certificate(ens.drift()) {
        exponent_gate(p, cert.delta)?;
    }
    let steps = ens.steps();
    let k0 = step_index(t0, ens.dt, steps, "t0")?;
    let k1 = step_index(t1, ens.dt, steps, "t1")?;
    if k0 >= k1 {
        return Err(LabError::InvalidParameter(format!(
            "window ({t0}, {t1}) does not cover a simulation step"
        )));
    }
    let dt = ens.dt;
    let integrals = ens.map_paths(|i| {
        let mut acc = 0.0f64;
        let mut prev = 0.0f64;
        ens.replay(i, |k, t, x| {
            if k < k0 || k > k1 {
                return;
            }
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let q = h_field.magnitude(t, r) * f.eval(x);
            if k > k0 {
                acc += dt / 2.0 * (prev + q);
            }
            prev = q;
        });
        acc
    });
    let (mean, _) = mean_stderr(&integrals);
    let lhs = mean.abs();
    let theta_conj = theta / (theta - 1.0);
    let (sup, _z) = translate_sup(h_field, f, p, theta_conj, t0, t1, weight)?;
    let rhs = sup.powf(1.0 / (p * theta_conj));
    let degenerate = rhs == 0.0;
    let fitted_c = if degenerate { 0.0 } else { lhs / rhs };
    Ok(KrylovPair { t0, t1, lhs, rhs, fitted_c, degenerate })
}

/// `E int_{t0}^{t1} |b(s, w_s)| ds` for every window, in one replay pass.
pub fn occupation_integrals(
    ens: &PathEnsemble,
    b_n: &DriftField,
    windows: &[(f64, f64)],
) -> LabResult<Vec<(f64, f64, f64)>> {
    if b_n.dim() != ens.d {
        return Err(LabError::Incompatible(format!(
            "drift dimension {} vs ensemble dimension {}",
            b_n.dim(),
            ens.d
        )));
    }
    let steps = ens.steps();
    let mut ranges = Vec::with_capacity(windows.len());
    for (t0, t1) in windows {
        let k0 = step_index(*t0, ens.dt, steps, "t0")?;
        let k1 = step_index(*t1, ens.dt, steps, "t1")?;
        if k0 >= k1 {
            return Err(LabError::InvalidParameter(format!(
                "window ({t0}, {t1}) does not cover a simulation step"
            )));
        }
        ranges.push((k0, k1));
    }
    let dt = ens.dt;
    let per_path = ens.map_paths(|i| {
        let mut acc = vec![0.0f64; ranges.len()];
        let mut prev = 0.0f64;
        ens.replay(i, |k, t, x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let q = b_n.magnitude(t, r);
            for (j, (k0, k1)) in ranges.iter().enumerate() {
                if k > *k0 && k <= *k1 {
                    acc[j] += dt / 2.0 * (prev + q);
                }
            }
            prev = q;
        });
        acc
    });
    let m = per_path.len().max(1) as f64;
    let mut out = Vec::with_capacity(windows.len());
    for (j, (t0, t1)) in windows.iter().enumerate() {
        let col: Vec<f64> = per_path.iter().map(|v| v[j]).collect();
        let total = crate::numerics::pairwise_sum(&col);
        out.push((*t0, *t1, total / m));
    }
    Ok(out)
}

/// Log-log fit of the occupation integral against window length.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    /// fitted exponent of `E int |b| ds ~ C (t1-t0)^mu`
    pub mu_hat: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `(t0, t1, value)` for every window
    pub points: Vec<(f64, f64, f64)>,
}

/// Regress `log E int_{t0}^{t1} |b_n| ds` on `log (t1 - t0)`. Needs at
/// least four distinct window lengths.
pub fn drift_integral_scaling(
    ens: &PathEnsemble,
    b_n: &DriftField,
    windows: &[(f64, f64)],
) -> LabResult<ScalingFit> {
    let mut lengths: Vec<f64> = windows.iter().map(|(a, b)| b - a).collect();
    lengths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lengths.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    if lengths.len() < 4 {
        return Err(LabError::InvalidParameter(format!(
            "scaling fit needs >= 4 distinct window lengths, got {}",
            lengths.len()
        )));
    }
    let points = occupation_integrals(ens, b_n, windows)?;
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for (t0, t1, v) in &points {
        if !(*v > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "occupation integral vanished on ({t0}, {t1}); nothing to fit"
            )));
        }
        xs.push((t1 - t0).ln());
        ys.push(v.ln());
    }
    let (mu_hat, intercept, r2) = linear_fit(&xs, &ys);
    Ok(ScalingFit { mu_hat, intercept, r2, points })
}
