//! The iteration lemma behind sup bounds, and the sup-bound ratio reports.
//!
//! The driving recurrence is `y_{m+1} = N C0^m y_m^{1+alpha}` (worst case of
//! the inequality form). Its closed threshold orbit starts at
//! `y_0 = N^{-1/alpha} C0^{-1/alpha^2}` and decays geometrically,
//! `y_m = y_0 C0^{-m/alpha}`; any start strictly below collapses
//! doubly-exponentially, any start strictly above blows up
//! doubly-exponentially. The threshold orbit is a repelling manifold with
//! error amplification `(1+alpha)^m`, so floating point cannot track it for
//! hundreds of steps; the exact scan here therefore runs in rational
//! arithmetic for `alpha = 1/k`, where every orbit value is the k-th power
//! of a rational and the step's k-th root is exact.
//!
//! The sup-bound checks compare the positive part of a solved field against
//! source quadratures of the form
//! `(1_{|h|>=1} + 1_{|h|<1}|h|^p)^{theta'} |f|^{p theta'}` — over the unit
//! ball plus a remainder of `u_+` integrals (local mode), or against the
//! sup over lattice translates of weight-localized integrals (global mode)
//! — and report the measured implied constant.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::cutoff::Weight;
use crate::error::{LabError, LabResult};
use crate::grid::{GridSolution, SourceSpec};

/// A run is declared convergent when the last iterate is below this.
pub const DG_CONVERGENCE_TOL: f64 = 1e-12;

/// One run of the geometric recurrence with equality.
#[derive(Debug, Clone)]
pub struct DGSequence {
    pub n: f64,
    pub c0: f64,
    pub alpha: f64,
    /// iterates y_0 .. (stops early at a blow-up)
    pub y: Vec<f64>,
    /// closed-form convergence threshold for y_0
    pub threshold: f64,
    pub below_threshold: bool,
    /// last iterate below [`DG_CONVERGENCE_TOL`]
    pub converged: bool,
    /// an iterate overflowed
    pub diverged: bool,
    pub blowup_index: Option<usize>,
}

/// `N^{-1/alpha} C0^{-1/alpha^2}`: starts at or below converge (exactly),
/// starts above diverge.
pub fn iteration_threshold(n: f64, c0: f64, alpha: f64) -> f64 {
    n.powf(-1.0 / alpha) * c0.powf(-1.0 / (alpha * alpha))
}

/// Run `y_{m+1} = N C0^m y_m^{1+alpha}` for `max_m` steps.
pub fn dg_iterate(n: f64, c0: f64, alpha: f64, y0: f64, max_m: usize) -> LabResult<DGSequence> {
    if !n.is_finite() || n <= 0.0 {
        return Err(LabError::InvalidParameter(format!("N must be positive, got {n}")));
    }
    if !c0.is_finite() || c0 <= 1.0 {
        return Err(LabError::InvalidParameter(format!("C0 must exceed 1, got {c0}")));
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(LabError::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if !y0.is_finite() || y0 < 0.0 {
        return Err(LabError::InvalidParameter(format!("y0 must be nonnegative, got {y0}")));
    }
    if max_m == 0 {
        return Err(LabError::InvalidParameter("max_m must be at least 1".into()));
    }
    let mut y = Vec::with_capacity(max_m + 1);
    y.push(y0);
    let mut diverged = false;
    let mut blowup_index = None;
    let mut c0_pow = 1.0f64;
    for m in 0..max_m {
        let prev = y[m];
        let next = if prev == 0.0 {
            0.0 // avoid 0 * inf once C0^m overflows
        } else {
            n * c0_pow * prev.powf(1.0 + alpha)
        };
        y.push(next);
        if !next.is_finite() {
            diverged = true;
            blowup_index = Some(m + 1);
            break;
        }
        c0_pow *= c0;
    }
    let converged =
        !diverged && y.len() == max_m + 1 && y[max_m] < DG_CONVERGENCE_TOL;
    let threshold = iteration_threshold(n, c0, alpha);
    Ok(DGSequence {
        n,
        c0,
        alpha,
        below_threshold: y0 <= threshold,
        threshold,
        converged,
        diverged,
        blowup_index,
        y,
    })
}

fn big_ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn ratio_pow(r: &BigRational, e: i64) -> BigRational {
    let exp = e.unsigned_abs() as usize;
    let num = num_traits::pow(r.numer().clone(), exp);
    let den = num_traits::pow(r.denom().clone(), exp);
    if e >= 0 {
        BigRational::new(num, den)
    } else {
        BigRational::new(den, num)
    }
}

/// Exact k-th root of a positive rational, if it is a perfect k-th power.
fn exact_kth_root(y: &BigRational, k: u32) -> Option<BigRational> {
    if !y.is_positive() {
        return None;
    }
    let rn = y.numer().nth_root(k);
    let rd = y.denom().nth_root(k);
    if &num_traits::pow(rn.clone(), k as usize) == y.numer()
        && &num_traits::pow(rd.clone(), k as usize) == y.denom()
    {
        Some(BigRational::new(rn, rd))
    } else {
        None
    }
}

/// Result of the exact-arithmetic threshold scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactScan {
    pub instances: usize,
    pub all_converged: bool,
    /// largest number of steps any instance needed to pass below 1e-12
    pub max_steps: usize,
    /// disagreements between the exact iterate and the closed-form orbit
    /// (must be zero: the recurrence equals the closed form identically)
    pub closed_form_mismatches: usize,
}

/// Run the recurrence in exact rational arithmetic, started exactly on the
/// threshold, over every combination of `ns x c0s x ks` with
/// `alpha = 1/k`. For these alphas the threshold `N^{-k} C0^{-k^2}` is
/// rational and every orbit value is the k-th power of a rational, so the
/// step `y^{1+1/k} = y * y^{1/k}` is exact. Each iterate is also checked
/// against the closed form `y_m = (N^{-1} C0^{-(k+m)})^k`.
pub fn exact_threshold_scan(
    ns: &[(u64, u64)],
    c0s: &[(u64, u64)],
    ks: &[u32],
    max_m: usize,
) -> LabResult<ExactScan> {
    let tol = BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), 12));
    let mut all_converged = true;
    let mut max_steps = 0usize;
    let mut mismatches = 0usize;
    for &(nn, nd) in ns {
        for &(cn, cd) in c0s {
            if nn == 0 || nd == 0 || cd == 0 || cn <= cd {
                return Err(LabError::InvalidParameter(
                    "scan requires N > 0 and C0 > 1 as positive rationals".into(),
                ));
            }
            for &k in ks {
                if k == 0 {
                    return Err(LabError::InvalidParameter("k must be positive".into()));
                }
                let n = big_ratio(nn, nd);
                let c0 = big_ratio(cn, cd);
                let mut y = ratio_pow(&n, -(k as i64)) * ratio_pow(&c0, -((k * k) as i64));
                // closed-form base N^{-1} C0^{-(k+m)}, advanced by /C0 per step
                let mut base = ratio_pow(&n, -1) * ratio_pow(&c0, -(k as i64));
                let mut c0_pow = BigRational::one();
                let mut converged_at = None;
                for m in 0..=max_m {
                    if y != ratio_pow(&base, k as i64) {
                        mismatches += 1;
                        break;
                    }
                    if y < tol {
                        converged_at = Some(m);
                        break;
                    }
                    let root = exact_kth_root(&y, k).ok_or_else(|| {
                        LabError::Incompatible(
                            "threshold orbit left the perfect-power manifold".into(),
                        )
                    })?;
                    y = &n * &c0_pow * &y * root;
                    c0_pow *= &c0;
                    base /= &c0;
                }
                match converged_at {
                    Some(m) => max_steps = max_steps.max(m),
                    None => all_converged = false,
                }
            }
        }
    }
    Ok(ExactScan {
        instances: ns.len() * c0s.len() * ks.len(),
        all_converged,
        max_steps,
        closed_form_mismatches: mismatches,
    })
}

/// The two-step chain `E_{m+1} = C4^m U_m`,
/// `U_{m+1} = c E_{m+1} ((M 2^{-m-1})^{-p} U_m)^alpha`, fed with equality.
pub fn chain_sequence(
    c: f64,
    c4: f64,
    alpha: f64,
    p: f64,
    level_scale: f64,
    u0: f64,
    steps: usize,
) -> Vec<f64> {
    let mut u = Vec::with_capacity(steps + 1);
    u.push(u0);
    let mut c4_pow = 1.0;
    for m in 0..steps {
        let prev = u[m];
        let e_next = c4_pow * prev;
        let level = ((level_scale * 2f64.powi(-(m as i32) - 1)).powf(-p) * prev).powf(alpha);
        u.push(c * e_next * level);
        c4_pow *= c4;
    }
    u
}

/// The `(N, C0)` for which [`chain_sequence`] collapses to the single
/// recurrence: `N = c (M/2)^{-p alpha}`, `C0 = C4 2^{p alpha}`.
pub fn chain_equivalent_params(c: f64, c4: f64, alpha: f64, p: f64, level_scale: f64) -> (f64, f64) {
    (
        c * (level_scale / 2.0).powf(-p * alpha),
        c4 * 2f64.powf(p * alpha),
    )
}

/// Where the sup of `u_+` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupBoundMode {
    /// sup over `[0,T] x B(0,1/2)` against unit-ball integrals
    LocalBall,
    /// sup over the whole box against weight-translate integrals
    WeightedGlobal,
}

impl SupBoundMode {
    pub fn name(self) -> &'static str {
        match self {
            SupBoundMode::LocalBall => "local_ball",
            SupBoundMode::WeightedGlobal => "weighted_global",
        }
    }
}

/// Midpoint of the admissible interval `(1, d/(d-1))`.
pub fn default_theta(d: usize) -> f64 {
    (1.0 + d as f64 / (d as f64 - 1.0)) / 2.0
}

/// Measured sides of a sup bound.
#[derive(Debug, Clone)]
pub struct SupBoundReport {
    pub mode: SupBoundMode,
    pub p: f64,
    pub theta: f64,
    pub theta_conj: f64,
    pub t_end: f64,
    /// discrete sup of `u_+` over the mode's region
    pub lhs: f64,
    /// `2 H^{1/(p theta')}` (local) or the best translate integral to the
    /// power `1/(p theta')` (global)
    pub source_term: f64,
    /// `(int u_+^p + (int u_+^{p theta})^{1/theta})^{1/p}` over the unit
    /// ball (local mode; zero in global mode)
    pub remainder_term: f64,
    /// minimal single constant with `lhs <= C (source + remainder)`
    pub implied_constant: f64,
    /// source term plus the remainder scaled by the measured K
    pub rhs: f64,
    /// maximizing lattice translate (global mode)
    pub best_translate: Option<Vec<i64>>,
}

impl SupBoundReport {
    pub fn csv_header() -> &'static str {
        "mode,p,theta,t_end,lhs,source_term,remainder_term,implied_constant,rhs"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.mode.name(),
            self.p,
            self.theta,
            self.t_end,
            self.lhs,
            self.source_term,
            self.remainder_term,
            self.implied_constant,
            self.rhs
        )
    }
}

/// Compare the discrete sup of `u_+` against the source quadrature (split
/// at `|h| = 1`, conjugate power `theta' = theta/(theta-1)`) and, in local
/// mode, the `u_+` remainder integrals. The grid must contain `B(0,1)` and
/// the solution must store every slice.
pub fn sup_bound_check(
    u: &GridSolution,
    src: &SourceSpec,
    p: f64,
    theta: f64,
    t_end: f64,
    mode: SupBoundMode,
) -> LabResult<SupBoundReport> {
    let grid = &u.grid;
    let d = grid.d;
    if p < 2.0 {
        return Err(LabError::InvalidParameter(format!(
            "sup bounds need p >= 2, got {p}"
        )));
    }
    let theta_max = d as f64 / (d as f64 - 1.0);
    if !(theta > 1.0 && theta < theta_max) {
        return Err(LabError::InvalidParameter(format!(
            "theta must lie in (1, {theta_max}), got {theta}"
        )));
    }
    if grid.half_width < 1.0 {
        return Err(LabError::Incompatible(format!(
            "grid half-width {} does not contain the unit ball",
            grid.half_width
        )));
    }
    src.validate(grid)?;
    if !u.dense_in_time() {
        return Err(LabError::Incompatible(
            "sup-bound quadrature needs every slice: solve with store_every = 1".into(),
        ));
    }
    let tol = 1e-9 * (1.0 + grid.t_end);
    if t_end > *u.times.last().unwrap() + tol {
        return Err(LabError::InvalidParameter(format!(
            "t_end={t_end} exceeds the stored horizon {}",
            u.times.last().unwrap()
        )));
    }
    let kt = u
        .times
        .iter()
        .rposition(|&tk| tk <= t_end + tol)
        .unwrap_or(0);
    if kt == 0 {
        return Err(LabError::InvalidParameter(
            "t_end must cover at least one time step".into(),
        ));
    }
    let theta_conj = theta / (theta - 1.0);
    let nodes = grid.node_count();
    let vol = grid.cell_volume();

    // node geometry shared by every term
    let mut radius2 = vec![0.0; nodes];
    let mut coords = vec![0.0; nodes * d];
    grid.for_each_node(|flat, _, x| {
        radius2[flat] = x.iter().map(|v| v * v).sum();
        coords[flat * d..(flat + 1) * d].copy_from_slice(x);
    });
    let in_unit_ball: Vec<bool> = radius2.iter().map(|&r2| r2 <= 1.0 + 1e-10).collect();
    let in_half_ball: Vec<bool> = radius2.iter().map(|&r2| r2 <= 0.25 + 1e-10).collect();

    // time-collapsed source density G(x) = int (split)^{theta'} |f|^{p theta'}
    let mut source_density = vec![0.0; nodes];
    for (k, tk) in u.times.iter().enumerate().take(kt + 1).skip(1) {
        let _ = k;
        for i in 0..nodes {
            let fv = src.f.eval(&coords[i * d..(i + 1) * d]).abs();
            if fv == 0.0 {
                continue;
            }
            let split = match &src.h_field {
                None => 1.0,
                Some(h) => {
                    let m = h.magnitude(*tk, radius2[i].sqrt());
                    if m >= 1.0 {
                        1.0
                    } else {
                        m.powf(p)
                    }
                }
            };
            source_density[i] +=
                grid.tau * split.powf(theta_conj) * fv.powf(p * theta_conj);
        }
    }

    // sup of u_+ over the mode's region, and the u_+ remainder integrals
    let mut lhs = 0.0f64;
    let mut u_p = 0.0;
    let mut u_ptheta = 0.0;
    for (k, slice) in u.slices.iter().enumerate().take(kt + 1) {
        for i in 0..nodes {
            let pos = slice[i].max(0.0);
            let in_region = match mode {
                SupBoundMode::LocalBall => in_half_ball[i],
                SupBoundMode::WeightedGlobal => true,
            };
            if in_region {
                lhs = lhs.max(pos);
            }
            if k > 0 && in_unit_ball[i] && pos > 0.0 {
                u_p += pos.powf(p);
                u_ptheta += pos.powf(p * theta);
            }
        }
    }
    u_p *= grid.tau * vol;
    u_ptheta *= grid.tau * vol;

    let (source_term, remainder_term, best_translate) = match mode {
        SupBoundMode::LocalBall => {
            let h_int: f64 = source_density
                .iter()
                .zip(&in_unit_ball)
                .filter(|(_, inside)| **inside)
                .map(|(g, _)| g)
                .sum::<f64>()
                * vol;
            let source = 2.0 * h_int.powf(1.0 / (p * theta_conj));
            let remainder = (u_p + u_ptheta.powf(1.0 / theta)).powf(1.0 / p);
            (source, remainder, None)
        }
        SupBoundMode::WeightedGlobal => {
            let weight = Weight::standard(d)?;
            let reach = grid.half_width.floor() as i64;
            let mut best = 0.0f64;
            let mut best_z = vec![0i64; d];
            let mut z = vec![-reach; d];
            loop {
                let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
                let rho_z = weight.translated(&zf)?;
                let mut acc = 0.0;
                for i in 0..nodes {
                    if source_density[i] > 0.0 {
                        let w = rho_z.eval(&coords[i * d..(i + 1) * d]);
                        acc += source_density[i] * w * w;
                    }
                }
                if acc > best {
                    best = acc;
                    best_z.copy_from_slice(&z);
                }
                // odometer over the translate box
                let mut axis = d;
                while axis > 0 {
                    axis -= 1;
                    z[axis] += 1;
                    if z[axis] <= reach {
                        break;
                    }
                    z[axis] = -reach;
                    if axis == 0 {
                        axis = usize::MAX;
                        break;
                    }
                }
                if axis == usize::MAX {
                    break;
                }
            }
            let source = (best * vol).powf(1.0 / (p * theta_conj));
            (source, 0.0, Some(best_z))
        }
    };

    let bracket = source_term + remainder_term;
    let implied_constant = if lhs == 0.0 {
        0.0
    } else if bracket > 0.0 {
        lhs / bracket
    } else {
        f64::INFINITY
    };
    let k_hat = if remainder_term > 0.0 {
        (lhs - source_term).max(0.0) / remainder_term
    } else {
        0.0
    };
    let rhs = source_term + k_hat * remainder_term;
    Ok(SupBoundReport {
        mode,
        p,
        theta,
        theta_conj,
        t_end,
        lhs,
        source_term,
        remainder_term,
        implied_constant,
        rhs,
        best_translate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{mollify, DriftField, MollificationSchedule};
    use crate::grid::{Grid, ScalarSpec};
    use num_traits::ToPrimitive;
    use crate::solver::{solve_cauchy, SolveOptions};
    use approx::assert_relative_eq;

    #[test]
    fn threshold_start_rides_the_exact_orbit() {
        // N=1, C0=2, alpha=1: threshold 1/2, orbit 2^{-(m+1)}; every step
        // is a power of two, so f64 is exact here
        let seq = dg_iterate(1.0, 2.0, 1.0, 0.5, 60).unwrap();
        assert_eq!(seq.threshold, 0.5);
        assert!(seq.below_threshold);
        assert!(seq.converged);
        assert!(!seq.diverged);
        for (m, y) in seq.y.iter().enumerate().take(40) {
            assert_eq!(*y, 2f64.powi(-(m as i32) - 1));
        }
    }

    #[test]
    fn zero_start_stays_identically_zero() {
        let seq = dg_iterate(3.0, 5.0, 0.7, 0.0, 300).unwrap();
        assert!(seq.y.iter().all(|&y| y == 0.0));
        assert!(seq.converged && !seq.diverged);
    }

    #[test]
    fn witnessed_divergent_start_matches_exact_digits_then_overflows() {
        let seq = dg_iterate(1.0, 2.0, 1.0, 0.6, 60).unwrap();
        assert!(!seq.below_threshold);
        assert!(!seq.converged);
        // exact rational mirror: y0 = 3/5, y_{m+1} = 2^m y_m^2
        let mut exact = big_ratio(3, 5);
        let mut pow2 = BigRational::one();
        for (m, y) in seq.y.iter().enumerate().take(8) {
            if m > 0 {
                let next = &pow2 * &exact * &exact;
                exact = next;
                pow2 *= big_ratio(2, 1);
            }
            assert_relative_eq!(*y, exact.to_f64().unwrap(), max_relative = 1e-12);
        }
        assert!(seq.y[5] > 1.0, "y5 = {} should exceed 1", seq.y[5]);
        assert!(seq.diverged);
        let idx = seq.blowup_index.unwrap();
        assert!(!seq.y[idx].is_finite());
        assert_eq!(seq.y.len(), idx + 1);
        assert!(seq.y[idx - 1].is_finite());
    }

    #[test]
    fn exact_scan_converges_on_a_small_sublattice() {
        let scan = exact_threshold_scan(
            &[(1, 4), (1, 1), (8, 1)],
            &[(3, 2), (3, 1), (8, 1)],
            &[1, 3, 10],
            200,
        )
        .unwrap();
        assert_eq!(scan.instances, 27);
        assert!(scan.all_converged);
        assert_eq!(scan.closed_form_mismatches, 0);
        assert!(scan.max_steps <= 200);
    }

    #[test]
    fn strictly_subthreshold_floating_runs_collapse() {
        for &(n, c0, alpha) in &[(0.25, 1.5, 1.0), (4.0, 8.0, 0.5), (1.0, 2.0, 0.1)] {
            let thr = iteration_threshold(n, c0, alpha);
            for frac in [0.999, 0.5] {
                let seq = dg_iterate(n, c0, alpha, frac * thr, 200).unwrap();
                assert!(
                    seq.converged,
                    "({n},{c0},{alpha}) at {frac}*threshold did not converge"
                );
            }
        }
    }

    #[test]
    fn composed_chain_matches_the_single_recurrence() {
        let (c, c4, alpha, p, big_m, u0) = (0.7, 3.0, 1.0, 2.0, 4.0, 0.3);
        let chain = chain_sequence(c, c4, alpha, p, big_m, u0, 12);
        let (n, c0) = chain_equivalent_params(c, c4, alpha, p, big_m);
        let seq = dg_iterate(n, c0, alpha, u0, 12).unwrap();
        for (a, b) in chain.iter().zip(&seq.y) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        // exact mirror at alpha = 1, p = 2: U_{m+1} = c C4^m (2^{m+1}/M)^2 U_m^2
        // versus y_{m+1} = (4c/M^2) (4 C4)^m y_m^2
        let (cr, c4r, mr, u0r) =
            (big_ratio(7, 10), big_ratio(3, 1), big_ratio(4, 1), big_ratio(3, 10));
        let mut u = u0r.clone();
        let mut y = u0r;
        let mut c4_pow = BigRational::one();
        let nr = big_ratio(4, 1) * &cr / (&mr * &mr);
        let c0r = big_ratio(4, 1) * &c4r;
        let mut c0_pow = BigRational::one();
        let two = big_ratio(2, 1);
        let mut two_pow = two.clone(); // 2^{m+1}
        for _ in 0..12 {
            let level = (&two_pow / &mr) * (&two_pow / &mr) * &u;
            u = &cr * &c4_pow * &u * level;
            y = &nr * &c0_pow * &y * &y;
            assert_eq!(u, y);
            c4_pow *= &c4r;
            c0_pow *= &c0r;
            two_pow *= &two;
        }
    }

    fn solved_for_supbound(delta: f64, n: u32) -> (GridSolution, SourceSpec) {
        let base = DriftField::inverse_square(3, delta).unwrap();
        let b = mollify(&base, MollificationSchedule::standard(n).unwrap()).unwrap();
        let grid = Grid::new(3, 2.0, 0.25, 0.02, 0.1).unwrap();
        let src = SourceSpec {
            h_field: Some(b.clone()),
            f: ScalarSpec::Bump { center: vec![0.0; 3], radius: 1.0, amplitude: 1.0 },
        };
        let sol = solve_cauchy(Some(&b), &src, &grid, &SolveOptions::default()).unwrap();
        (sol, src)
    }

    #[test]
    fn zero_solution_reports_zero_implied_constant() {
        let grid = Grid::new(3, 2.0, 0.25, 0.02, 0.1).unwrap();
        let src = SourceSpec {
            h_field: None,
            f: ScalarSpec::Bump { center: vec![0.0; 3], radius: 1.0, amplitude: 1.0 },
        };
        let zero = GridSolution::from_function(&grid, 1, |_, _| 0.0);
        for mode in [SupBoundMode::LocalBall, SupBoundMode::WeightedGlobal] {
            let rep = sup_bound_check(&zero, &src, 2.5, 1.2, 0.1, mode).unwrap();
            assert_eq!(rep.lhs, 0.0);
            assert_eq!(rep.implied_constant, 0.0);
            assert!(rep.lhs <= rep.rhs);
        }
    }

    #[test]
    fn solved_instance_reports_finite_constants_in_both_modes() {
        let (sol, src) = solved_for_supbound(1.0, 8);
        let theta = default_theta(3);
        assert_relative_eq!(theta, 1.25);
        for mode in [SupBoundMode::LocalBall, SupBoundMode::WeightedGlobal] {
            let rep = sup_bound_check(&sol, &src, 2.5, theta, 0.1, mode).unwrap();
            assert!(rep.lhs > 0.0);
            assert!(rep.implied_constant.is_finite() && rep.implied_constant > 0.0);
            assert!(rep.lhs <= rep.rhs * (1.0 + 1e-12));
            if mode == SupBoundMode::WeightedGlobal {
                assert_eq!(rep.best_translate.as_deref(), Some(&[0i64, 0, 0][..]));
            }
        }
    }

    #[test]
    fn geometry_and_range_violations_are_rejected() {
        let (sol, src) = solved_for_supbound(1.0, 4);
        // theta at and beyond the endpoint
        for theta in [1.0, 1.5, 2.0] {
            assert!(matches!(
                sup_bound_check(&sol, &src, 2.5, theta, 0.1, SupBoundMode::LocalBall),
                Err(LabError::InvalidParameter(_))
            ));
        }
        assert!(matches!(
            sup_bound_check(&sol, &src, 1.5, 1.2, 0.1, SupBoundMode::LocalBall),
            Err(LabError::InvalidParameter(_))
        ));
        // grid too small for the unit ball (bypasses the constructor, which
        // already refuses such boxes)
        let tiny = Grid { d: 2, half_width: 0.75, h: 0.25, tau: 0.02, t_end: 0.04 };
        let src2 = SourceSpec { h_field: None, f: ScalarSpec::Constant(1.0) };
        let zero = GridSolution::from_function(&tiny, 1, |_, _| 0.0);
        assert!(matches!(
            sup_bound_check(&zero, &src2, 2.0, 1.2, 0.04, SupBoundMode::LocalBall),
            Err(LabError::Incompatible(_))
        ));
    }
}
