//! Cutoff functions, decaying weights, and level schedules: the geometric
//! ingredients of the iteration machinery.
//!
//! * `CutoffFamily` is the radial transition `eta_{r,R}`: identically 1 on
//!   `B(0,r)`, 0 outside `B(0,R)`, gradient bounded by `(c0/4)(R-r)^{-1}`.
//!   The profile is the quintic smoothstep `6z^5 - 15z^4 + 10z^3` (a C^2
//!   transition whose steepest slope is exactly `15/8`), so `c0 = 7.5` is
//!   *computed* from the profile, not assumed.
//! * `Weight` is `rho(x) = (1 + kappa |x|^2)^{-beta}`, the polynomially
//!   decaying weight with `|grad rho| <= beta sqrt(kappa) rho` everywhere.
//! * `LevelSchedule` tabulates the shrinking balls `R_m = (1/2)(1+2^{-m})`
//!   and rising levels `M_m = M(2 - 2^{-m})` that drive the iteration, with
//!   the cutoff gradient bound `c0 2^m` for the transition between
//!   consecutive balls.

use crate::error::{LabError, LabResult};

/// Steepest slope of the quintic smoothstep, times 4: the `c0` in the
/// gradient bound `|grad eta| <= (c0/4)(R-r)^{-1}`.
pub const CUTOFF_C0: f64 = 7.5;

/// Quintic smoothstep: 0 for z<=0, 1 for z>=1, `6z^5-15z^4+10z^3` between.
/// C^2 at both ends; maximum slope 15/8 at z = 1/2.
pub fn smoothstep(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        z * z * z * (10.0 + z * (-15.0 + 6.0 * z))
    }
}

fn smoothstep_slope(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        30.0 * z * z * (1.0 - z) * (1.0 - z)
    }
}

/// Radial cutoff `eta_{r,R}`: 1 on `B(0,r)`, 0 outside `B(0,R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffFamily {
    pub r: f64,
    pub big_r: f64,
}

impl CutoffFamily {
    pub fn new(r: f64, big_r: f64) -> LabResult<Self> {
        if !(r > 0.0) || !(big_r > r) || !big_r.is_finite() {
            return Err(LabError::InvalidParameter(format!(
                "cutoff radii must satisfy 0 < r < R, got r={r}, R={big_r}"
            )));
        }
        Ok(CutoffFamily { r, big_r })
    }

    /// Value at radius `s >= 0`.
    pub fn eval_radius(&self, s: f64) -> f64 {
        smoothstep((self.big_r - s) / (self.big_r - self.r))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_radius(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Analytic gradient (radial chain rule); zero at the origin.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let s = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if s == 0.0 {
            out.fill(0.0);
            return;
        }
        let w = self.big_r - self.r;
        let slope = -smoothstep_slope((self.big_r - s) / w) / w;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = slope * xi / s;
        }
    }

    /// The proven bound `sup |grad eta| = (c0/4)(R-r)^{-1}` with c0 = 7.5.
    pub fn gradient_bound(&self) -> f64 {
        CUTOFF_C0 / 4.0 / (self.big_r - self.r)
    }
}

/// Polynomially decaying weight `rho(x) = (1 + kappa |x - z|^2)^{-beta}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    pub d: usize,
    pub kappa: f64,
    pub beta: f64,
    /// lattice translate z (origin for the plain weight)
    pub center: Vec<f64>,
}

impl Weight {
    /// Defaults: `kappa = 0.01`, `beta = d/4 + 0.25` (just above the
    /// summability threshold `d/4`).
    pub fn standard(d: usize) -> LabResult<Self> {
        Weight::new(d, 0.01, d as f64 / 4.0 + 0.25, vec![0.0; d])
    }

    pub fn new(d: usize, kappa: f64, beta: f64, center: Vec<f64>) -> LabResult<Self> {
        if d == 0 || !(kappa > 0.0) || !(beta > d as f64 / 4.0) || center.len() != d {
            return Err(LabError::InvalidParameter(format!(
                "weight needs kappa > 0 and beta > d/4, got d={d}, kappa={kappa}, beta={beta}"
            )));
        }
        Ok(Weight { d, kappa, beta, center })
    }

    pub fn translated(&self, z: &[f64]) -> LabResult<Self> {
        Weight::new(self.d, self.kappa, self.beta, z.to_vec())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let q: f64 = x.iter().zip(&self.center).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
        (1.0 + self.kappa * q).powf(-self.beta)
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let q: f64 = x.iter().zip(&self.center).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
        let base = 1.0 + self.kappa * q;
        let factor = -2.0 * self.beta * self.kappa * base.powf(-self.beta - 1.0);
        for ((o, xi), ci) in out.iter_mut().zip(x).zip(&self.center) {
            *o = factor * (xi - ci);
        }
    }

    /// `sup |grad rho| / rho = beta sqrt(kappa)`, attained at
    /// `|x - z| = kappa^{-1/2}`.
    pub fn log_gradient_bound(&self) -> f64 {
        self.beta * self.kappa.sqrt()
    }
}

/// Shrinking balls and rising truncation levels for the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSchedule {
    /// the base sup bound M
    pub m_base: f64,
    /// radii R_m = (1/2)(1 + 2^{-m})
    pub radii: Vec<f64>,
    /// levels M_m = M (2 - 2^{-m})
    pub levels: Vec<f64>,
    /// gradient bounds c0 2^m for the cutoff between B_{m+1} and B_m
    pub gradient_bounds: Vec<f64>,
}

/// Tabulate the schedule for `m = 0..=m_max`.
pub fn level_sequences(m_base: f64, m_max: usize) -> LabResult<LevelSchedule> {
    if !(m_base > 0.0) || !m_base.is_finite() {
        return Err(LabError::InvalidParameter(format!(
            "level schedule needs a positive base sup bound, got {m_base}"
        )));
    }
    let mut radii = Vec::with_capacity(m_max + 1);
    let mut levels = Vec::with_capacity(m_max + 1);
    let mut gradient_bounds = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let pow = (0.5f64).powi(m as i32);
        radii.push(0.5 * (1.0 + pow));
        levels.push(m_base * (2.0 - pow));
        gradient_bounds.push(CUTOFF_C0 * (2.0f64).powi(m as i32));
    }
    Ok(LevelSchedule { m_base, radii, levels, gradient_bounds })
}

impl LevelSchedule {
    /// Cutoff `eta_m` between `B(0, R_{m+1})` and `B(0, R_m)`; its analytic
    /// gradient bound equals the tabulated `c0 2^m` exactly.
    pub fn cutoff(&self, m: usize) -> LabResult<CutoffFamily> {
        if m + 1 >= self.radii.len() {
            return Err(LabError::InvalidParameter(format!(
                "schedule tabulated to m_max={}, asked for cutoff {m}",
                self.radii.len() - 1
            )));
        }
        CutoffFamily::new(self.radii[m + 1], self.radii[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smoothstep_is_a_c2_unit_transition() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(-3.0), 0.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert_relative_eq!(smoothstep(0.5), 0.5);
        // C^2 endpoints: slope and curvature vanish
        let eps = 1e-5;
        for z in [0.0, 1.0] {
            let s0 = smoothstep(z - eps);
            let s1 = smoothstep(z);
            let s2 = smoothstep(z + eps);
            assert!(((s2 - s0) / (2.0 * eps)).abs() < 1e-4);
            assert!(((s2 - 2.0 * s1 + s0) / (eps * eps)).abs() < 1e-2);
        }
        // steepest slope 15/8 at the midpoint
        assert_relative_eq!(smoothstep_slope(0.5), 1.875);
        let max_slope = (0..=1000)
            .map(|i| smoothstep_slope(i as f64 / 1000.0))
            .fold(0.0f64, f64::max);
        assert!(max_slope <= 1.875 + 1e-12);
    }

    #[test]
    fn cutoff_gradient_bound_holds_and_is_sharp_on_a_grid() {
        let eta = CutoffFamily::new(0.5, 1.0).unwrap();
        assert_eq!(eta.eval(&[0.3, 0.2]), 1.0);
        assert_eq!(eta.eval(&[1.2, 0.0]), 0.0);
        let bound = eta.gradient_bound();
        assert_relative_eq!(bound, 3.75); // (7.5/4) / 0.5
        let mut grad = [0.0; 2];
        let mut max_seen = 0.0f64;
        let n = 400;
        for i in 0..=n {
            for j in 0..=n {
                let x = [-1.2 + 2.4 * i as f64 / n as f64, -1.2 + 2.4 * j as f64 / n as f64];
                eta.gradient_into(&x, &mut grad);
                let g = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
                assert!(g <= bound * (1.0 + 1e-12), "gradient {g} exceeds bound {bound}");
                max_seen = max_seen.max(g);
            }
        }
        assert!(max_seen > 0.95 * bound, "bound not sharp: saw {max_seen} vs {bound}");
    }

    #[test]
    fn weight_log_gradient_bound_holds_and_is_sharp() {
        let rho = Weight::standard(3).unwrap();
        assert_eq!(rho.kappa, 0.01);
        assert_relative_eq!(rho.beta, 1.0);
        assert_eq!(rho.eval(&[0.0, 0.0, 0.0]), 1.0);
        let bound = rho.log_gradient_bound();
        assert_relative_eq!(bound, 0.1);
        let mut grad = [0.0; 3];
        let mut max_ratio = 0.0f64;
        for i in 0..2000 {
            let s = 0.02 * i as f64; // radii 0..40 straddle 1/sqrt(kappa)=10
            let x = [s, 0.0, 0.0];
            rho.gradient_into(&x, &mut grad);
            let ratio = grad[0].abs() / rho.eval(&x);
            assert!(ratio <= bound * (1.0 + 1e-12));
            max_ratio = max_ratio.max(ratio);
        }
        assert!(max_ratio > 0.999 * bound, "ratio peak {max_ratio} vs bound {bound}");
        // translated copy is centered at z
        let shifted = rho.translated(&[1.0, 2.0, -1.0]).unwrap();
        assert_eq!(shifted.eval(&[1.0, 2.0, -1.0]), 1.0);
    }

    #[test]
    fn level_schedule_matches_the_closed_forms() {
        let sched = level_sequences(2.0, 8).unwrap();
        assert_relative_eq!(sched.radii[0], 1.0);
        assert_relative_eq!(sched.levels[0], 2.0);
        assert_relative_eq!(sched.radii[3], 0.5625);
        assert_relative_eq!(sched.levels[3], 1.875 * 2.0);
        // monotone approach to the limits (1/2, 2M)
        for m in 1..=8 {
            assert!(sched.radii[m] < sched.radii[m - 1]);
            assert!(sched.levels[m] > sched.levels[m - 1]);
            assert!(sched.radii[m] > 0.5);
            assert!(sched.levels[m] < 2.0 * 2.0);
        }
        assert!(sched.radii[8] - 0.5 < 0.002);
        assert!(4.0 - sched.levels[8] < 0.008);
        // the inter-ball cutoff achieves exactly the tabulated bound
        for m in 0..=6 {
            let eta = sched.cutoff(m).unwrap();
            assert_relative_eq!(eta.gradient_bound(), sched.gradient_bounds[m]);
        }
        assert!(sched.cutoff(8).is_err());
    }

    #[test]
    fn invalid_geometric_parameters_are_rejected() {
        assert!(CutoffFamily::new(1.0, 0.5).is_err());
        assert!(CutoffFamily::new(0.0, 1.0).is_err());
        assert!(Weight::new(3, 0.0, 1.0, vec![0.0; 3]).is_err());
        assert!(Weight::new(3, 0.01, 0.7, vec![0.0; 3]).is_err()); // beta <= d/4
        assert!(level_sequences(0.0, 4).is_err());
    }
}
