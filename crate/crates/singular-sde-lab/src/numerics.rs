//! Small numerical building blocks shared across modules: Gauss-Legendre
//! rules, sphere areas, compensated summation, linear regression.

/// Surface area of the unit sphere `S^m` embedded in `R^{m+1}`.
///
/// Closed forms for the dimensions this crate uses (ambient dimension <= 6).
pub fn sphere_surface(m: usize) -> f64 {
    use std::f64::consts::PI;
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        2 => 4.0 * PI,
        3 => 2.0 * PI * PI,
        4 => 8.0 * PI * PI / 3.0,
        5 => PI * PI * PI,
        _ => panic!("sphere_surface: unsupported dimension {m}"),
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Newton iteration on the Legendre recurrence; deterministic and accurate to
/// machine precision for the small orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = (n as f64) * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Map a Gauss-Legendre rule onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

/// Pairwise (cascade) summation: order-independent grouping error O(log n)
/// instead of O(n), and deterministic for a fixed slice.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    assert!(n >= 2, "need at least two samples");
    let mean = pairwise_sum(v) / n as f64;
    let sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Ordinary least squares fit `y ~ slope * x + intercept`, plus R^2.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = pairwise_sum(xs) / n;
    let my = pairwise_sum(ys) / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Linear interpolation into a uniformly spaced table starting at 0 with
/// spacing `step`; clamps to the last entry beyond the table.
#[inline]
pub fn lerp_table(table: &[f64], step: f64, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    let pos = x / step;
    let i = pos as usize;
    if i + 1 >= table.len() {
        return *table.last().unwrap();
    }
    let frac = pos - i as f64;
    table[i] * (1.0 - frac) + table[i + 1] * frac
}

/// Two-sided 95% normal-approximation half-width for a binomial proportion.
pub fn binomial_ci95(p_hat: f64, m: usize) -> f64 {
    1.96 * (p_hat * (1.0 - p_hat) / m as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // An n-point rule is exact through degree 2n-1.
        let (xs, ws) = gauss_legendre(5);
        let integral: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(8)).sum();
        assert_relative_eq!(integral, 2.0 / 9.0, max_relative = 1e-13);
        let odd: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(7)).sum();
        assert!(odd.abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_on_interval() {
        let (xs, ws) = gauss_legendre_on(8, 0.0, 2.0);
        let integral: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x * x).sum();
        assert_relative_eq!(integral, 8.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn sphere_surfaces_match_closed_forms() {
        assert_relative_eq!(sphere_surface(1), 2.0 * std::f64::consts::PI);
        assert_relative_eq!(sphere_surface(2), 4.0 * std::f64::consts::PI);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v = [1.0, 2.0, 3.0, 4.5];
        assert_eq!(pairwise_sum(&v), 10.5);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (slope, intercept, r2) = linear_fit(&xs, &ys);
        assert_relative_eq!(slope, 2.0, max_relative = 1e-12);
        assert_relative_eq!(intercept, 1.0, max_relative = 1e-12);
        assert_relative_eq!(r2, 1.0, max_relative = 1e-12);
    }
}
