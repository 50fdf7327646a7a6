//! Grid-refinement study of the implicit-Euler solver against the
//! heat-kernel quadrature, small enough to run in the regular test cycle
//! (the three-dimensional version is criterion 3 of the acceptance
//! suite). Also pins the drifted variant: a constant drift enters the
//! kernel as a translation, which the upwind discretization must track
//! at first order.

use singular_sde_lab::{
    heat_initial_solution, linear_fit, solve_cauchy, ConstantDrift, Grid, ScalarSpec,
    SolveOptions, SourceSpec,
};

fn rel_linf_on_unit_ball(grid: &Grid, numeric: &[f64], reference: &[f64]) -> f64 {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    grid.for_each_node(|flat, _, x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 <= 1.0 + 1e-10 {
            num = num.max((numeric[flat] - reference[flat]).abs());
            den = den.max(reference[flat].abs());
        }
    });
    num / den
}

#[test]
fn driftless_solution_converges_to_the_kernel_quadrature_in_2d() {
    let d = 2;
    let t_end = 0.08;
    let g = ScalarSpec::Gaussian { center: vec![0.0; d], sigma: 0.55, amplitude: 1.0 };
    let src = SourceSpec { h_field: None, f: ScalarSpec::Constant(0.0) };
    let mut errors = Vec::new();
    let ladder = [(0.2, 0.04), (0.1, 0.01), (0.05, 0.0025)];
    for &(h, tau) in &ladder {
        let grid = Grid::new(d, 2.0, h, tau, t_end).unwrap();
        let steps = (t_end / tau).round() as usize;
        let opts = SolveOptions {
            store_every: steps,
            initial: Some(g.clone()),
            ..SolveOptions::default()
        };
        let u = solve_cauchy(None, &src, &grid, &opts).unwrap();
        assert!(u.warnings.is_empty(), "warnings: {:?}", u.warnings);
        let reference = heat_initial_solution(&grid, &g, t_end, None).unwrap();
        errors.push(rel_linf_on_unit_ball(&grid, u.final_slice(), &reference));
    }
    assert!(errors[2] <= 5e-3, "finest error {:.3e}", errors[2]);
    let xs: Vec<f64> = ladder.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (order, _, _) = linear_fit(&xs, &ys);
    assert!(order >= 1.5, "observed order {order:.2} (errors {errors:?})");
}

#[test]
fn constant_drift_translates_the_profile_at_first_order() {
    let d = 2;
    let t_end = 0.05;
    let g = ScalarSpec::Gaussian { center: vec![0.0; d], sigma: 0.35, amplitude: 1.0 };
    let src = SourceSpec { h_field: None, f: ScalarSpec::Constant(0.0) };
    let constant = vec![0.8, -0.4];
    let drift = ConstantDrift(constant.clone());
    let mut errors = Vec::new();
    let ladder = [(0.1, 0.005), (0.05, 0.0025)];
    for &(h, tau) in &ladder {
        let grid = Grid::new(d, 2.0, h, tau, t_end).unwrap();
        let steps = (t_end / tau).round() as usize;
        let opts = SolveOptions {
            store_every: steps,
            initial: Some(g.clone()),
            ..SolveOptions::default()
        };
        let u = solve_cauchy(Some(&drift), &src, &grid, &opts).unwrap();
        let reference = heat_initial_solution(&grid, &g, t_end, Some(&constant)).unwrap();
        errors.push(rel_linf_on_unit_ball(&grid, u.final_slice(), &reference));
    }
    // upwind advection is first order: halving (h, tau) should at least
    // halve the error, and the fine level must be usably accurate
    assert!(errors[1] <= errors[0] / 1.7, "errors {errors:?}");
    assert!(errors[1] <= 2e-2, "fine error {:.3e}", errors[1]);
}
