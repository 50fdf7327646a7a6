//! Grid-refinement benchmark of the implicit-Euler solver against the
//! heat-kernel quadrature with zero drift: relative max-norm error on the
//! unit ball along a `(h, tau = h^2)` ladder, plus the fitted convergence
//! order. Flags: --d (default 3), --t-end, --sigma.

use singular_sde_lab::{
    heat_initial_solution, heat_source_solution, linear_fit, solve_cauchy, Grid, ScalarSpec,
    SolveOptions, SourceSpec,
};

fn parse_flag<T: std::str::FromStr>(args: &[String], name: &str, default: T) -> T {
    let prefix = format!("--{name}=");
    for (i, a) in args.iter().enumerate() {
        if let Some(v) = a.strip_prefix(&prefix) {
            return v.parse().unwrap_or_else(|_| panic!("bad value for --{name}: {v}"));
        }
        if a == &format!("--{name}") {
            if let Some(v) = args.get(i + 1) {
                return v
                    .parse()
                    .unwrap_or_else(|_| panic!("bad value for --{name}: {v}"));
            }
        }
    }
    default
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d: usize = parse_flag(&args, "d", 3);
    let t_end: f64 = parse_flag(&args, "t-end", 0.08);
    let sigma: f64 = parse_flag(&args, "sigma", 0.55);

    let initial = ScalarSpec::Gaussian { center: vec![0.0; d], sigma, amplitude: 1.0 };
    let f = ScalarSpec::Bump { center: vec![0.0; d], radius: 0.8, amplitude: 1.0 };
    let src = SourceSpec { h_field: None, f: f.clone() };
    let ladder = [(0.2, 0.04), (0.1, 0.01), (0.05, 0.0025)];
    let mut errors = Vec::new();
    println!("h,tau,rel_linf,seconds");
    for &(h, tau) in &ladder {
        let start = std::time::Instant::now();
        let grid = Grid::new(d, 2.0, h, tau, t_end).unwrap();
        let steps = (t_end / tau).round() as usize;
        let opts = SolveOptions {
            store_every: steps,
            initial: Some(initial.clone()),
            ..SolveOptions::default()
        };
        let u = solve_cauchy(None, &src, &grid, &opts).unwrap();
        let mut reference = heat_initial_solution(&grid, &initial, t_end, None).unwrap();
        let forced = heat_source_solution(&grid, &f, t_end, None).unwrap();
        for (r, s) in reference.iter_mut().zip(&forced) {
            *r += *s;
        }
        let numeric = u.final_slice();
        let (mut num, mut den) = (0.0f64, 0.0f64);
        grid.for_each_node(|flat, _, x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if r2 <= 1.0 + 1e-10 {
                num = num.max((numeric[flat] - reference[flat]).abs());
                den = den.max(reference[flat].abs());
            }
        });
        let rel = num / den;
        println!("{h},{tau},{rel:.6e},{:.1}", start.elapsed().as_secs_f64());
        errors.push(rel);
    }
    let xs: Vec<f64> = ladder.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (order, _, _) = linear_fit(&xs, &ys);
    println!("# observed order in h: {order:.2}");
}
