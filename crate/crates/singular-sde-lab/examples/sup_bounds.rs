//! Local-ball and weighted-global sup bounds for solved problems across
//! mollification levels and coupling strengths: the implied constants
//! should stay in a narrow band as the regularization is refined — that
//! uniformity is the whole point of the estimate.

use singular_sde_lab::{
    default_theta, mollify, solve_cauchy, sup_bound_check, DriftEval, DriftField, Grid,
    MollificationSchedule, ScalarSpec, SolveOptions, SourceSpec, SupBoundMode, SupBoundReport,
};

fn main() {
    let p = 2.5;
    let theta = default_theta(3);
    println!("delta,n,{}", SupBoundReport::csv_header());
    for (delta, n) in [(1.0, 4u32), (1.0, 8), (1.0, 16), (0.5, 8), (2.0, 8)] {
        let base = DriftField::inverse_square(3, delta).unwrap();
        let b = mollify(&base, MollificationSchedule::standard(n).unwrap()).unwrap();
        let grid = Grid::new(3, 2.0, 0.2, 0.02, 0.1).unwrap();
        let src = SourceSpec {
            h_field: Some(b.clone()),
            f: ScalarSpec::Bump { center: vec![0.0; 3], radius: 1.0, amplitude: 1.0 },
        };
        let opts = SolveOptions {
            store_every: 1,
            initial: Some(ScalarSpec::unit_bump(3)),
            ..SolveOptions::default()
        };
        let u = solve_cauchy(Some(&b as &dyn DriftEval), &src, &grid, &opts).unwrap();
        for mode in [SupBoundMode::LocalBall, SupBoundMode::WeightedGlobal] {
            let report = sup_bound_check(&u, &src, p, theta, 0.1, mode).unwrap();
            println!("{delta},{n},{}", report.csv_row());
        }
    }
}
