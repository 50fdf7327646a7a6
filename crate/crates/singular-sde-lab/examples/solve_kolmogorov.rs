//! Solve the drifted Cauchy problem on a grid and round-trip the solution
//! through the KGSOL1 binary format, checking that every stored slice
//! survives bit for bit.

use singular_sde_lab::{
    mollify, solve_cauchy, DriftEval, DriftField, Grid, GridSolution, MollificationSchedule,
    ScalarSpec, SolveOptions, SourceSpec,
};

fn main() {
    let base = DriftField::inverse_square(3, 1.0).unwrap();
    let b = mollify(&base, MollificationSchedule::standard(8).unwrap()).unwrap();
    let grid = Grid::new(3, 2.0, 0.1, 0.01, 0.1).unwrap();
    let src = SourceSpec {
        h_field: Some(b.clone()),
        f: ScalarSpec::Bump { center: vec![0.0; 3], radius: 1.0, amplitude: 1.0 },
    };
    let opts = SolveOptions {
        store_every: 1,
        initial: Some(ScalarSpec::unit_bump(3)),
        ..SolveOptions::default()
    };
    let start = std::time::Instant::now();
    let u = solve_cauchy(Some(&b as &dyn DriftEval), &src, &grid, &opts).unwrap();
    println!(
        "solved: {} nodes x {} slices, max |u| = {:.6e} ({:.1} s)",
        grid.node_count(),
        u.times.len(),
        u.max_abs(),
        start.elapsed().as_secs_f64()
    );
    for w in &u.warnings {
        println!("warning: {w}");
    }

    let mut bytes = Vec::new();
    u.write_binary(&mut bytes).unwrap();
    println!("KGSOL1 blob: {} bytes", bytes.len());
    let back = GridSolution::read_binary(bytes.as_slice()).unwrap();
    assert_eq!(back.times, u.times, "time axis must round-trip");
    assert_eq!(back.slices, u.slices, "slices must round-trip bit for bit");
    println!("round-trip: OK ({} slices verified)", back.times.len());
}
