//! Occupation statistics along simulated paths for a mollified
//! inverse-square drift: the windowed pairing of drift mass against the
//! weighted gradient norm, the scaling of the occupation integral with
//! window length, and the decay of the mollifier-difference occupation —
//! the three Monte Carlo views of the compactness mechanism.

use singular_sde_lab::{
    default_theta, drift_integral_scaling, krylov_statistic, mollify, simulate, DriftField,
    KrylovPair, MollificationSchedule, ScalarField, TestFunction, Weight,
};

fn main() {
    let base = DriftField::inverse_square(3, 1.0).unwrap();
    let b8 = mollify(&base, MollificationSchedule::standard(8).unwrap()).unwrap();
    let ens = simulate(&b8, &[0.5, 0.0, 0.0], 1e-3, 1.0, 2_000, 20_260_816).unwrap();
    let weight = Weight::standard(3).unwrap();
    let (p, theta) = (2.5, default_theta(3));

    println!("{}", KrylovPair::csv_header());
    for (t0, t1) in [(0.0, 0.25), (0.0, 0.5), (0.25, 0.75)] {
        let pair =
            krylov_statistic(&ens, &b8, &ScalarField::one(), p, theta, t0, t1, &weight).unwrap();
        println!("{}", pair.csv_row());
    }

    let windows = [(0.0, 0.125), (0.0, 0.25), (0.0, 0.5), (0.0, 1.0)];
    let fit = drift_integral_scaling(&ens, &b8, &windows).unwrap();
    println!(
        "# occupation ~ length^mu: mu_hat = {:.3}, R^2 = {:.4}",
        fit.mu_hat, fit.r2
    );

    let phi = TestFunction::radial_bump(3, 1.5, 1.0).unwrap();
    let f_grad = ScalarField::grad_of(&phi);
    println!("m,difference_occupation");
    for m in [4u32, 8, 16, 32] {
        let b_m = mollify(&base, MollificationSchedule::standard(m).unwrap()).unwrap();
        let b_2m = mollify(&base, MollificationSchedule::standard(2 * m).unwrap()).unwrap();
        let diff = DriftField::difference(b_m, b_2m).unwrap();
        let pair = krylov_statistic(&ens, &diff, &f_grad, p, theta, 0.0, 0.5, &weight).unwrap();
        println!("{m},{:.6e}", pair.lhs);
    }
}
