//! Orbits of the recurrence `y_{m+1} = N C0^m y_m^{1+alpha}` around its
//! convergence threshold `y* = N^{-1/alpha} C0^{-1/alpha^2}`.
//!
//! Floating point cannot ride the threshold orbit itself — a relative
//! start deviation grows by `(1 + alpha)` per step, so even 1 ulp at y*
//! erupts after a few hundred steps; the exact-arithmetic scan is the
//! honest check there. This example shows both: nearby f64 starts split
//! cleanly, and the exact lattice scan confirms every on-threshold orbit
//! contracts.

use singular_sde_lab::{dg_iterate, exact_threshold_scan, iteration_threshold};

fn main() {
    let (n, c0, alpha) = (1.0, 2.0, 1.0);
    let y_star = iteration_threshold(n, c0, alpha);
    println!("N={n} C0={c0} alpha={alpha}: threshold y* = {y_star:.12e}");
    println!("start,outcome,first_exceed_or_converge_step");
    for factor in [0.5, 0.9, 0.99, 1.01, 1.2] {
        let y0 = factor * y_star;
        let seq = dg_iterate(n, c0, alpha, y0, 400).unwrap();
        let (outcome, step) = if seq.converged {
            let k = seq.y.iter().position(|y| *y < 1e-12).unwrap_or(seq.y.len() - 1);
            ("converges", k)
        } else if seq.diverged {
            let k = seq.y.iter().position(|y| *y > 1.0).unwrap_or(seq.y.len() - 1);
            ("diverges", k)
        } else {
            ("undecided", seq.y.len() - 1)
        };
        println!("{y0:.6e},{outcome},{step}");
    }

    let ns: [(u64, u64); 3] = [(1, 2), (1, 1), (3, 1)];
    let c0s: [(u64, u64); 3] = [(3, 2), (2, 1), (5, 1)];
    let ks: [u32; 3] = [1, 2, 5];
    let scan = exact_threshold_scan(&ns, &c0s, &ks, 200).unwrap();
    println!(
        "exact scan: {} instances, all converged = {}, slowest = {} step(s), \
         closed-form mismatches = {}",
        scan.instances, scan.all_converged, scan.max_steps, scan.closed_form_mismatches
    );
}
