//! Martingale defect of a compactly supported C^2 test function along
//! simulated paths: for a drift the generator knows about, the
//! compensated process has mean zero, so the defect must sit inside its
//! Monte Carlo error bars. Reduced sizes by default; raise --m for the
//! acceptance-scale run.

use singular_sde_lab::{
    martingale_defect, mollify, simulate, DriftField, GFunctional, MollificationSchedule,
    TestFunction,
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
    let m: usize = parse_flag(&args, "m", 20_000);
    let dt: f64 = parse_flag(&args, "dt", 2e-4);
    let seed: u64 = parse_flag(&args, "seed", 20_260_816);

    let phi = TestFunction::radial_bump(3, 1.5, 1.0).unwrap();
    let (t0, t1) = (0.05, 0.2);
    println!("case,defect,stderr,|defect|/stderr");
    let cases = vec![
        ("zero", DriftField::zero(3).unwrap()),
        ("bounded-smooth", DriftField::bounded_smooth(3, 1.5).unwrap()),
        (
            "mollified-inverse-square",
            mollify(
                &DriftField::inverse_square(3, 1.0).unwrap(),
                MollificationSchedule::standard(8).unwrap(),
            )
            .unwrap(),
        ),
    ];
    for (label, field) in cases {
        let ens = simulate(&field, &[0.3, 0.0, 0.0], dt, 0.2, m, seed).unwrap();
        let d = martingale_defect(&ens, &phi, &field, t0, t1, GFunctional::One).unwrap();
        println!(
            "{label},{:.6e},{:.6e},{:.2}",
            d.defect,
            d.stderr,
            d.defect.abs() / d.stderr
        );
    }
}
