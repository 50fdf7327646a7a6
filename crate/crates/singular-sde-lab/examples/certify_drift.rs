//! Form-bound certificates for a small gallery of drift fields: the
//! analytic bound where one exists, then the Rayleigh-quotient estimate
//! at increasing refinement levels, so the numeric machinery can be read
//! against closed forms at a glance.

use singular_sde_lab::{analytic_certificate, certify_refined, DriftField, FormBoundCertificate};

fn main() {
    let fields = vec![
        DriftField::inverse_square(3, 0.25).unwrap(),
        DriftField::inverse_square(3, 1.0).unwrap(),
        DriftField::inverse_square(3, 2.25).unwrap(),
        DriftField::lps_power(3, 0.5, 0.4).unwrap(),
        DriftField::bounded_smooth(3, 1.5).unwrap(),
    ];
    println!("{}", FormBoundCertificate::csv_header());
    for field in &fields {
        if let Some(cert) = analytic_certificate(field) {
            println!("{}", cert.csv_row());
        }
        match certify_refined(field, 3) {
            Ok(certs) => {
                for cert in &certs {
                    println!("{}", cert.csv_row());
                }
                if let (Some(analytic), Some(numeric)) =
                    (analytic_certificate(field), certs.last())
                {
                    let rel = (numeric.delta - analytic.delta).abs() / analytic.delta.max(1e-300);
                    println!("# {field}: numeric within {:.2}% of analytic", rel * 1e2);
                }
            }
            Err(e) => println!("# {field}: no numeric certificate ({e})"),
        }
    }
}
