//! QR-orthonormalized Lyapunov spectra for the three chaotic models,
//! checked against their closed forms: log 2 for doubling, ±log((3+√5)/2)
//! for the cat map, {1, 0, -1} for the geodesic frame flow.

use ergodyn::lyapunov::{chi_plus, qr_spectrum};
use ergodyn::models::{
    cat_expansion, cat_system, doubling_system, geodesic_system, liouville_sample,
};
use ergodyn::StatePoint;

fn main() -> ergodyn::Result<()> {
    let seed = 7;

    let sys = doubling_system();
    let s = qr_spectrum(&sys, &StatePoint::new(vec![0.3127])?, 4000, seed)?;
    println!("doubling: exponents {:?}", s.exponents);
    println!("  exact log 2 = {:.12}, error {:.2e}", 2f64.ln(), (s.exponents[0] - 2f64.ln()).abs());

    let sys = cat_system();
    let s = qr_spectrum(&sys, &StatePoint::new(vec![0.21, 0.68])?, 10_000, seed)?;
    let exact = cat_expansion().ln();
    println!("cat: exponents {:?}", s.exponents);
    println!("  exact +/-{:.12}, chi+ error {:.2e}", exact, (chi_plus(&s) - exact).abs());

    let sys = geodesic_system();
    let x0 = liouville_sample(1, seed)[0].to_state();
    let s = qr_spectrum(&sys, &x0, 4000, seed)?;
    println!("geodesic flow: exponents {:?}", s.exponents);
    println!("  clusters {:?} multiplicities {:?}", s.cluster_values, s.multiplicities);
    println!("  exact {{1, 0, -1}}, residual {:.2e}", s.residual);
    Ok(())
}
