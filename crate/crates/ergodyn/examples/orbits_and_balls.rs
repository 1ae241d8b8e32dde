//! Orbit iteration, dynamical distance, and escape times on the circle
//! doubling map: how a fixed metric ball shrinks into a dynamical one as
//! the horizon grows.

use ergodyn::models::doubling_system;
use ergodyn::{dyn_distance, escape_time, in_dyn_ball, iterate, StatePoint};

fn main() -> ergodyn::Result<()> {
    let sys = doubling_system();
    let x = StatePoint::new(vec![0.137])?;
    let orbit = iterate(&sys, &x, 8)?;
    println!("orbit of x = 0.137 under t -> 2t (mod 1):");
    for (n, p) in orbit.states().iter().enumerate() {
        println!("  T^{n} x = {:.6}", p.get(0));
    }

    // Two points 1e-3 apart separate at rate log 2: d_n grows until the
    // orbits decorrelate at n ~ log2(r / 1e-3).
    let y = StatePoint::new(vec![0.138])?;
    println!("\ndynamical distances d_n(x, y), |x - y| = 1e-3:");
    for n in 1..=11 {
        let d = dyn_distance(&sys, &x, &y, n)?;
        println!("  n = {n:2}  d_n = {d:.6}");
    }

    let r = 0.1;
    let center = iterate(&sys, &x, 12)?;
    let tau = escape_time(&sys, &center, &y, r)?;
    println!("\nescape time from B(x, n, {r}): tau = {tau}");
    for n in [tau.saturating_sub(1), tau, tau + 1] {
        if n == 0 {
            continue;
        }
        let inside = in_dyn_ball(&sys, &x, &y, n, r)?;
        println!("  y in B_{n}(x, {r})? {inside}   (tau >= n ? {})", tau >= n);
    }
    Ok(())
}
