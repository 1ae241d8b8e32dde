//! Gibbs ratio checks: ball masses against exp(Birkhoff sum - pressure * t).
//!
//! Two equilibrium states where every quantity is known in closed form:
//! Lebesgue on the circle is the zero-potential state of doubling at
//! pressure log 2, and Liouville is the geometric-potential state of the
//! geodesic flow at pressure 0 (the potential is identically -1, so the
//! log-mass slope in t should come out near -1).

use ergodyn::cloud::{generate_cloud, CloudMeasure};
use ergodyn::models::geodesic_system;
use ergodyn::models::doubling_system;
use ergodyn::system::{ReturnWindow, SystemModel};
use ergodyn::thermo::{gibbs_check, GeometricPotential, ZeroPotential};

fn main() -> ergodyn::Result<()> {
    let sys = doubling_system();
    let cloud = generate_cloud(&sys, &CloudMeasure::Lebesgue, 80_000, 11)?;
    let g = gibbs_check(
        &sys,
        &cloud,
        &ZeroPotential,
        ReturnWindow::Everywhere,
        8,
        0.1,
        &[0, 2, 4, 6, 8],
        2f64.ln(),
    )?;
    println!("doubling / Lebesgue / zero potential at pressure log 2:");
    println!(
        "  centers {}  max spread {:.3}  median slope {:.3} (expect ~ -log 2 = {:.3})",
        g.resolved_centers,
        g.max_spread,
        g.median_slope,
        -2f64.ln()
    );

    let sys = geodesic_system();
    let cloud = generate_cloud(&sys, &CloudMeasure::Liouville, 300_000, 11)?;
    let g = gibbs_check(
        &sys,
        &cloud,
        &GeometricPotential,
        sys.default_window(),
        6,
        0.35,
        &[0, 1, 2, 3, 4, 5, 6],
        0.0,
    )?;
    println!("geodesic flow / Liouville / geometric potential at pressure 0:");
    println!(
        "  centers {}  max spread {:.3}  median slope {:.3} (expect ~ -1)",
        g.resolved_centers, g.max_spread, g.median_slope
    );
    Ok(())
}
