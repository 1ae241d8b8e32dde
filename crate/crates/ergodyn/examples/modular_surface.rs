//! A tour of the modular-surface machinery: fundamental-domain reduction,
//! Liouville sampling, the compact window, geodesic arcs near the cusp,
//! and the shortest closed geodesic.

use ergodyn::models::{
    fundamental_domain_area, geodesic_time1, liouville_sample, liouville_sample_with_stats,
    periodic_orbit_cloud, periodic_orbit_length, reduce_matrix, CompactWindow, Mat2,
};
use ergodyn::models::modular::basepoint_of;

fn main() -> ergodyn::Result<()> {
    println!(
        "fundamental domain area: {:.10} (pi/3 = {:.10})",
        fundamental_domain_area(),
        std::f64::consts::PI / 3.0
    );

    // A big word in the generators lands far from the domain; reduction
    // pulls it back to |Re z| <= 1/2, |z| >= 1.
    let g = Mat2::new(17.0, 12.0, 7.0, 5.0);
    let (red, _) = reduce_matrix(g)?;
    let (zx, zy) = basepoint_of(&red);
    println!(
        "reduced basepoint: {:.6} + {:.6}i  (|z| = {:.6})",
        zx,
        zy,
        (zx * zx + zy * zy).sqrt()
    );

    let (sample, attempts) = liouville_sample_with_stats(20_000, 3);
    let window = CompactWindow::default_window();
    let inside = sample.iter().filter(|v| window.contains_state(&v.to_state())).count();
    println!(
        "liouville sample: {} points, acceptance {:.3}, window mass {:.4} vs exact {:.4}",
        sample.len(),
        sample.len() as f64 / attempts as f64,
        inside as f64 / sample.len() as f64,
        window.liouville_mass()
    );

    // Height profile of one arc: cusp excursions show up as y climbing
    // well past the window, then returning.
    let mut v = liouville_sample(1, 41)[0].clone();
    let mut y_max: f64 = v.height();
    for _ in 0..40 {
        v = geodesic_time1(&v)?;
        y_max = y_max.max(v.height());
    }
    println!("arc of 40 time-1 steps: max height {:.3}, final height {:.3}", y_max, v.height());

    let orbit = periodic_orbit_cloud(64);
    println!(
        "shortest closed geodesic: length {:.10} = 2 arccosh(3/2); {} cloud points, first height {:.4}",
        periodic_orbit_length(),
        orbit.len(),
        orbit[0].height()
    );
    Ok(())
}
