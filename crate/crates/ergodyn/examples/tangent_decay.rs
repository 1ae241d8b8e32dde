//! Volume decay of evolved tangent balls. The linearized image of a small
//! ball contracts at rate sum of negative exponents minus sum of positive
//! ones; on volume-preserving systems the pulled-back ball under the
//! cocycle decays like exp(-n * chi+), which is what the slope recovers.

use ergodyn::lyapunov::{decay_rate, tangent_ball_volume_exact};
use ergodyn::models::{cat_expansion, cat_system, geodesic_system, liouville_sample};
use ergodyn::StatePoint;

fn main() -> ergodyn::Result<()> {
    let sys = cat_system();
    let x = StatePoint::new(vec![0.21, 0.68])?;
    println!("cat map, exact cocycle ellipsoid volumes:");
    for n in [2, 4, 6, 8] {
        let v = tangent_ball_volume_exact(&sys, &x, n, 0.1)?;
        println!("  n = {n}  vol = {v:.3e}  -log vol / n = {:.4}", -v.ln() / n as f64);
    }
    let d = decay_rate(&sys, &x, 0.1, &[2, 4, 6, 8, 10, 12], 40_000, 99)?;
    println!(
        "sampled decay slope {:.4} vs chi+ = {:.4} (rel err {:.1e})",
        d.slope,
        cat_expansion().ln(),
        (d.slope / cat_expansion().ln() - 1.0).abs()
    );

    let sys = geodesic_system();
    let x = liouville_sample(1, 5)[0].to_state();
    let d = decay_rate(&sys, &x, 0.15, &[2, 3, 4, 5, 6], 60_000, 99)?;
    println!(
        "\ngeodesic flow decay slope {:.4} vs chi+ = 1 (excursion deficit {:.3})",
        d.slope, d.excursion_deficit
    );
    Ok(())
}
