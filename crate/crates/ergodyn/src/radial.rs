//! Exact areas for intersections of centered ellipses.
//!
//! Every set here is `E_i = { v : |P_i v| < r }` for an invertible matrix
//! `P_i`: convex, symmetric, containing the origin. The radial function of
//! the intersection is therefore the pointwise minimum of the individual
//! radial functions `rho_i(t) = r / |P_i u(t)|`, and the area is the polar
//! integral of `rho^2 / 2`. Evaluating it on inscribed polygons with
//! doubling vertex counts gives an error that shrinks quadratically and is
//! monitored directly, so the result serves as an oracle for the Monte
//! Carlo tangent-ball machinery rather than sharing any code path with it.

use nalgebra::Matrix2;

/// Radius of the intersection along the unit direction `(cos t, sin t)`.
fn radial_min(mats: &[Matrix2<f64>], r: f64, t: f64) -> f64 {
    let (s, c) = t.sin_cos();
    let mut rho = f64::INFINITY;
    for p in mats {
        let px = p[(0, 0)] * c + p[(0, 1)] * s;
        let py = p[(1, 0)] * c + p[(1, 1)] * s;
        let norm = (px * px + py * py).sqrt();
        rho = rho.min(r / norm);
    }
    rho
}

fn inscribed_area(mats: &[Matrix2<f64>], r: f64, vertices: usize) -> f64 {
    let dt = 2.0 * std::f64::consts::PI / vertices as f64;
    let sin_dt = dt.sin();
    let mut prev = radial_min(mats, r, 0.0);
    let first = prev;
    let mut area = 0.0;
    for j in 1..=vertices {
        let rho = if j == vertices {
            first
        } else {
            radial_min(mats, r, j as f64 * dt)
        };
        area += 0.5 * prev * rho * sin_dt;
        prev = rho;
    }
    area
}

/// Area of the intersection of the ellipses `{ |P_i v| < r }`, refined
/// until two consecutive vertex doublings agree to relative `tol`.
///
/// Panics on empty input or singular `P_i` (the radial function would be
/// infinite); callers pass cocycle products, which are invertible.
pub fn ellipse_intersection_area(mats: &[Matrix2<f64>], r: f64, tol: f64) -> f64 {
    assert!(!mats.is_empty(), "need at least one ellipse");
    assert!(r > 0.0 && r.is_finite());
    for p in mats {
        assert!(
            p.determinant().abs() > 1e-300,
            "singular map has no bounded preimage ellipse"
        );
    }
    let mut vertices = 1024usize;
    let mut prev = inscribed_area(mats, r, vertices);
    loop {
        vertices *= 2;
        let cur = inscribed_area(mats, r, vertices);
        if (cur - prev).abs() <= tol * cur.abs() || vertices >= (1 << 20) {
            return cur;
        }
        prev = cur;
    }
}

/// Half-width of the interval `{ v : |p_i v| < r }` intersection in one
/// dimension: `r / max |p_i|`.
pub fn interval_intersection_halfwidth(scales: &[f64], r: f64) -> f64 {
    let worst = scales.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    assert!(worst > 0.0, "need at least one nonzero scale");
    r / worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn single_disc_recovers_pi_r_squared() {
        let a = ellipse_intersection_area(&[Matrix2::identity()], 0.3, 1e-4);
        let exact = std::f64::consts::PI * 0.09;
        assert!((a - exact).abs() < 2e-4 * exact, "{a} vs {exact}");
    }

    #[test]
    fn nested_discs_reduce_to_the_smallest() {
        // |2v| < r is the disc of radius r/2; intersecting with the unit
        // disc changes nothing else.
        let mats = [Matrix2::identity(), Matrix2::new(2.0, 0.0, 0.0, 2.0)];
        let a = ellipse_intersection_area(&mats, 0.4, 1e-4);
        let exact = std::f64::consts::PI * 0.04;
        assert!((a - exact).abs() < 2e-4 * exact, "{a} vs {exact}");
    }

    #[test]
    fn unimodular_stretch_preserves_ellipse_area() {
        let a = ellipse_intersection_area(&[Matrix2::new(4.0, 0.0, 0.0, 0.25)], 0.2, 1e-4);
        let exact = std::f64::consts::PI * 0.04;
        assert!((a - exact).abs() < 2e-4 * exact, "{a} vs {exact}");
    }

    #[test]
    fn crossed_ellipses_match_a_brute_force_grid() {
        // Two thin ellipses at an angle; compare against direct membership
        // counting on a fine grid, an entirely independent route.
        let rot = |t: f64| Matrix2::new(t.cos(), -t.sin(), t.sin(), t.cos());
        let mats = [
            Matrix2::new(3.0, 0.0, 0.0, 1.0 / 3.0),
            rot(0.7) * Matrix2::new(2.0, 0.0, 0.0, 0.5) * rot(-0.7),
        ];
        let r = 0.5;
        let a = ellipse_intersection_area(&mats, r, 1e-4);
        let half = 0.6;
        let n = 2400usize;
        let h = 2.0 * half / n as f64;
        let mut hits = 0u64;
        for i in 0..n {
            let x = -half + (i as f64 + 0.5) * h;
            for j in 0..n {
                let y = -half + (j as f64 + 0.5) * h;
                let inside = mats.iter().all(|p| {
                    let px = p[(0, 0)] * x + p[(0, 1)] * y;
                    let py = p[(1, 0)] * x + p[(1, 1)] * y;
                    px * px + py * py < r * r
                });
                if inside {
                    hits += 1;
                }
            }
        }
        let grid = hits as f64 * h * h;
        assert!((a - grid).abs() < 5e-3 * a, "radial {a} vs grid {grid}");
    }

    #[test]
    fn random_products_shrink_monotonically_under_more_constraints() {
        let mut rng = crate::rng::stream_rng(8, 0);
        let mut mats = vec![Matrix2::identity()];
        let mut prev = f64::INFINITY;
        for _ in 0..6 {
            let g = Matrix2::new(
                1.0 + rng.gen::<f64>(),
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                1.0 + rng.gen::<f64>(),
            );
            mats.push(g * mats.last().unwrap());
            let a = ellipse_intersection_area(&mats, 0.3, 1e-4);
            assert!(a <= prev * (1.0 + 1e-9), "area grew when adding a constraint");
            assert!(a > 0.0);
            prev = a;
        }
    }

    #[test]
    fn one_dimensional_intersection_is_the_tightest_interval() {
        assert_eq!(interval_intersection_halfwidth(&[1.0, 2.0, 8.0], 0.4), 0.05);
        assert_eq!(interval_intersection_halfwidth(&[-4.0, 1.0], 0.4), 0.1);
    }
}
