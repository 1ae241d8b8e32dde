use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::RngCore;

use crate::error::Result;
use crate::point::StatePoint;
use crate::system::SystemModel;

/// Signed displacement from `a` to `b` on the unit circle, in [-1/2, 1/2).
pub fn circle_displacement(a: f64, b: f64) -> f64 {
    let mut d = (b - a).rem_euclid(1.0);
    if d >= 0.5 {
        d -= 1.0;
    }
    d
}

/// Circle distance, the quotient metric of R/Z.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    circle_displacement(a, b).abs()
}

/// The doubling map x -> 2x mod 1 with the circle metric and Lebesgue
/// reference measure. Expanding with constant derivative 2, so the single
/// Lyapunov exponent is log 2 and Lebesgue measure has entropy log 2.
pub struct DoublingMap;

impl SystemModel for DoublingMap {
    fn id(&self) -> &str {
        "doubling"
    }

    fn dim(&self) -> usize {
        1
    }

    fn step(&self, x: &StatePoint) -> Result<StatePoint> {
        StatePoint::new(vec![(2.0 * x.get(0)).rem_euclid(1.0)])
    }

    fn distance(&self, x: &StatePoint, y: &StatePoint) -> f64 {
        circle_distance(x.get(0), y.get(0))
    }

    fn jacobian(&self, _x: &StatePoint) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 2.0)
    }

    fn chart_sample(
        &self,
        center: &StatePoint,
        radius: f64,
        rng: &mut dyn RngCore,
    ) -> (StatePoint, f64) {
        let u: f64 = rng.gen();
        let x = (center.get(0) + radius * (2.0 * u - 1.0)).rem_euclid(1.0);
        (StatePoint::from_slice(&[x]), 1.0)
    }

    fn ref_volume_of_ball(&self, _center: &StatePoint, radius: f64) -> f64 {
        2.0 * radius
    }

    fn chart_radius(&self, _center: &StatePoint) -> f64 {
        // Half the injectivity radius of the circle; balls stay intervals.
        0.25
    }

    fn geometric_potential(&self, _x: &StatePoint) -> f64 {
        -std::f64::consts::LN_2
    }

    fn chart_density(&self, _x: &StatePoint) -> f64 {
        1.0
    }

    fn contains(&self, x: &StatePoint) -> bool {
        x.dim() == 1 && (-1e-9..1.0 + 1e-9).contains(&x.get(0))
    }
}

/// Doubling-map system with Lebesgue reference volume.
pub fn doubling_system() -> DoublingMap {
    DoublingMap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{dyn_distance, iterate};

    #[test]
    fn doubling_wraps_exactly() {
        let sys = doubling_system();
        let orbit = iterate(&sys, &StatePoint::scalar(0.7), 2).unwrap();
        assert!((orbit.get(1).get(0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn circle_distance_is_a_metric_with_wrap() {
        assert!((circle_distance(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert_eq!(circle_distance(0.25, 0.75), 0.5);
        assert_eq!(circle_distance(0.3, 0.3), 0.0);
    }

    #[test]
    fn doubling_ball_is_an_interval_of_known_length() {
        // For r < 1/4 the (n, r)-ball around x is the interval
        // |y - x| < r * 2^{-(n-1)}, of Lebesgue measure r * 2^{2-n}.
        let sys = doubling_system();
        let x = StatePoint::scalar(0.33);
        let r = 0.2;
        for n in 1..=10usize {
            let half = r * 0.5f64.powi(n as i32 - 1);
            let inside = StatePoint::scalar(0.33 + half * 0.999);
            let outside = StatePoint::scalar(0.33 + half * 1.001);
            assert!(dyn_distance(&sys, &x, &inside, n).unwrap() < r);
            assert!(dyn_distance(&sys, &x, &outside, n).unwrap() >= r);
        }
    }
}
