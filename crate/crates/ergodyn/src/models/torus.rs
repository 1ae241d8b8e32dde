use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::RngCore;

use crate::error::Result;
use crate::models::circle::circle_distance;
use crate::point::StatePoint;
use crate::system::SystemModel;

/// Larger eigenvalue of [[2, 1], [1, 1]], equal to (3 + sqrt 5) / 2.
pub fn cat_expansion() -> f64 {
    (3.0 + 5.0f64.sqrt()) / 2.0
}

/// The hyperbolic torus automorphism (x, y) -> (2x + y, x + y) mod 1 with
/// the flat quotient metric and Lebesgue area. The matrix is symmetric with
/// eigenvalues (3 +- sqrt 5) / 2, so the Lyapunov exponents are
/// +- log((3 + sqrt 5) / 2) = +- 0.9624...
pub struct CatMap;

impl SystemModel for CatMap {
    fn id(&self) -> &str {
        "cat"
    }

    fn dim(&self) -> usize {
        2
    }

    fn step(&self, p: &StatePoint) -> Result<StatePoint> {
        let (x, y) = (p.get(0), p.get(1));
        StatePoint::new(vec![
            (2.0 * x + y).rem_euclid(1.0),
            (x + y).rem_euclid(1.0),
        ])
    }

    fn distance(&self, p: &StatePoint, q: &StatePoint) -> f64 {
        let dx = circle_distance(p.get(0), q.get(0));
        let dy = circle_distance(p.get(1), q.get(1));
        (dx * dx + dy * dy).sqrt()
    }

    fn jacobian(&self, _p: &StatePoint) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0])
    }

    fn chart_sample(
        &self,
        center: &StatePoint,
        radius: f64,
        rng: &mut dyn RngCore,
    ) -> (StatePoint, f64) {
        // Uniform on the disc via the polar map; Lebesgue density is flat
        // so the importance weight is constant.
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        let rho = radius * u.sqrt();
        let phi = 2.0 * std::f64::consts::PI * v;
        let x = (center.get(0) + rho * phi.cos()).rem_euclid(1.0);
        let y = (center.get(1) + rho * phi.sin()).rem_euclid(1.0);
        (StatePoint::from_slice(&[x, y]), 1.0)
    }

    fn ref_volume_of_ball(&self, _center: &StatePoint, radius: f64) -> f64 {
        std::f64::consts::PI * radius * radius
    }

    fn chart_radius(&self, _center: &StatePoint) -> f64 {
        0.25
    }

    fn geometric_potential(&self, _p: &StatePoint) -> f64 {
        -cat_expansion().ln()
    }

    fn chart_density(&self, _p: &StatePoint) -> f64 {
        1.0
    }

    fn contains(&self, p: &StatePoint) -> bool {
        p.dim() == 2
            && p.coords()
                .iter()
                .all(|c| (-1e-9..1.0 + 1e-9).contains(c))
    }
}

/// Torus automorphism system with Lebesgue reference volume.
pub fn cat_system() -> CatMap {
    CatMap
}
