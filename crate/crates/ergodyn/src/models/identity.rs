use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::RngCore;

use crate::error::Result;
use crate::models::circle::circle_distance;
use crate::point::StatePoint;
use crate::system::SystemModel;

/// The identity map on the d-torus, d in 1..=3. Every estimator has a known
/// exact answer here (entropy 0, exponents 0, dynamical balls equal to
/// metric balls for all n), which pins down conventions.
pub struct IdentitySystem {
    dim: usize,
    id: &'static str,
}

impl IdentitySystem {
    pub fn new(dim: usize) -> Self {
        let id = match dim {
            1 => "identity",
            2 => "identity-2",
            3 => "identity-3",
            _ => panic!("identity system supports dimensions 1..=3, got {dim}"),
        };
        IdentitySystem { dim, id }
    }
}

impl SystemModel for IdentitySystem {
    fn id(&self) -> &str {
        self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn step(&self, x: &StatePoint) -> Result<StatePoint> {
        Ok(x.clone())
    }

    fn distance(&self, x: &StatePoint, y: &StatePoint) -> f64 {
        x.coords()
            .iter()
            .zip(y.coords())
            .map(|(a, b)| {
                let d = circle_distance(*a, *b);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    fn jacobian(&self, _x: &StatePoint) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }

    fn chart_sample(
        &self,
        center: &StatePoint,
        radius: f64,
        rng: &mut dyn RngCore,
    ) -> (StatePoint, f64) {
        // Rejection from the bounding cube onto the ball keeps the draw
        // uniform in any dimension up to 3.
        loop {
            let offset: Vec<f64> = (0..self.dim)
                .map(|_| radius * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            if offset.iter().map(|c| c * c).sum::<f64>() <= radius * radius {
                let coords: Vec<f64> = center
                    .coords()
                    .iter()
                    .zip(&offset)
                    .map(|(c, o)| (c + o).rem_euclid(1.0))
                    .collect();
                return (StatePoint::from_slice(&coords), 1.0);
            }
        }
    }

    fn ref_volume_of_ball(&self, _center: &StatePoint, radius: f64) -> f64 {
        match self.dim {
            1 => 2.0 * radius,
            2 => std::f64::consts::PI * radius * radius,
            3 => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            _ => unreachable!(),
        }
    }

    fn chart_radius(&self, _center: &StatePoint) -> f64 {
        0.25
    }

    fn geometric_potential(&self, _x: &StatePoint) -> f64 {
        0.0
    }

    fn chart_density(&self, _x: &StatePoint) -> f64 {
        1.0
    }

    fn contains(&self, x: &StatePoint) -> bool {
        x.dim() == self.dim
            && x.coords()
                .iter()
                .all(|c| (-1e-9..1.0 + 1e-9).contains(c))
    }
}
