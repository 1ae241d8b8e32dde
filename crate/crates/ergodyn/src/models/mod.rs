//! The model zoo: expanding circle maps, toral automorphisms, identity
//! charts for estimator calibration, and the modular-surface geodesic flow.

pub mod circle;
pub mod identity;
pub mod modular;
pub mod torus;

pub use circle::{circle_displacement, circle_distance, doubling_system, DoublingMap};
pub use identity::IdentitySystem;
pub use modular::{
    fundamental_domain_area, fsu, geodesic_steps, geodesic_system, geodesic_time1,
    hyperbolic_distance, jsu, liouville_sample, liouville_sample_with_stats, matrix_of_chart,
    periodic_orbit_cloud, periodic_orbit_length, quotient_distance, reduce_matrix,
    sasaki_distance, tangent_cocycle, CompactWindow, GeodesicSystem, Mat2, UnitTangentPSL2,
};
pub use torus::{cat_expansion, cat_system, CatMap};

use crate::error::{DynError, Result};
use crate::system::SystemModel;

/// Instantiates a model by its registry id. Known ids: `doubling`, `cat`,
/// `modular-geodesic`, `identity`, `identity-2`, `identity-3`.
pub fn model_by_id(id: &str) -> Result<Box<dyn SystemModel>> {
    match id {
        "doubling" => Ok(Box::new(doubling_system())),
        "cat" => Ok(Box::new(cat_system())),
        "modular-geodesic" => Ok(Box::new(geodesic_system())),
        "identity" => Ok(Box::new(IdentitySystem::new(1))),
        "identity-2" => Ok(Box::new(IdentitySystem::new(2))),
        "identity-3" => Ok(Box::new(IdentitySystem::new(3))),
        other => Err(DynError::UnknownSystem(other.to_string())),
    }
}

/// Registry ids accepted by [`model_by_id`], for error messages and docs.
pub fn known_models() -> &'static [&'static str] {
    &["doubling", "cat", "modular-geodesic", "identity", "identity-2", "identity-3"]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_round_trips_every_advertised_id() {
        for id in known_models() {
            let sys = model_by_id(id).unwrap();
            assert_eq!(&sys.id(), id);
            assert!(sys.dim() >= 1 && sys.dim() <= 3);
        }
        assert!(matches!(
            model_by_id("horocycle"),
            Err(DynError::UnknownSystem(_))
        ));
    }
}
