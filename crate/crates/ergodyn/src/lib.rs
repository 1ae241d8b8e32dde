//! Numerical workbench for entropy, Lyapunov, and Gibbs-type diagnostics of
//! low-dimensional model dynamics.
//!
//! The crate revolves around dynamical balls: sets of points whose orbits
//! shadow a center orbit within `r` for `n` steps. Everything else is built
//! on top — Monte Carlo ball volumes, covering/packing counts, entropy
//! estimators (covering growth, shadowing-mass decay, local volume decay),
//! Benettin Lyapunov spectra with tangent-ball cross-checks, and
//! Bowen-Margulis style ratio diagnostics for the geodesic flow on the
//! modular surface.
//!
//! Models live behind the [`system::SystemModel`] trait; the shipped zoo is
//! in [`models`]. All estimators take explicit seeds and are reproducible
//! bit-for-bit across runs and thread counts.

pub mod cloud;
pub mod config;
pub mod entropy;
pub mod error;
pub mod lyapunov;
pub mod manifest;
pub mod models;
pub mod point;
pub mod radial;
pub mod rng;
pub mod runner;
pub mod system;
pub mod thermo;
pub mod volume;

pub use entropy::{EntropyEstimate, EntropyRow, ReturnWindow};
pub use error::{DynError, Result};
pub use point::StatePoint;
pub use system::{
    dyn_distance, escape_time, in_dyn_ball, iterate, OrbitSegment, SystemModel,
};
