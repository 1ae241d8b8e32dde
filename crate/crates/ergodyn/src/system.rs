//! The system abstraction and dynamical-distance machinery.
//!
//! A [`SystemModel`] is a discrete-time map on a metric space carrying a
//! reference volume, presented in a single chart. The dynamical distance
//! over `n` steps is
//!
//! ```text
//! d_n(x, y) = max_{0 <= i < n} d(T^i x, T^i y)
//! ```
//!
//! and the (n, r)-dynamical ball `B_n(x, r) = { y : d_n(x, y) < r }` is the
//! strict sublevel set. Strictness matters at exact radii: a point at
//! distance exactly `r` is outside the ball.

use nalgebra::DMatrix;
use rand_chacha::rand_core::RngCore;

use crate::error::{DynError, Result};
use crate::point::StatePoint;

/// A discrete-time dynamical system in one chart: a step map, a metric,
/// a tangent cocycle, and sampling support for its reference volume.
///
/// Implementations guarantee:
/// - `distance` is symmetric and vanishes only on equal points (for the
///   quotient models, equal coset points);
/// - `chart_sample` returns points within `radius` of `center`, with a
///   strictly positive importance weight proportional to the reference
///   density over the proposal density;
/// - `jacobian` is the derivative of `step` in the model's tangent frame.
pub trait SystemModel: Sync {
    /// Stable identifier used by the registry and in artifacts.
    fn id(&self) -> &str;

    /// Chart dimension.
    fn dim(&self) -> usize;

    /// One application of the map.
    fn step(&self, x: &StatePoint) -> Result<StatePoint>;

    /// Metric distance between two states.
    fn distance(&self, x: &StatePoint, y: &StatePoint) -> f64;

    /// Threshold test `distance(x, y) < r`: the hot path of escape-time
    /// walks. Models with expensive exact distances override it with a
    /// short-circuit that settles the common case cheaply.
    fn distance_lt(&self, x: &StatePoint, y: &StatePoint, r: f64) -> bool {
        self.distance(x, y) < r
    }

    /// Derivative of `step` at `x`, in the tangent frame documented by the
    /// model (the chart frame for the flat models).
    fn jacobian(&self, x: &StatePoint) -> DMatrix<f64>;

    /// Draws a point of the metric `radius`-ball around `center` together
    /// with an importance weight proportional to reference-density over
    /// proposal-density. Weights are comparable only within one
    /// (center, radius) family; normalization is carried separately by
    /// [`SystemModel::ref_volume_of_ball`].
    fn chart_sample(
        &self,
        center: &StatePoint,
        radius: f64,
        rng: &mut dyn RngCore,
    ) -> (StatePoint, f64);

    /// Reference-measure volume of the metric `radius`-ball, exact for the
    /// flat models and high-precision numeric otherwise.
    fn ref_volume_of_ball(&self, center: &StatePoint, radius: f64) -> f64;

    /// Largest radius for which the single-chart sampler and the metric
    /// surrogate are trusted at `center`. Volume queries cap `r` here.
    fn chart_radius(&self, center: &StatePoint) -> f64;

    /// Geometric potential: minus the log of the unstable Jacobian at `x`.
    /// Constant for every model shipped here.
    fn geometric_potential(&self, x: &StatePoint) -> f64;

    /// Reference density of the invariant chart volume at `x`, relative to
    /// chart Lebesgue measure. Used to push tangent volumes to the manifold.
    fn chart_density(&self, x: &StatePoint) -> f64;

    /// Jacobian factor carrying Lebesgue volume in the tangent frame at `x`
    /// to the reference measure near `x`. Identity charts give 1; frames
    /// that are not chart-orthonormal override this.
    fn tangent_volume_factor(&self, _x: &StatePoint) -> f64 {
        1.0
    }

    /// Whether `x` lies in the model's canonical domain (used to validate
    /// point files; a small tolerance is allowed at the boundary).
    fn contains(&self, x: &StatePoint) -> bool;

    /// The model's natural compact window for return-time filters and
    /// excursion accounting. Compact charts are their own window.
    fn default_window(&self) -> ReturnWindow {
        ReturnWindow::Everywhere
    }
}

/// A compact window in the chart, used to filter orbit times in local
/// estimators and to account for excursions in decay diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ReturnWindow {
    /// Every state counts (compact models).
    Everywhere,
    /// Only states with second coordinate at most this (the height
    /// window of cusped charts).
    HeightBelow(f64),
}

impl ReturnWindow {
    pub fn contains(&self, p: &StatePoint) -> bool {
        match self {
            ReturnWindow::Everywhere => true,
            ReturnWindow::HeightBelow(y) => p.dim() >= 2 && p.get(1) <= *y,
        }
    }
}

/// A finite forward orbit. `states[0]` is the base point and
/// `states[i + 1] = step(states[i])`.
#[derive(Clone, Debug)]
pub struct OrbitSegment {
    states: Vec<StatePoint>,
}

impl OrbitSegment {
    pub fn base(&self) -> &StatePoint {
        &self.states[0]
    }

    /// Number of stored states (the `n` of `iterate`).
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false // an orbit always holds its base point
    }

    pub fn states(&self) -> &[StatePoint] {
        &self.states
    }

    pub fn get(&self, i: usize) -> &StatePoint {
        &self.states[i]
    }
}

/// Computes the orbit `x, Tx, ..., T^{n-1} x` (n states, n >= 1).
pub fn iterate(system: &dyn SystemModel, x: &StatePoint, n: usize) -> Result<OrbitSegment> {
    if n == 0 {
        return Err(DynError::invalid("n", "orbit length must be at least 1"));
    }
    if x.dim() != system.dim() {
        return Err(DynError::invalid(
            "x",
            format!("dimension {} != system dimension {}", x.dim(), system.dim()),
        ));
    }
    let mut states = Vec::with_capacity(n);
    states.push(x.clone());
    for i in 1..n {
        let next = system.step(&states[i - 1]).map_err(|e| match e {
            // Re-key bare divergence with the orbit position.
            DynError::Divergence { .. } => DynError::Divergence { index: i },
            DynError::CuspExcursion { limit, .. } => DynError::CuspExcursion { index: i, limit },
            other => other,
        })?;
        states.push(next);
    }
    Ok(OrbitSegment { states })
}

/// `max_{0 <= i < n} d(T^i x, T^i y)`.
pub fn dyn_distance(
    system: &dyn SystemModel,
    x: &StatePoint,
    y: &StatePoint,
    n: usize,
) -> Result<f64> {
    let ox = iterate(system, x, n)?;
    let oy = iterate(system, y, n)?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        worst = worst.max(system.distance(ox.get(i), oy.get(i)));
    }
    Ok(worst)
}

/// Strict membership `d_n(center, y) < r`.
pub fn in_dyn_ball(
    system: &dyn SystemModel,
    center: &StatePoint,
    y: &StatePoint,
    n: usize,
    r: f64,
) -> Result<bool> {
    Ok(dyn_distance(system, center, y, n)? < r)
}

/// First index `i < n_max` with `d(T^i center, T^i y) >= r`, or `n_max` if
/// `y` stays within `r` of the whole stored center orbit. The center orbit
/// is reused across many `y`, so callers precompute it once.
///
/// `y` lies in `B_n(center, r)` exactly when the returned escape time is
/// `>= n`; one walk prices every `n` at once.
pub fn escape_time(
    system: &dyn SystemModel,
    center_orbit: &OrbitSegment,
    y: &StatePoint,
    r: f64,
) -> Result<usize> {
    let n_max = center_orbit.len();
    let mut cur = y.clone();
    for i in 0..n_max {
        if !system.distance_lt(center_orbit.get(i), &cur, r) {
            return Ok(i);
        }
        if i + 1 < n_max {
            cur = system.step(&cur).map_err(|e| match e {
                DynError::Divergence { .. } => DynError::Divergence { index: i + 1 },
                DynError::CuspExcursion { limit, .. } => {
                    DynError::CuspExcursion { index: i + 1, limit }
                }
                other => other,
            })?;
        }
    }
    Ok(n_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{cat_system, doubling_system};

    #[test]
    fn iterate_records_base_and_successors() {
        let sys = cat_system();
        let orbit = iterate(&sys, &StatePoint::from_slice(&[0.5, 0.5]), 2).unwrap();
        assert_eq!(orbit.len(), 2);
        assert_eq!(orbit.get(0).coords(), &[0.5, 0.5]);
        // (2x + y, x + y) mod 1 at (0.5, 0.5) is (0.5, 0.0), exactly in f64.
        assert_eq!(orbit.get(1).coords(), &[0.5, 0.0]);
    }

    #[test]
    fn orbit_consistency_under_recomputation() {
        let sys = doubling_system();
        let orbit = iterate(&sys, &StatePoint::scalar(0.137), 40).unwrap();
        for i in 0..orbit.len() - 1 {
            let stepped = sys.step(orbit.get(i)).unwrap();
            let gap = sys.distance(&stepped, orbit.get(i + 1));
            assert!(gap <= 1e-9, "orbit inconsistent at step {i}: gap {gap:e}");
        }
    }

    #[test]
    fn doubling_dyn_distance_takes_the_max_along_the_orbit() {
        let sys = doubling_system();
        let x = StatePoint::scalar(0.0);
        let y = StatePoint::scalar(0.1);
        // circle distances along the orbits: 0.1, 0.2, 0.4
        let d = dyn_distance(&sys, &x, &y, 3).unwrap();
        assert_eq!(d, 0.4, "expected max over 0.1, 0.2, 0.4, got {d}");
    }

    #[test]
    fn dyn_ball_membership_is_strict() {
        let sys = doubling_system();
        let x = StatePoint::scalar(0.0);
        let y = StatePoint::scalar(0.1);
        // d_3 = 0.4 exactly, and the ball is the strict sublevel set.
        assert!(!in_dyn_ball(&sys, &x, &y, 3, 0.4).unwrap());
        assert!(in_dyn_ball(&sys, &x, &y, 3, 0.4000001).unwrap());
    }

    #[test]
    fn one_step_ball_is_the_metric_ball() {
        let sys = cat_system();
        let x = StatePoint::from_slice(&[0.3, 0.7]);
        let y = StatePoint::from_slice(&[0.32, 0.68]);
        let metric = sys.distance(&x, &y);
        assert_eq!(dyn_distance(&sys, &x, &y, 1).unwrap(), metric);
        assert_eq!(
            in_dyn_ball(&sys, &x, &y, 1, 0.05).unwrap(),
            metric < 0.05,
            "n = 1 membership must reduce to the metric ball"
        );
    }

    #[test]
    fn escape_time_prices_every_n_at_once() {
        let sys = doubling_system();
        let x = StatePoint::scalar(0.0);
        let orbit = iterate(&sys, &x, 8).unwrap();
        let y = StatePoint::scalar(0.01);
        let r = 0.05;
        let tau = escape_time(&sys, &orbit, &y, r).unwrap();
        for n in 1..=8 {
            let member = in_dyn_ball(&sys, &x, &y, n, r).unwrap();
            assert_eq!(
                member,
                tau >= n,
                "escape time {tau} disagrees with membership at n = {n}"
            );
        }
    }

    #[test]
    fn dynamical_balls_nest_under_the_map() {
        // T(B_{n+1}(x, r)) is contained in B_n(Tx, r): if y is within r of
        // the orbit of x for n + 1 steps, Ty tracks Tx for n steps.
        let sys = cat_system();
        let x = StatePoint::from_slice(&[0.21, 0.43]);
        let r = 0.08;
        for k in 0..200u32 {
            let t = f64::from(k) / 200.0;
            let y = StatePoint::from_slice(&[
                (0.21 + r * 0.9 * (6.28 * t).cos()).rem_euclid(1.0),
                (0.43 + r * 0.9 * (6.28 * t).sin()).rem_euclid(1.0),
            ]);
            if in_dyn_ball(&sys, &x, &y, 7, r).unwrap() {
                let tx = sys.step(&x).unwrap();
                let ty = sys.step(&y).unwrap();
                assert!(
                    in_dyn_ball(&sys, &tx, &ty, 6, r).unwrap(),
                    "nesting failed at t = {t}"
                );
            }
        }
    }
}
