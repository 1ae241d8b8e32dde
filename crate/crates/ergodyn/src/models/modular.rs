//! Unit tangent bundle of the modular surface and its time-1 geodesic map.
//!
//! States are cosets `Gamma m` with `Gamma = PSL(2, Z)` and `m` a real 2x2
//! matrix of determinant one. The basepoint in the upper half-plane is
//! `z = m * i` (Moebius action) and the direction angle is
//! `theta = pi/2 - 2 arg(ci + d)`. The time-1 geodesic map is right
//! multiplication by `a1 = diag(e^{1/2}, e^{-1/2})` followed by reduction
//! of the basepoint into the fundamental domain
//! `{ |Re z| <= 1/2, |z| >= 1 }` via integer translations and the
//! inversion `z -> -1/z`.
//!
//! Distance between cosets is measured by a Frobenius surrogate:
//!
//! ```text
//! d(v, w) = min over gamma in C, signs of  |gamma m_v -+ m_w|_F
//! ```
//!
//! symmetrized over the argument order, where `C` runs over the words of
//! length at most 3 in the generators `S, T, T^{-1}` together with the
//! identity. For reduced representatives at distance below 0.5 this
//! realizes the quotient distance; beyond that it is an upper bound, which
//! is all the ball machinery needs (balls here are always small). The
//! surrogate is equivalent to the Sasaki metric on compact pieces of the
//! bundle; the comparison constant is model-internal and is exercised by
//! the property tests rather than assumed.
//!
//! Chart coordinates for the volume machinery are `(x, y, theta)` with
//! reference (Liouville) density `dx dy dtheta / y^2`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::RngCore;
use std::sync::OnceLock;

use crate::error::{DynError, Result};
use crate::point::StatePoint;
use crate::system::{ReturnWindow, SystemModel};

/// Basepoint height at which orbit queries abort rather than continue into
/// the cusp with degrading precision.
pub const Y_ABORT: f64 = 1.0e6;

/// Cap on reduction moves; generic points need only a handful.
pub const REDUCE_MAX_MOVES: usize = 10_000;

/// Requested ball radii are clamped to this before the per-center
/// self-overlap analysis shrinks them further.
pub const MAX_CHART_RADIUS: f64 = 0.4;

const SIGN_EPS: f64 = 1e-12;

/// Real 2x2 matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);
    /// Inversion z -> -1/z.
    pub const S: Mat2 = Mat2::new(0.0, -1.0, 1.0, 0.0);
    /// Translation z -> z + 1.
    pub const T: Mat2 = Mat2::new(1.0, 1.0, 0.0, 1.0);
    pub const T_INV: Mat2 = Mat2::new(1.0, -1.0, 0.0, 1.0);

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn frobenius(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Frobenius distance minimized over the projective sign of `other`.
    pub fn sign_min_dist(&self, other: &Mat2) -> f64 {
        let minus = ((self.a - other.a).powi(2)
            + (self.b - other.b).powi(2)
            + (self.c - other.c).powi(2)
            + (self.d - other.d).powi(2))
        .sqrt();
        let plus = ((self.a + other.a).powi(2)
            + (self.b + other.b).powi(2)
            + (self.c + other.c).powi(2)
            + (self.d + other.d).powi(2))
        .sqrt();
        minus.min(plus)
    }

    /// Flips the overall sign so the first entry exceeding `1e-12` in
    /// (a, b, c, d) order is positive. Canonical representative of +-m.
    pub fn sign_normalized(&self) -> Mat2 {
        for e in [self.a, self.b, self.c, self.d] {
            if e.abs() > SIGN_EPS {
                return if e < 0.0 { self.scale(-1.0) } else { *self };
            }
        }
        *self
    }
}

/// Geodesic-flow generator over time t: diag(e^{t/2}, e^{-t/2}).
pub fn flow_matrix(t: f64) -> Mat2 {
    Mat2::new((0.5 * t).exp(), 0.0, 0.0, (-0.5 * t).exp())
}

/// Basepoint `m * i` in the upper half-plane, via the Moebius action.
/// Uses the actual determinant so slightly drifted matrices stay honest.
pub fn basepoint_of(m: &Mat2) -> (f64, f64) {
    let den = m.c * m.c + m.d * m.d;
    ((m.a * m.c + m.b * m.d) / den, m.det() / den)
}

/// Direction angle of the pushed-forward vertical at the basepoint,
/// normalized into [0, 2 pi).
pub fn theta_of(m: &Mat2) -> f64 {
    let t = std::f64::consts::FRAC_PI_2 - 2.0 * m.c.atan2(m.d);
    t.rem_euclid(2.0 * std::f64::consts::PI)
}

/// Matrix with basepoint x + iy and direction angle theta: `b_z * k_phi`
/// with `b_z = [[sqrt y, x / sqrt y], [0, 1 / sqrt y]]` and the rotation
/// angle `phi = (theta - pi/2) / 2` (tangent vectors rotate by `2 phi`).
pub fn matrix_of_chart(x: f64, y: f64, theta: f64) -> Mat2 {
    let sy = y.sqrt();
    let phi = 0.5 * (theta - std::f64::consts::FRAC_PI_2);
    let (sin, cos) = phi.sin_cos();
    Mat2::new(
        sy * cos - x / sy * sin,
        sy * sin + x / sy * cos,
        -sin / sy,
        cos / sy,
    )
}

fn chart_of_state(p: &StatePoint) -> Mat2 {
    matrix_of_chart(p.get(0), p.get(1), p.get(2))
}

/// Outcome of a fundamental-domain reduction.
#[derive(Clone, Copy, Debug)]
pub struct ReduceMoves {
    pub translations: usize,
    pub inversions: usize,
}

/// Left-multiplies by PSL(2, Z) elements until the basepoint satisfies
/// `|Re z| <= 1/2 + 1e-9` and `|z| >= 1 - 1e-9`, renormalizing the
/// determinant and the projective sign along the way.
pub fn reduce_matrix(m: Mat2) -> Result<(Mat2, ReduceMoves)> {
    if !m.is_finite() {
        return Err(DynError::Divergence { index: 0 });
    }
    let det = m.det();
    if !(det.is_finite() && det > 0.0) {
        return Err(DynError::SingularJacobian { index: 0, det });
    }
    let mut m = m.scale(1.0 / det.sqrt());
    let mut moves = ReduceMoves {
        translations: 0,
        inversions: 0,
    };
    for _ in 0..REDUCE_MAX_MOVES {
        let (x, y) = basepoint_of(&m);
        if !(x.is_finite() && y.is_finite() && y > 0.0) {
            return Err(DynError::Divergence { index: 0 });
        }
        if y > Y_ABORT {
            return Err(DynError::CuspExcursion { index: 0, limit: Y_ABORT });
        }
        // Guard bands keep boundary points from flip-flopping between
        // equivalent representatives.
        if x.abs() > 0.5 + 1e-12 {
            let k = x.round();
            // T^{-k}: row1 <- row1 - k row2.
            m = Mat2::new(m.a - k * m.c, m.b - k * m.d, m.c, m.d);
            moves.translations += 1;
            continue;
        }
        if x * x + y * y < 1.0 - 1e-12 {
            m = Mat2::S.mul(&m);
            moves.inversions += 1;
            continue;
        }
        let det = m.det();
        if (det - 1.0).abs() > 1e-13 {
            m = m.scale(1.0 / det.sqrt());
        }
        return Ok((m.sign_normalized(), moves));
    }
    Err(DynError::ReductionOverflow {
        max_iters: REDUCE_MAX_MOVES,
    })
}

/// A unit tangent vector of the modular surface: a reduced, sign-normalized
/// determinant-one representative plus its cached chart coordinates.
#[derive(Clone, Debug)]
pub struct UnitTangentPSL2 {
    m: Mat2,
    x: f64,
    y: f64,
    theta: f64,
}

impl UnitTangentPSL2 {
    /// Reduces an arbitrary determinant-one matrix into the canonical
    /// representative.
    pub fn from_matrix(m: Mat2) -> Result<Self> {
        let (m, _) = reduce_matrix(m)?;
        let (x, y) = basepoint_of(&m);
        Ok(UnitTangentPSL2 {
            m,
            x,
            y,
            theta: theta_of(&m),
        })
    }

    /// Vector with the given basepoint and direction angle.
    pub fn from_chart(x: f64, y: f64, theta: f64) -> Result<Self> {
        if !(y > 0.0) {
            return Err(DynError::invalid("y", format!("height must be positive, got {y}")));
        }
        Self::from_matrix(matrix_of_chart(x, y, theta))
    }

    /// The identity coset: basepoint i, pointing up.
    pub fn base_upward() -> Self {
        Self::from_matrix(Mat2::IDENTITY).expect("identity reduces")
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    /// Basepoint (x, y) in the fundamental domain.
    pub fn basepoint(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn height(&self) -> f64 {
        self.y
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Chart coordinates (x, y, theta) as a state for the volume machinery.
    pub fn to_state(&self) -> StatePoint {
        StatePoint::from_slice(&[self.x, self.y, self.theta])
    }

    pub fn from_state(p: &StatePoint) -> Result<Self> {
        if p.dim() != 3 {
            return Err(DynError::invalid(
                "state",
                format!("expected 3 chart coordinates, got {}", p.dim()),
            ));
        }
        Self::from_chart(p.get(0), p.get(1), p.get(2))
    }
}

/// Flows a vector for integer time 1: right multiplication by
/// `diag(e^{1/2}, e^{-1/2})`, then reduction.
pub fn geodesic_time1(v: &UnitTangentPSL2) -> Result<UnitTangentPSL2> {
    UnitTangentPSL2::from_matrix(v.m.mul(&flow_matrix(1.0)))
}

/// Flows for integer time `t >= 0` by repeated time-1 steps, reducing after
/// each so entries stay bounded away from overflow.
pub fn geodesic_steps(v: &UnitTangentPSL2, t: usize) -> Result<UnitTangentPSL2> {
    let mut cur = v.clone();
    for _ in 0..t {
        cur = geodesic_time1(&cur)?;
    }
    Ok(cur)
}

fn candidate_words() -> &'static Vec<Mat2> {
    static WORDS: OnceLock<Vec<Mat2>> = OnceLock::new();
    WORDS.get_or_init(|| {
        let gens = [Mat2::S, Mat2::T, Mat2::T_INV];
        let mut out: Vec<Mat2> = vec![Mat2::IDENTITY];
        let mut frontier: Vec<Mat2> = vec![Mat2::IDENTITY];
        let key = |m: &Mat2| {
            let n = m.sign_normalized();
            (
                n.a.round() as i64,
                n.b.round() as i64,
                n.c.round() as i64,
                n.d.round() as i64,
            )
        };
        let mut seen: Vec<(i64, i64, i64, i64)> = vec![key(&Mat2::IDENTITY)];
        for _ in 0..3 {
            let mut next = Vec::new();
            for w in &frontier {
                for g in &gens {
                    let prod = g.mul(w).sign_normalized();
                    let k = key(&prod);
                    if !seen.contains(&k) {
                        seen.push(k);
                        out.push(prod);
                        next.push(prod);
                    }
                }
            }
            frontier = next;
        }
        out
    })
}

/// Quotient Frobenius distance between two determinant-one matrices:
/// minimum over the candidate words, projective signs, and both argument
/// orders. Symmetric by construction; exact for reduced representatives
/// closer than about 0.5, an upper bound past that.
pub fn quotient_distance(m1: &Mat2, m2: &Mat2) -> f64 {
    let mut best = f64::INFINITY;
    for gamma in candidate_words() {
        best = best.min(gamma.mul(m1).sign_min_dist(m2));
        best = best.min(gamma.mul(m2).sign_min_dist(m1));
    }
    best
}

/// Threshold test `quotient_distance < r` with a short-circuit on the
/// identity word, which settles almost every query in ball sampling.
pub fn quotient_distance_lt(m1: &Mat2, m2: &Mat2, r: f64) -> bool {
    if m1.sign_min_dist(m2) < r {
        return true;
    }
    for gamma in &candidate_words()[1..] {
        if gamma.mul(m1).sign_min_dist(m2) < r || gamma.mul(m2).sign_min_dist(m1) < r {
            return true;
        }
    }
    false
}

/// Distance between unit tangent vectors in the Frobenius surrogate of the
/// Sasaki metric.
pub fn sasaki_distance(v: &UnitTangentPSL2, w: &UnitTangentPSL2) -> f64 {
    quotient_distance(&v.m, &w.m)
}

/// Hyperbolic distance between upper half-plane points, for test oracles.
pub fn hyperbolic_distance(z1: (f64, f64), z2: (f64, f64)) -> f64 {
    let dx = z1.0 - z2.0;
    let dy = z1.1 - z2.1;
    (1.0 + (dx * dx + dy * dy) / (2.0 * z1.1 * z2.1)).acosh()
}

/// Draws `n` Liouville-distributed vectors; see
/// [`liouville_sample_with_stats`].
pub fn liouville_sample(n: usize, seed: u64) -> Vec<UnitTangentPSL2> {
    liouville_sample_with_stats(n, seed).0
}

/// Rejection sampler for the normalized Liouville measure
/// `dx dy / y^2 x dtheta`: proposals are drawn from the density
/// `y^{-2}` on the strip `{ |x| <= 1/2, y >= sqrt(3)/2 }` (uniform x,
/// inverse-CDF y) and accepted on the fundamental-domain condition
/// `x^2 + y^2 >= 1`; the angle is uniform. Returns the samples plus the
/// number of proposals, so callers can recover the acceptance-rate
/// estimate of the domain area, `(2 / sqrt 3) * accepted / proposals`.
///
/// Draws with `y > 1e6` (probability about 3e-7 each) are re-proposed:
/// they are legitimate mass but poison double-precision orbit work.
pub fn liouville_sample_with_stats(n: usize, seed: u64) -> (Vec<UnitTangentPSL2>, u64) {
    let mut rng = crate::rng::stream_rng(seed, crate::rng::streams::CLOUD);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0u64;
    let y_floor = 3.0f64.sqrt() / 2.0;
    while out.len() < n {
        attempts += 1;
        let x = rng.gen::<f64>() - 0.5;
        let y = y_floor / (1.0 - rng.gen::<f64>());
        if y > Y_ABORT {
            continue;
        }
        if x * x + y * y < 1.0 {
            continue;
        }
        let theta = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
        out.push(
            UnitTangentPSL2::from_chart(x, y, theta)
                .expect("in-domain proposal reduces trivially"),
        );
    }
    (out, attempts)
}

/// Exact Liouville area of the fundamental domain, pi / 3.
pub fn fundamental_domain_area() -> f64 {
    std::f64::consts::PI / 3.0
}

/// Compact piece of the bundle: basepoint height at most `y_max`.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct CompactWindow {
    pub y_max: f64,
}

impl CompactWindow {
    pub fn new(y_max: f64) -> Result<Self> {
        if !(y_max >= 1.0 && y_max.is_finite()) {
            return Err(DynError::invalid(
                "y_max",
                format!("window height must be >= 1, got {y_max}"),
            ));
        }
        Ok(CompactWindow { y_max })
    }

    /// Default window used by the return-time filters.
    pub fn default_window() -> Self {
        CompactWindow { y_max: 8.0 }
    }

    pub fn contains(&self, v: &UnitTangentPSL2) -> bool {
        v.height() <= self.y_max
    }

    pub fn contains_state(&self, p: &StatePoint) -> bool {
        p.get(1) <= self.y_max
    }

    /// Normalized Liouville mass, `1 - (3 / pi) / y_max` for `y_max >= 1`.
    pub fn liouville_mass(&self) -> f64 {
        1.0 - 3.0 / (std::f64::consts::PI * self.y_max)
    }
}

/// Unstable Jacobian of the time-t geodesic flow: `e^t`, independent of the
/// vector (curvature is constantly -1).
pub fn jsu(_v: &UnitTangentPSL2, t: f64) -> f64 {
    t.exp()
}

/// Geometric potential: minus the time derivative of `log jsu`, constantly
/// -1 here.
pub fn fsu(_v: &UnitTangentPSL2) -> f64 {
    -1.0
}

/// Derivative of the time-1 map in the (flow, unstable, stable) frame of
/// right-invariant fields; constant `diag(1, e, 1/e)`, with Lyapunov
/// spectrum {+1, 0, -1}.
pub fn tangent_cocycle(_v: &UnitTangentPSL2) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        1.0,
        std::f64::consts::E,
        1.0 / std::f64::consts::E,
    ]))
}

/// Translation length of the closed geodesic fixed by [[2, 1], [1, 1]]:
/// `2 arccosh(3/2)`.
pub fn periodic_orbit_length() -> f64 {
    2.0 * 1.5f64.acosh()
}

/// `n` vectors equally spaced in arclength along the closed geodesic of
/// the hyperbolic element [[2, 1], [1, 1]]. The empirical measure of the
/// returned cloud approximates the invariant length measure on the orbit.
pub fn periodic_orbit_cloud(n: usize) -> Vec<UnitTangentPSL2> {
    // Columns: unit-determinant eigenbasis with the expanding eigenvector
    // first, so right multiplication by the flow translates along the axis.
    let lam = (3.0 + 5.0f64.sqrt()) / 2.0;
    let mu = (3.0 - 5.0f64.sqrt()) / 2.0;
    let p = Mat2::new(1.0, -1.0, lam - 2.0, -(mu - 2.0));
    let p = p.scale(1.0 / p.det().sqrt());
    let ell = periodic_orbit_length();
    (0..n)
        .map(|k| {
            let t = ell * (k as f64) / (n as f64);
            UnitTangentPSL2::from_matrix(p.mul(&flow_matrix(t)))
                .expect("axis points reduce cleanly")
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Chart sampling geometry.

/// Axis-aligned chart box guaranteed to contain the chart image of the
/// Frobenius r-ball around a matrix, derived from the exact first-order
/// sensitivity `|delta z| <= r sqrt(y (1 + |z|^2))`, `|delta theta| <=
/// 2 r sqrt y`, inflated for curvature of the chart map.
#[derive(Clone, Copy, Debug)]
struct ChartBox {
    x0: f64,
    y0: f64,
    t0: f64,
    wx: f64,
    wy: f64,
    wt: f64,
}

impl ChartBox {
    fn around(center: &StatePoint, r: f64) -> ChartBox {
        let (x0, y0, t0) = (center.get(0), center.get(1), center.get(2));
        let g = (y0 * (1.0 + x0 * x0 + y0 * y0)).sqrt();
        let w = 1.3 * r * g + 0.02 * r;
        // Re-evaluate the sensitivity at the worst corner once; the chart
        // map's curvature is mild at these radii.
        let yw = y0 + w;
        let xw = x0.abs() + w;
        let g2 = (yw * (1.0 + xw * xw + yw * yw)).sqrt();
        let w = 1.15 * r * g.max(g2 * 0.85) + 0.02 * r;
        let wt = 2.3 * r * (y0 + w).sqrt() + 0.02 * r;
        ChartBox {
            x0,
            y0,
            t0,
            wx: w,
            wy: w,
            wt,
        }
    }

    #[cfg(test)]
    fn contains(&self, x: f64, y: f64, t: f64) -> bool {
        (x - self.x0).abs() <= self.wx
            && (y - self.y0).abs() <= self.wy
            && angle_gap(t, self.t0) <= self.wt
    }

    fn max_height(&self) -> f64 {
        self.y0 + self.wy
    }

    fn min_height(&self) -> f64 {
        self.y0 - self.wy
    }
}

#[cfg(test)]
fn angle_gap(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
    if d > std::f64::consts::PI {
        d = 2.0 * std::f64::consts::PI - d;
    }
    d
}

/// The geodesic time-1 map as a [`SystemModel`] in the (x, y, theta) chart.
pub struct GeodesicSystem;

/// Geodesic time-1 system on the unit tangent bundle of the modular
/// surface, with Liouville reference volume.
pub fn geodesic_system() -> GeodesicSystem {
    GeodesicSystem
}

impl GeodesicSystem {
    /// Largest radius at which the ball around `center` stays below the
    /// height where cusp translations produce loops shorter than twice the
    /// radius; past that the single-chart sampler would double count.
    fn self_overlap_cap(&self, center: &StatePoint) -> f64 {
        let mut lo = 0.0f64;
        let mut hi = MAX_CHART_RADIUS;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let bx = ChartBox::around(center, mid);
            let ok = bx.max_height() < 1.0 / (4.0 * mid * mid) - 0.05
                && bx.min_height() > 0.02
                && bx.wt < 3.0;
            if ok {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

impl SystemModel for GeodesicSystem {
    fn id(&self) -> &str {
        "modular-geodesic"
    }

    fn dim(&self) -> usize {
        3
    }

    fn step(&self, p: &StatePoint) -> Result<StatePoint> {
        let m = chart_of_state(p).mul(&flow_matrix(1.0));
        let (m, _) = reduce_matrix(m)?;
        let (x, y) = basepoint_of(&m);
        StatePoint::new(vec![x, y, theta_of(&m)])
    }

    fn distance(&self, p: &StatePoint, q: &StatePoint) -> f64 {
        quotient_distance(&chart_of_state(p), &chart_of_state(q))
    }

    fn distance_lt(&self, p: &StatePoint, q: &StatePoint, r: f64) -> bool {
        quotient_distance_lt(&chart_of_state(p), &chart_of_state(q), r)
    }

    fn jacobian(&self, _p: &StatePoint) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            1.0,
            std::f64::consts::E,
            1.0 / std::f64::consts::E,
        ]))
    }

    fn chart_sample(
        &self,
        center: &StatePoint,
        radius: f64,
        rng: &mut dyn RngCore,
    ) -> (StatePoint, f64) {
        let bx = ChartBox::around(center, radius);
        let mc = chart_of_state(center);
        loop {
            let x = bx.x0 + bx.wx * (2.0 * rng.gen::<f64>() - 1.0);
            let y = bx.y0 + bx.wy * (2.0 * rng.gen::<f64>() - 1.0);
            let t = bx.t0 + bx.wt * (2.0 * rng.gen::<f64>() - 1.0);
            if y <= 0.0 {
                continue;
            }
            // Membership in the lifted ball needs only the projective sign:
            // the box stays below the self-overlap height, so no second
            // representative of a quotient point can appear.
            if matrix_of_chart(x, y, t).sign_min_dist(&mc) < radius {
                return (StatePoint::from_slice(&[x, y, t]), 1.0 / (y * y));
            }
        }
    }

    fn ref_volume_of_ball(&self, center: &StatePoint, radius: f64) -> f64 {
        // Midpoint-rule integral of y^{-2} over the lifted ball; the grid
        // resolution bounds the relative error at the percent scale, which
        // only shifts volume constants, never decay rates.
        let bx = ChartBox::around(center, radius);
        let mc = chart_of_state(center);
        const N: usize = 80;
        let hx = 2.0 * bx.wx / N as f64;
        let hy = 2.0 * bx.wy / N as f64;
        let ht = 2.0 * bx.wt / N as f64;
        let mut sum = 0.0;
        for i in 0..N {
            let x = bx.x0 - bx.wx + (i as f64 + 0.5) * hx;
            for j in 0..N {
                let y = bx.y0 - bx.wy + (j as f64 + 0.5) * hy;
                if y <= 0.0 {
                    continue;
                }
                let mut row = 0.0;
                for k in 0..N {
                    let t = bx.t0 - bx.wt + (k as f64 + 0.5) * ht;
                    if matrix_of_chart(x, y, t).sign_min_dist(&mc) < radius {
                        row += 1.0;
                    }
                }
                sum += row / (y * y);
            }
        }
        sum * hx * hy * ht
    }

    fn chart_radius(&self, center: &StatePoint) -> f64 {
        self.self_overlap_cap(center)
    }

    fn geometric_potential(&self, _p: &StatePoint) -> f64 {
        -1.0
    }

    fn chart_density(&self, p: &StatePoint) -> f64 {
        let y = p.get(1);
        1.0 / (y * y)
    }

    fn tangent_volume_factor(&self, _p: &StatePoint) -> f64 {
        // The (flow, unstable, stable) frame maps to the chart with
        // Jacobian determinant 2 y^2 (conformal factor y^2 from the Moebius
        // action times the frame skew 2 at the base); the reference density
        // y^{-2} cancels the height, leaving a constant.
        2.0
    }

    fn contains(&self, p: &StatePoint) -> bool {
        if p.dim() != 3 {
            return false;
        }
        let (x, y) = (p.get(0), p.get(1));
        x.abs() <= 0.5 + 1e-6 && y > 0.0 && x * x + y * y >= 1.0 - 1e-6 && y <= Y_ABORT
    }

    fn default_window(&self) -> ReturnWindow {
        ReturnWindow::HeightBelow(CompactWindow::default_window().y_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn reduce_translates_into_the_strip() {
        // z = 0.6 + 2i needs one unit translation left.
        let m = matrix_of_chart(0.6, 2.0, 1.0);
        let v = UnitTangentPSL2::from_matrix(m).unwrap();
        let (x, y) = v.basepoint();
        assert!(close(x, -0.4, 1e-12) && close(y, 2.0, 1e-12), "got ({x}, {y})");
    }

    #[test]
    fn reduce_inverts_low_points() {
        // z = 0.3 + 0.4i -> -1/z = -1.2 + 1.6i -> translate -> -0.2 + 1.6i.
        let m = matrix_of_chart(0.3, 0.4, 2.0);
        let v = UnitTangentPSL2::from_matrix(m).unwrap();
        let (x, y) = v.basepoint();
        assert!(close(x, -0.2, 1e-9) && close(y, 1.6, 1e-9), "got ({x}, {y})");
    }

    #[test]
    fn reduce_is_idempotent_and_preserves_det() {
        let v = UnitTangentPSL2::from_chart(0.37, 1.4, 2.2).unwrap();
        let (again, moves) = reduce_matrix(*v.matrix()).unwrap();
        assert_eq!(moves.translations + moves.inversions, 0, "already reduced");
        assert!(close(again.det(), 1.0, 1e-9));
        assert!(again.sign_min_dist(v.matrix()) < 1e-12);
    }

    #[test]
    fn chart_roundtrip_is_the_identity_on_the_domain() {
        for (x, y, t) in [
            (0.0, 1.0, std::f64::consts::FRAC_PI_2),
            (0.3, 1.7, 0.4),
            (-0.45, 0.95, 5.9),
            (0.1, 6.5, 3.3),
        ] {
            let m = matrix_of_chart(x, y, t);
            let (bx, by) = basepoint_of(&m);
            let bt = theta_of(&m);
            assert!(close(bx, x, 1e-12), "x: {bx} vs {x}");
            assert!(close(by, y, 1e-12), "y: {by} vs {y}");
            assert!(angle_gap(bt, t) < 1e-12, "theta: {bt} vs {t}");
            assert!(close(m.det(), 1.0, 1e-12));
        }
    }

    #[test]
    fn one_step_from_base_lands_at_height_e() {
        let v = UnitTangentPSL2::base_upward();
        let w = geodesic_time1(&v).unwrap();
        let (x, y) = w.basepoint();
        assert!(close(x, 0.0, 1e-12));
        assert!(close(y, std::f64::consts::E, 1e-12), "height {y}");
    }

    #[test]
    fn vertical_orbit_climbs_the_cusp_until_the_abort_height() {
        // The upward vertical at i heads straight into the cusp: each step
        // multiplies the height by e and every iterate is already reduced
        // (purely imaginary z with y >= 1 lies in the fundamental domain).
        // Unit hyperbolic displacement per step throughout.
        let mut v = UnitTangentPSL2::base_upward();
        for n in 1..=12 {
            let w = geodesic_time1(&v).unwrap();
            let (x, y) = w.basepoint();
            assert!(x.abs() < 1e-9, "off axis at step {n}: x = {x}");
            assert!(
                close(y, std::f64::consts::E.powi(n), y * 1e-9),
                "height at step {n}: {y}"
            );
            let d = hyperbolic_distance(v.basepoint(), w.basepoint());
            assert!(close(d, 1.0, 1e-9), "displacement {d} at step {n}");
            v = w;
        }
        // Height e^14 > 1e6: the orbit aborts with a cusp diagnostic
        // rather than continuing with degraded precision.
        let mut v = UnitTangentPSL2::base_upward();
        let mut aborted = None;
        for n in 1..=20 {
            match geodesic_time1(&v) {
                Ok(w) => v = w,
                Err(DynError::CuspExcursion { .. }) => {
                    aborted = Some(n);
                    break;
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert_eq!(aborted, Some(14), "cusp abort expected once y exceeds 1e6");
    }

    #[test]
    fn sasaki_distance_vanishes_only_on_equal_cosets() {
        let v = UnitTangentPSL2::from_chart(0.2, 1.3, 1.0).unwrap();
        assert!(sasaki_distance(&v, &v) < 1e-12);
        // The same coset entered through an unreduced representative.
        let shifted = Mat2::T.mul(&Mat2::T.mul(v.matrix()));
        let w = UnitTangentPSL2::from_matrix(shifted).unwrap();
        assert!(sasaki_distance(&v, &w) < 1e-12);
        let u = UnitTangentPSL2::from_chart(0.2, 1.3, 1.1).unwrap();
        assert!(sasaki_distance(&v, &u) > 1e-3);
    }

    #[test]
    fn sasaki_distance_sees_identifications_across_the_domain_boundary() {
        // Points on either side of the |Re z| = 1/2 wall at height 2 are
        // one unit translation apart, hence genuinely close in the quotient.
        let v = UnitTangentPSL2::from_chart(0.499, 2.0, 1.0).unwrap();
        let w = UnitTangentPSL2::from_chart(-0.499, 2.0, 1.0).unwrap();
        let d = sasaki_distance(&v, &w);
        assert!(d < 0.01, "wall identification missed: d = {d}");
    }

    #[test]
    fn flow_is_lipschitz_on_close_window_pairs() {
        // One step expands unstable separations by e; the surrogate
        // distance respects that rate on close pairs in the window.
        let cloud = liouville_sample(400, 99);
        let mut checked = 0;
        for v in cloud.iter().filter(|v| v.height() < 2.5) {
            let (x, y) = v.basepoint();
            let w = match UnitTangentPSL2::from_chart(x + 2e-4, y, v.theta() + 3e-4) {
                Ok(w) => w,
                Err(_) => continue,
            };
            let d0 = sasaki_distance(v, &w);
            if !(1e-6..0.01).contains(&d0) {
                continue;
            }
            let (fv, fw) = (geodesic_time1(v).unwrap(), geodesic_time1(&w).unwrap());
            let d1 = sasaki_distance(&fv, &fw);
            assert!(
                d1 <= std::f64::consts::E * d0 * (1.0 + 1e-6) + 1e-9,
                "expansion {} exceeds e at ({x}, {y})",
                d1 / d0
            );
            checked += 1;
        }
        assert!(checked > 100, "only {checked} pairs exercised");
    }

    #[test]
    fn liouville_acceptance_rate_recovers_the_domain_area() {
        let (_, attempts) = liouville_sample_with_stats(200_000, 31);
        let strip_mass = 2.0 / 3.0f64.sqrt();
        let est = strip_mass * 200_000.0 / attempts as f64;
        let rel = (est - fundamental_domain_area()).abs() / fundamental_domain_area();
        assert!(rel < 0.01, "area estimate {est} off by {rel:.4}");
    }

    #[test]
    fn liouville_high_cusp_mass_matches_the_closed_form() {
        let cloud = liouville_sample(100_000, 7);
        let frac = cloud.iter().filter(|v| v.height() > 2.0).count() as f64 / 1e5;
        // Mass above height 2 is (1/2) / (pi/3) = 3 / (2 pi).
        let exact = 3.0 / (2.0 * std::f64::consts::PI);
        let sigma = (exact * (1.0 - exact) / 1e5).sqrt();
        assert!(
            (frac - exact).abs() < 4.0 * sigma,
            "fraction {frac} vs {exact} (sigma {sigma:.5})"
        );
    }

    #[test]
    fn liouville_samples_are_reduced_and_reproducible() {
        let a = liouville_sample(1000, 5);
        let b = liouville_sample(1000, 5);
        let sys = geodesic_system();
        for (va, vb) in a.iter().zip(&b) {
            assert_eq!(va.to_state(), vb.to_state(), "seeded sampling must replay");
            assert!(sys.contains(&va.to_state()), "unreduced sample {:?}", va.basepoint());
        }
    }

    #[test]
    fn pushforward_preserves_the_high_cusp_mass() {
        // Liouville measure is flow invariant: the image cloud must show
        // the same height statistics.
        let cloud = liouville_sample(100_000, 12);
        let mut pushed = 0usize;
        let mut total = 0usize;
        for v in &cloud {
            if let Ok(w) = geodesic_time1(v) {
                total += 1;
                if w.height() > 2.0 {
                    pushed += 1;
                }
            }
        }
        let frac = pushed as f64 / total as f64;
        let exact = 3.0 / (2.0 * std::f64::consts::PI);
        let sigma = (exact * (1.0 - exact) / total as f64).sqrt();
        assert!(
            (frac - exact).abs() < 4.0 * sigma,
            "pushed fraction {frac} vs {exact}"
        );
    }

    #[test]
    fn window_mass_closed_form() {
        let w = CompactWindow::default_window();
        assert!(close(w.liouville_mass(), 1.0 - 3.0 / (8.0 * std::f64::consts::PI), 1e-15));
        assert!(CompactWindow::new(0.5).is_err(), "windows below height 1 rejected");
    }

    #[test]
    fn jsu_satisfies_the_cocycle_identity() {
        let v = UnitTangentPSL2::from_chart(0.1, 1.2, 0.7).unwrap();
        let gv = geodesic_time1(&v).unwrap();
        for (s, t) in [(1.0, 1.0), (1.0, 2.5), (0.0, 3.0)] {
            let lhs = jsu(&v, s + t);
            let rhs = jsu(&v, s) * jsu(&gv, t);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.abs(),
                "cocycle identity broke at ({s}, {t})"
            );
        }
    }

    #[test]
    fn tangent_cocycle_is_the_adjoint_of_the_flow_step() {
        // Conjugating the frame generators by a1 = diag(e^{1/2}, e^{-1/2})
        // scales (flow, unstable, stable) by (1, e, 1/e); the cocycle
        // matrix must be exactly that diagonal.
        let a1 = flow_matrix(1.0);
        let a1_inv = flow_matrix(-1.0);
        let gens = [
            Mat2::new(0.5, 0.0, 0.0, -0.5),
            Mat2::new(0.0, 1.0, 0.0, 0.0),
            Mat2::new(0.0, 0.0, 1.0, 0.0),
        ];
        let expected = [1.0, std::f64::consts::E, 1.0 / std::f64::consts::E];
        let v = UnitTangentPSL2::base_upward();
        let coc = tangent_cocycle(&v);
        for (i, (g, scale)) in gens.iter().zip(expected).enumerate() {
            // Ad(a1) xi = a1 xi a1^{-1}; the a_t frame flows by right
            // multiplication, so the one-step derivative acts by Ad(a1^{-1})
            // on left translates, equivalently by these scalars on the
            // right-invariant frame.
            let ad = a1.mul(g).mul(&a1_inv);
            let diff = Mat2::new(
                ad.a - scale * g.a,
                ad.b - scale * g.b,
                ad.c - scale * g.c,
                ad.d - scale * g.d,
            );
            assert!(diff.frobenius() < 1e-14, "generator {i} not scaled by {scale}");
            assert!(close(coc[(i, i)], scale, 1e-15));
        }
    }

    #[test]
    fn periodic_orbit_closes_up_with_the_advertised_length() {
        let ell = periodic_orbit_length();
        assert!(close(ell, 1.9248473002384139, 1e-12), "length {ell}");
        let cloud = periodic_orbit_cloud(64);
        // Flowing the base vector by the full period returns to it.
        let start = &cloud[0];
        let around =
            UnitTangentPSL2::from_matrix(start.matrix().mul(&flow_matrix(ell))).unwrap();
        let d = sasaki_distance(start, &around);
        assert!(d < 1e-9, "orbit failed to close: d = {d}");
        // All cloud points are window points of a compact orbit.
        for v in &cloud {
            assert!(v.height() < 3.0, "axis point unexpectedly high: {}", v.height());
        }
    }

    #[test]
    fn chart_box_contains_the_lifted_ball() {
        // Random determinant-tangent perturbations of norm r must land
        // inside the sampling box of the center.
        let mut rng = crate::rng::stream_rng(17, 0);
        let cloud = liouville_sample(60, malformed_seed());
        for v in cloud.iter().filter(|v| v.height() < 4.0) {
            let center = v.to_state();
            let sys = geodesic_system();
            let r = sys.chart_radius(&center).min(0.35);
            if r < 0.05 {
                continue;
            }
            let bx = ChartBox::around(&center, r);
            let m = *v.matrix();
            for _ in 0..200 {
                let mut d = [0.0f64; 4];
                for e in &mut d {
                    *e = rng.gen::<f64>() - 0.5;
                }
                // Project onto the tangent of the determinant-one surface.
                let w = [m.d, -m.c, -m.b, m.a];
                let dot: f64 = d.iter().zip(&w).map(|(a, b)| a * b).sum();
                let wn: f64 = w.iter().map(|a| a * a).sum();
                for (e, wi) in d.iter_mut().zip(&w) {
                    *e -= dot / wn * wi;
                }
                let norm: f64 = d.iter().map(|a| a * a).sum::<f64>().sqrt();
                let scale = 0.999 * r / norm;
                let a = Mat2::new(
                    m.a + scale * d[0],
                    m.b + scale * d[1],
                    m.c + scale * d[2],
                    m.d + scale * d[3],
                );
                let a = a.scale(1.0 / a.det().sqrt());
                if a.sign_min_dist(&m) >= r {
                    continue;
                }
                let (x, y) = basepoint_of(&a);
                let t = theta_of(&a);
                assert!(
                    bx.contains(x, y, t),
                    "ball point ({x}, {y}, {t}) escaped the box at center {:?}, r = {r}",
                    v.basepoint()
                );
            }
        }
    }

    fn malformed_seed() -> u64 {
        41
    }

    #[test]
    fn chart_radius_blocks_self_overlap_near_the_cusp() {
        let sys = geodesic_system();
        let low = StatePoint::from_slice(&[0.1, 1.1, 1.0]);
        let high = StatePoint::from_slice(&[0.1, 6.0, 1.0]);
        let r_low = sys.chart_radius(&low);
        let r_high = sys.chart_radius(&high);
        assert!(r_low > 0.15, "bulk centers should allow r ~ 0.2+, got {r_low}");
        assert!(r_high < r_low, "cusp centers must be capped harder");
        // At the capped radius no candidate word produces a loop shorter
        // than a ball diameter at ball heights.
        let bx = ChartBox::around(&high, r_high);
        let probe = matrix_of_chart(0.1, bx.max_height(), 1.0);
        for gamma in &candidate_words()[1..] {
            let loop_len = gamma.mul(&probe).sign_min_dist(&probe);
            assert!(
                loop_len >= 2.0 * r_high - 1e-9,
                "short loop {loop_len} at capped radius {r_high}"
            );
        }
    }
}
