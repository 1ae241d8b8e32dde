//! Entropy estimation from sample clouds.
//!
//! Three routes to the same number, sharing only the dynamical-ball
//! definition so they can check each other:
//!
//! * covering growth: greedy `(n, r)`-covers of a cloud, pruned to carry
//!   `1 - delta` of the empirical mass, with the count's log growth in `n`
//!   as the estimate;
//! * shadowing masses: empirical measure of the dynamical balls around
//!   panel centers, with the decay rate of `log mass` as the estimate;
//! * volume rates: Monte Carlo reference volumes of balls around a point,
//!   restricted to times when the orbit returns to a compact window, with
//!   the top-end secant slope of `-log volume` as the estimate.
//!
//! Structural guarantees the tests lean on: the greedy cover is never
//! larger than the first-fit separated set (the set-cover pass only uses
//! fewer balls), any two `r`-separated points land in distinct open
//! `r/2`-balls of any cover (so packing at `r` is bounded by covering at
//! `r/2`), and mass-pruned counts at growing `delta` are nested prefixes
//! of one deterministic pick order, hence monotone.
//!
//! Cloud points whose orbits flee past the height cap before depth `n`
//! cannot be classified and are excluded from the universe; their number
//! is reported in diagnostics, never silently dropped.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;

use crate::error::{DynError, Result};
use crate::point::StatePoint;
use crate::system::{escape_time, iterate, OrbitSegment, SystemModel};
use crate::volume::ball_volume_profile;

/// Estimators refuse clouds smaller than this.
pub const MIN_CLOUD: usize = 1000;

/// Ball-occupancy floor below which a shadowing mass is unresolved.
pub const MIN_BALL_COUNT: u64 = 50;

/// A pruned cover count exceeding this fraction of the cloud is flagged as
/// saturated: the balls resolve single samples, not the measure.
pub const SATURATION_FRACTION: f64 = 1.0 / 3.0;

/// One `(r, n)` cell of an entropy table.
#[derive(Clone, Debug, serde::Serialize)]
pub struct EntropyRow {
    pub r: f64,
    pub n: usize,
    pub value: f64,
    pub std_err: f64,
    pub resolved: bool,
}

/// An entropy estimate with its full diagnostic table.
#[derive(Clone, Debug, serde::Serialize)]
pub struct EntropyEstimate {
    pub method: String,
    pub value: f64,
    pub std_err: f64,
    pub resolved: bool,
    pub rows: Vec<EntropyRow>,
    pub diagnostics: BTreeMap<String, f64>,
}

/// Escape time with cusp aborts clamped: an orbit that flees the chart at
/// step `i` was inside for every earlier check, and at the heights involved
/// it is metrically far from any bounded center, so the walk ends there.
fn escape_clamped(
    system: &dyn SystemModel,
    center_orbit: &OrbitSegment,
    p: &StatePoint,
    r: f64,
) -> usize {
    match escape_time(system, center_orbit, p, r) {
        Ok(t) => t,
        Err(DynError::CuspExcursion { index, .. }) | Err(DynError::Divergence { index }) => index,
        Err(_) => 0,
    }
}

fn validate_cloud(cloud: &[StatePoint], n: usize, r: f64) -> Result<()> {
    if cloud.len() < MIN_CLOUD {
        return Err(DynError::invalid(
            "cloud",
            format!("need at least {MIN_CLOUD} samples, got {}", cloud.len()),
        ));
    }
    if n == 0 {
        return Err(DynError::invalid("n", "dynamical depth starts at 1"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(DynError::invalid("r", format!("positive radius required, got {r}")));
    }
    Ok(())
}

/// First-fit maximal `(n, r)`-separated subset of the cloud: pairwise
/// dynamical distance at least `r`, and every classifiable cloud point
/// within `r` of some member. Returns indices plus the count of points
/// lost to the height cap before depth `n`.
pub struct SeparatedSet {
    pub indices: Vec<usize>,
    pub lost: usize,
}

struct CoverScaffold {
    center_indices: Vec<usize>,
    center_orbits: Vec<OrbitSegment>,
    usable: Vec<bool>,
    lost: usize,
}

fn first_fit_scan(
    system: &dyn SystemModel,
    cloud: &[StatePoint],
    n: usize,
    r: f64,
) -> CoverScaffold {
    let mut center_indices: Vec<usize> = Vec::new();
    let mut center_orbits: Vec<OrbitSegment> = Vec::new();
    let mut usable = vec![true; cloud.len()];
    let mut lost = 0usize;
    for (i, p) in cloud.iter().enumerate() {
        let covered = center_orbits
            .iter()
            .any(|orbit| escape_clamped(system, orbit, p, r) >= n);
        if covered {
            continue;
        }
        match iterate(system, p, n) {
            Ok(orbit) => {
                center_indices.push(i);
                center_orbits.push(orbit);
            }
            Err(_) => {
                usable[i] = false;
                lost += 1;
            }
        }
    }
    CoverScaffold {
        center_indices,
        center_orbits,
        usable,
        lost,
    }
}

/// See [`SeparatedSet`].
pub fn separated_set(
    system: &dyn SystemModel,
    cloud: &[StatePoint],
    n: usize,
    r: f64,
) -> Result<SeparatedSet> {
    validate_cloud(cloud, n, r)?;
    let s = first_fit_scan(system, cloud, n, r);
    Ok(SeparatedSet {
        indices: s.center_indices,
        lost: s.lost,
    })
}

fn ball_memberships(
    system: &dyn SystemModel,
    cloud: &[StatePoint],
    scaffold: &CoverScaffold,
    n: usize,
    r: f64,
) -> Vec<Vec<u32>> {
    scaffold
        .center_orbits
        .par_iter()
        .map(|orbit| {
            let mut members = Vec::new();
            for (i, p) in cloud.iter().enumerate() {
                if scaffold.usable[i] && escape_clamped(system, orbit, p, r) >= n {
                    members.push(i as u32);
                }
            }
            members
        })
        .collect()
}

/// Greedy set-cover pick order over the separated-set balls: each pick
/// covers the most still-uncovered points, ties broken by smaller center
/// position. Returns (picked center positions, newly covered per pick).
fn greedy_pick_order(memberships: &[Vec<u32>], usable: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut uncovered: Vec<bool> = usable.to_vec();
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = memberships
        .iter()
        .enumerate()
        .map(|(k, m)| (m.len(), Reverse(k)))
        .collect();
    let mut picks = Vec::new();
    let mut gains = Vec::new();
    while let Some((claimed, Reverse(k))) = heap.pop() {
        if claimed == 0 {
            break;
        }
        let actual = memberships[k]
            .iter()
            .filter(|&&i| uncovered[i as usize])
            .count();
        if actual < claimed {
            if actual > 0 {
                heap.push((actual, Reverse(k)));
            }
            continue;
        }
        for &i in &memberships[k] {
            uncovered[i as usize] = false;
        }
        picks.push(k);
        gains.push(actual);
    }
    (picks, gains)
}

/// Covering and packing counts of the cloud at one `(n, r)` cell. The
/// reported covering count is the greedy set-cover size, never larger than
/// the separated (packing) count.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CoverCount {
    pub covering: usize,
    pub separated: usize,
    pub lost: usize,
}

/// See [`CoverCount`].
pub fn covering_count(
    system: &dyn SystemModel,
    cloud: &[StatePoint],
    n: usize,
    r: f64,
) -> Result<CoverCount> {
    validate_cloud(cloud, n, r)?;
    let scaffold = first_fit_scan(system, cloud, n, r);
    let memberships = ball_memberships(system, cloud, &scaffold, n, r);
    let (picks, _) = greedy_pick_order(&memberships, &scaffold.usable);
    Ok(CoverCount {
        covering: picks.len().min(scaffold.center_indices.len()),
        separated: scaffold.center_indices.len(),
        lost: scaffold.lost,
    })
}

/// Minimal greedy count of `(n, r)`-balls carrying `1 - delta` of the
/// classifiable empirical mass.
#[derive(Clone, Debug, serde::Serialize)]
pub struct KatokCell {
    pub r: f64,
    pub n: usize,
    pub count: usize,
    pub covered: usize,
    pub universe: usize,
    pub lost: usize,
    /// Count within a factor of the cloud size itself: the cloud cannot
    /// resolve the measure at this cell.
    pub saturated: bool,
    pub resolved: bool,
}

/// See [`KatokCell`].
pub fn katok_cell(
    system: &dyn SystemModel,
    cloud: &[StatePoint],
    r: f64,
    n: usize,
    delta: f64,
) -> Result<KatokCell> {
    validate_cloud(cloud, n, r)?;
    if !(0.0 < delta && delta < 1.0) {
        return Err(DynError::invalid("delta", format!("delta in (0, 1) required, got {delta}")));
    }
    let scaffold = first_fit_scan(system, cloud, n, r);
    let universe = cloud.len() - scaffold.lost;
    let memberships = ball_memberships(system, cloud, &scaffold, n, r);
    let (_, gains) = greedy_pick_order(&memberships, &scaffold.usable);
    let target = (((1.0 - delta) * universe as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut covered = 0usize;
    let mut count = 0usize;
    for g in &gains {
        if covered >= target {
            break;
        }
        covered += g;
        count += 1;
    }
    let reached = covered >= target;
    let saturated = (count as f64) > SATURATION_FRACTION * universe as f64;
    Ok(KatokCell {
        r,
        n,
        count,
        covered,
        universe,
        lost: scaffold.lost,
        saturated,
        resolved: reached && !saturated && count >= 3,
    })
}

/// Slope and residual standard error of a least-squares line.
fn lsq_slope_se(pts: &[(f64, f64)]) -> (f64, f64) {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if pts.len() < 3 {
        return (slope, 0.0);
    }
    let icept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - icept - slope * p.0).powi(2))
        .sum();
    (slope, (ss_res / (k - 2.0) / sxx).sqrt())
}

/// Covering-growth entropy: pruned cover counts over the `(r, n)` grid,
/// with the estimate read off the smallest radius whose upper-half depths
/// resolve. `r_list` is scanned in ascending order; the first radius with
/// at least three resolved cells in the upper half of `n_list` provides
/// the least-squares slope of `log count` against `n`.
pub fn katok_entropy(
    system: &dyn SystemModel,
    cloud: &[StatePoint],
    r_list: &[f64],
    n_list: &[usize],
    delta: f64,
) -> Result<EntropyEstimate> {
    if r_list.is_empty() || n_list.len() < 2 {
        return Err(DynError::invalid(
            "grid",
            "need at least one radius and two depths",
        ));
    }
    let mut radii = r_list.to_vec();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut depths = n_list.to_vec();
    depths.sort_unstable();

    let mut rows = Vec::new();
    let mut cells: BTreeMap<(usize, usize), KatokCell> = BTreeMap::new();
    for (ri, &r) in radii.iter().enumerate() {
        for (ni, &n) in depths.iter().enumerate() {
            let cell = katok_cell(system, cloud, r, n, delta)?;
            rows.push(EntropyRow {
                r,
                n,
                value: (cell.count.max(1) as f64).ln(),
                std_err: 0.0,
                resolved: cell.resolved,
            });
            cells.insert((ri, ni), cell);
        }
    }

    let upper_start = depths.len() / 2;
    let mut value = f64::NAN;
    let mut std_err = f64::NAN;
    let mut resolved = false;
    let mut chosen_r = f64::NAN;
    for ri in 0..radii.len() {
        let pts: Vec<(f64, f64)> = (upper_start..depths.len())
            .filter_map(|ni| {
                let cell = &cells[&(ri, ni)];
                cell.resolved
                    .then(|| (depths[ni] as f64, (cell.count as f64).ln()))
            })
            .collect();
        if pts.len() >= 3 {
            let (s, se) = lsq_slope_se(&pts);
            value = s;
            std_err = se;
            resolved = true;
            chosen_r = radii[ri];
            break;
        }
    }

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("delta".to_string(), delta);
    diagnostics.insert("chosen_r".to_string(), chosen_r);
    diagnostics.insert(
        "lost".to_string(),
        cells.values().map(|c| c.lost).max().unwrap_or(0) as f64,
    );
    diagnostics.insert(
        "saturated_cells".to_string(),
        cells.values().filter(|c| c.saturated).count() as f64,
    );
    Ok(EntropyEstimate {
        method: "katok".to_string(),
        value,
        std_err,
        resolved,
        rows,
        diagnostics,
    })
}

/// Cloud counts of the dynamical balls around one center, one per depth in
/// `n_list` (shared escape-time walks). Errors if the center orbit itself
/// cannot be followed to the deepest requested ball.
pub fn local_mass_counts(
    system: &dyn SystemModel,
    cloud: &[StatePoint],
    center: &StatePoint,
    r: f64,
    n_list: &[usize],
) -> Result<Vec<u64>> {
    let n_max = *n_list
        .iter()
        .max()
        .ok_or_else(|| DynError::invalid("n_list", "at least one depth required"))?;
    validate_cloud(cloud, n_max, r)?;
    let orbit = iterate(system, center, n_max)?;
    let counts: Vec<u64> = cloud
        .par_chunks(4096)
        .map(|chunk| {
            let mut local = vec![0u64; n_list.len()];
            for p in chunk {
                let tau = escape_clamped(system, &orbit, p, r);
                for (j, &n) in n_list.iter().enumerate() {
                    if tau >= n {
                        local[j] += 1;
                    }
                }
            }
            local
        })
        .reduce(
            || vec![0u64; n_list.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = values.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

fn median_abs_dev(values: &[f64], center: f64) -> f64 {
    let mut devs: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    median(&mut devs)
}

/// Shadowing-mass entropy: for a panel of cloud centers, the empirical
/// measure of their `(n, r)`-balls, and per-center least-squares decay
/// rates of `log mass` over the depths whose counts stay above
/// [`MIN_BALL_COUNT`]. The estimate is the panel median; a steeper
/// consecutive-secant surrogate is reported in the diagnostics.
pub fn brin_katok_local(
    system: &dyn SystemModel,
    cloud: &[StatePoint],
    panel_size: usize,
    r: f64,
    n_list: &[usize],
) -> Result<EntropyEstimate> {
    if panel_size < 5 {
        return Err(DynError::invalid("panel_size", "panels start at 5 centers"));
    }
    let mut depths = n_list.to_vec();
    depths.sort_unstable();
    if depths.len() < 3 {
        return Err(DynError::invalid("n_list", "need at least three depths"));
    }
    let n_max = *depths.last().unwrap();
    validate_cloud(cloud, n_max, r)?;

    // Cloud order is already i.i.d., so the panel is its prefix (skipping
    // centers whose orbits cannot be followed).
    let mut slopes = Vec::new();
    let mut uppers = Vec::new();
    let mut per_depth: Vec<Vec<f64>> = vec![Vec::new(); depths.len()];
    let mut attempted = 0usize;
    let mut skipped = 0usize;
    let total = cloud.len() as f64;
    for center in cloud.iter() {
        if slopes.len() >= panel_size {
            break;
        }
        attempted += 1;
        if attempted > cloud.len() {
            break;
        }
        let counts = match local_mass_counts(system, cloud, center, r, &depths) {
            Ok(c) => c,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let pts: Vec<(f64, f64)> = depths
            .iter()
            .zip(&counts)
            .filter(|(_, &c)| c >= MIN_BALL_COUNT)
            .map(|(&n, &c)| (n as f64, -((c as f64 / total).ln())))
            .collect();
        for (j, &c) in counts.iter().enumerate() {
            if c >= MIN_BALL_COUNT {
                per_depth[j].push(-((c as f64 / total).ln()) / depths[j] as f64);
            }
        }
        if pts.len() < 3 {
            skipped += 1;
            continue;
        }
        let (slope, _) = lsq_slope_se(&pts);
        slopes.push(slope);
        // Steepest consecutive secant over the deeper half: an upper
        // (limsup-flavored) surrogate for the same limit.
        let secants: Vec<f64> = pts
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        if !secants.is_empty() {
            let top = &secants[secants.len() / 2..];
            uppers.push(top.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
    }

    let resolved = slopes.len() >= panel_size.div_ceil(2) && slopes.len() >= 5;
    let value = median(&mut slopes.clone());
    let mad = median_abs_dev(&slopes, value);
    let rows: Vec<EntropyRow> = depths
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let rates = &mut per_depth[j].clone();
            let v = median(rates);
            EntropyRow {
                r,
                n,
                value: v,
                std_err: if rates.is_empty() { 0.0 } else { median_abs_dev(rates, v) },
                resolved: per_depth[j].len() * 2 >= slopes.len().max(1),
            }
        })
        .collect();

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("panel_used".to_string(), slopes.len() as f64);
    diagnostics.insert("panel_skipped".to_string(), skipped as f64);
    diagnostics.insert("spread_mad".to_string(), mad);
    diagnostics.insert("upper_median".to_string(), median(&mut uppers.clone()));
    Ok(EntropyEstimate {
        method: "brin-katok".to_string(),
        value,
        std_err: mad,
        resolved,
        rows,
        diagnostics,
    })
}

pub use crate::system::ReturnWindow;

/// Local volume rates at a single point: `-log vol(B_n(x, r)) / n` over
/// the depths whose orbit returns to the window.
#[derive(Clone, Debug, serde::Serialize)]
pub struct LocalVolumeRates {
    pub rows: Vec<EntropyRow>,
    /// Steepest consecutive secant of `-log volume` over the deeper half of
    /// the resolved depths: the limsup-flavored local estimate.
    pub value: f64,
    pub resolved: bool,
    /// Depths that passed the return filter.
    pub returning: Vec<usize>,
}

/// See [`LocalVolumeRates`]. Errors with [`DynError::NoReturningTimes`]
/// when no requested depth returns to the window.
pub fn riemannian_local_entropy(
    system: &dyn SystemModel,
    x: &StatePoint,
    window: ReturnWindow,
    r: f64,
    n_list: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<LocalVolumeRates> {
    let mut depths = n_list.to_vec();
    depths.sort_unstable();
    if depths.is_empty() || depths[0] == 0 {
        return Err(DynError::invalid("n_list", "depths start at 1"));
    }
    let n_max = *depths.last().unwrap();
    let orbit = iterate(system, x, n_max + 1)?;
    let returning: Vec<usize> = depths
        .iter()
        .copied()
        .filter(|&n| window.contains(orbit.get(n)))
        .collect();
    if returning.is_empty() {
        return Err(DynError::NoReturningTimes);
    }
    let estimates = ball_volume_profile(system, x, r, &returning, n_samples, seed)?;
    let rows: Vec<EntropyRow> = estimates
        .iter()
        .map(|e| EntropyRow {
            r,
            n: e.n,
            value: if e.value > 0.0 { -e.value.ln() / e.n as f64 } else { f64::NAN },
            std_err: if e.value > 0.0 { e.std_err / (e.value * e.n as f64) } else { f64::NAN },
            resolved: e.resolved,
        })
        .collect();
    let pts: Vec<(f64, f64)> = estimates
        .iter()
        .filter(|e| e.resolved && e.value > 0.0)
        .map(|e| (e.n as f64, -e.value.ln()))
        .collect();
    let secants: Vec<f64> = pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let (value, resolved) = if secants.is_empty() {
        (f64::NAN, false)
    } else {
        let top = &secants[secants.len() / 2..];
        (top.iter().cloned().fold(f64::NEG_INFINITY, f64::max), true)
    };
    Ok(LocalVolumeRates {
        rows,
        value,
        resolved,
        returning,
    })
}

/// Panel wrapper over [`riemannian_local_entropy`]: centers are the first
/// window points of the cloud whose chart accommodates the full radius,
/// the estimate is the median of the resolved per-center values.
pub fn riemannian_panel(
    system: &dyn SystemModel,
    cloud: &[StatePoint],
    panel_size: usize,
    window: ReturnWindow,
    r: f64,
    n_list: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<EntropyEstimate> {
    if panel_size < 5 {
        return Err(DynError::invalid("panel_size", "panels start at 5 centers"));
    }
    let n_max = *n_list
        .iter()
        .max()
        .ok_or_else(|| DynError::invalid("n_list", "at least one depth required"))?;
    validate_cloud(cloud, n_max, r)?;

    let mut values = Vec::new();
    let mut per_depth: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut skipped = 0usize;
    let mut center_seed = 0u64;
    for center in cloud.iter() {
        if values.len() >= panel_size {
            break;
        }
        if !window.contains(center) || system.chart_radius(center) < r {
            continue;
        }
        center_seed += 1;
        match riemannian_local_entropy(
            system,
            center,
            window,
            r,
            n_list,
            n_samples,
            seed.wrapping_add(center_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        ) {
            Ok(local) if local.resolved => {
                values.push(local.value);
                for row in &local.rows {
                    if row.resolved {
                        per_depth.entry(row.n).or_default().push(row.value);
                    }
                }
            }
            Ok(_) | Err(DynError::NoReturningTimes) => skipped += 1,
            Err(DynError::CuspExcursion { .. }) | Err(DynError::Divergence { .. }) => {
                skipped += 1
            }
            Err(e) => return Err(e),
        }
    }
    let resolved = values.len() >= panel_size.div_ceil(2) && values.len() >= 5;
    let value = median(&mut values.clone());
    let mad = median_abs_dev(&values, value);
    let rows: Vec<EntropyRow> = per_depth
        .iter()
        .map(|(&n, rates)| {
            let v = median(&mut rates.clone());
            EntropyRow {
                r,
                n,
                value: v,
                std_err: median_abs_dev(rates, v),
                resolved: rates.len() * 2 >= values.len().max(1),
            }
        })
        .collect();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("panel_used".to_string(), values.len() as f64);
    diagnostics.insert("panel_skipped".to_string(), skipped as f64);
    diagnostics.insert("spread_mad".to_string(), mad);
    Ok(EntropyEstimate {
        method: "riemannian".to_string(),
        value,
        std_err: mad,
        resolved,
        rows,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{doubling_system, geodesic_system, IdentitySystem, UnitTangentPSL2};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn uniform_circle_cloud(n: usize, seed: u64) -> Vec<StatePoint> {
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| StatePoint::scalar(rng.gen())).collect()
    }

    #[test]
    fn cover_counts_bracket_the_interval_count() {
        let sys = doubling_system();
        let cloud = uniform_circle_cloud(3000, 1);
        let cc = covering_count(&sys, &cloud, 1, 0.05).unwrap();
        // Ten open arcs of length 0.1 are needed to cover 3000 uniform
        // samples, and no 0.05-separated set on the circle beats 20.
        assert!(cc.covering >= 10, "covering {}", cc.covering);
        assert!(cc.covering <= cc.separated);
        assert!(cc.separated <= 20, "separated {}", cc.separated);
        assert_eq!(cc.lost, 0);
    }

    #[test]
    fn packing_at_r_is_bounded_by_covering_at_half_r() {
        let sys = doubling_system();
        let cloud = uniform_circle_cloud(2000, 2);
        for n in [1usize, 2, 3] {
            for r in [0.2, 0.1, 0.05] {
                let cc_r = covering_count(&sys, &cloud, n, r).unwrap();
                let cc_half = covering_count(&sys, &cloud, n, r / 2.0).unwrap();
                assert!(
                    cc_r.covering <= cc_r.separated,
                    "cover exceeded packing at (n, r) = ({n}, {r})"
                );
                assert!(
                    cc_r.separated <= cc_half.covering,
                    "packing at r exceeded covering at r/2 at (n, r) = ({n}, {r})"
                );
            }
        }
    }

    #[test]
    fn pruned_counts_shrink_as_more_mass_may_be_discarded() {
        let sys = doubling_system();
        let cloud = uniform_circle_cloud(4000, 3);
        let mut prev = usize::MAX;
        for delta in [0.02, 0.05, 0.1, 0.2, 0.4] {
            let cell = katok_cell(&sys, &cloud, 0.05, 3, delta).unwrap();
            assert!(cell.count <= prev, "count grew at delta {delta}");
            prev = cell.count;
        }
    }

    #[test]
    fn covering_growth_recovers_the_doubling_entropy_roughly() {
        let sys = doubling_system();
        let cloud = uniform_circle_cloud(20_000, 4);
        let est = katok_entropy(&sys, &cloud, &[0.1], &[2, 3, 4, 5, 6, 7, 8], 0.1).unwrap();
        assert!(est.resolved, "diagnostics {:?}", est.diagnostics);
        let rel = (est.value - std::f64::consts::LN_2).abs() / std::f64::consts::LN_2;
        assert!(rel < 0.15, "estimate {} (rel {rel:.3})", est.value);
    }

    #[test]
    fn shadowing_masses_recover_the_doubling_entropy_roughly() {
        let sys = doubling_system();
        let cloud = uniform_circle_cloud(30_000, 5);
        let est = brin_katok_local(&sys, &cloud, 10, 0.1, &[2, 3, 4, 5, 6, 7, 8]).unwrap();
        assert!(est.resolved, "diagnostics {:?}", est.diagnostics);
        let rel = (est.value - std::f64::consts::LN_2).abs() / std::f64::consts::LN_2;
        assert!(rel < 0.15, "estimate {} (rel {rel:.3})", est.value);
    }

    #[test]
    fn identity_masses_are_depth_independent_so_entropy_vanishes() {
        let sys = IdentitySystem::new(2);
        let mut rng = stream_rng(6, 0);
        let cloud: Vec<StatePoint> = (0..5000)
            .map(|_| StatePoint::from_slice(&[rng.gen(), rng.gen()]))
            .collect();
        let est = brin_katok_local(&sys, &cloud, 8, 0.2, &[1, 3, 5, 7]).unwrap();
        assert!(est.resolved);
        assert!(est.value.abs() < 1e-12, "identity entropy {}", est.value);
    }

    #[test]
    fn volume_rates_recover_the_doubling_entropy() {
        let sys = doubling_system();
        let x = StatePoint::scalar(0.371);
        let rates = riemannian_local_entropy(
            &sys,
            &x,
            ReturnWindow::Everywhere,
            0.1,
            &[2, 4, 6, 8, 10],
            400_000,
            9,
        )
        .unwrap();
        assert!(rates.resolved);
        assert_eq!(rates.returning, vec![2, 4, 6, 8, 10]);
        let rel = (rates.value - std::f64::consts::LN_2).abs() / std::f64::consts::LN_2;
        assert!(rel < 0.1, "value {} (rel {rel:.3})", rates.value);
    }

    #[test]
    fn cusp_bound_orbits_have_no_returning_times() {
        let sys = geodesic_system();
        let x = UnitTangentPSL2::base_upward().to_state();
        let err = riemannian_local_entropy(
            &sys,
            &x,
            ReturnWindow::HeightBelow(1.5),
            0.2,
            &[2, 4],
            1000,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, DynError::NoReturningTimes), "got {err}");
    }
}
