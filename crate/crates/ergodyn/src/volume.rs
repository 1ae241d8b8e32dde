//! Monte Carlo volumes of dynamical balls.
//!
//! Samples are drawn inside the metric `r`-ball of the center through the
//! model's chart sampler, weighted by reference-density over
//! proposal-density, and classified into the `(n, r)`-balls by a single
//! escape-time walk each. The estimate is the ratio form
//!
//! ```text
//! vol(B_n) ~= V_ref(B_1) * (sum w * a_n) / (sum w)
//! ```
//!
//! whose weights drop out for the flat models (`w = 1` there, giving the
//! plain binomial estimator). Standard errors come from the delta method
//! applied to the ratio.
//!
//! Sampling is batched: every batch of 1024 draws owns a counter-derived
//! RNG stream and is accumulated sequentially, and batch sums are folded
//! in index order afterwards, so results are bit-identical for a given
//! seed no matter how many threads participate.

use rayon::prelude::*;

use crate::error::{DynError, Result};
use crate::point::StatePoint;
use crate::rng::{stream_rng, streams};
use crate::system::{escape_time, iterate, SystemModel};

const BATCH: usize = 1024;

/// Accepted-count floor below which an estimate is flagged unresolved.
pub const MIN_ACCEPTED: u64 = 8;

/// One Monte Carlo ball-volume estimate.
#[derive(Clone, Debug, serde::Serialize)]
pub struct VolumeEstimate {
    /// Orbit length of the ball (n = 1 is the metric ball).
    pub n: usize,
    /// Radius requested by the caller.
    pub radius_requested: f64,
    /// Radius actually used after the chart-validity cap.
    pub radius_used: f64,
    /// Estimated reference volume.
    pub value: f64,
    /// Delta-method standard error of `value`.
    pub std_err: f64,
    /// Total proposals classified.
    pub samples: usize,
    /// Proposals that stayed in the ball.
    pub accepted: u64,
    /// False when too few acceptances support the value; unresolved
    /// estimates are reported, never silently dropped or zeroed.
    pub resolved: bool,
}

struct BatchSums {
    sw: f64,
    sww: f64,
    swa: Vec<f64>,
    swwa: Vec<f64>,
    acc: Vec<u64>,
}

/// Estimates the reference volume of `B_n(center, r)` for every `n` in
/// `n_list` from one shared set of `n_samples` draws. All `n` must be at
/// least 1; the escape-time trick prices them in a single orbit walk per
/// draw. Distinct estimates should get distinct seeds.
pub fn ball_volume_profile(
    system: &dyn SystemModel,
    center: &StatePoint,
    radius: f64,
    n_list: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<VolumeEstimate>> {
    if n_list.is_empty() {
        return Err(DynError::invalid("n_list", "at least one ball length required"));
    }
    if n_list.iter().any(|&n| n == 0) {
        return Err(DynError::invalid("n_list", "ball lengths start at 1"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(DynError::invalid("radius", format!("positive radius required, got {radius}")));
    }
    if n_samples == 0 {
        return Err(DynError::invalid("n_samples", "at least one sample required"));
    }
    let radius_used = radius.min(system.chart_radius(center));
    if radius_used < 1e-6 {
        return Err(DynError::unresolved(format!(
            "chart radius collapsed to {radius_used:.2e} at the requested center"
        )));
    }
    let n_max = *n_list.iter().max().expect("nonempty");
    let center_orbit = iterate(system, center, n_max)?;
    let v_ref = system.ref_volume_of_ball(center, radius_used);

    let n_batches = n_samples.div_ceil(BATCH);
    let sums: Vec<BatchSums> = (0..n_batches)
        .into_par_iter()
        .map(|b| -> Result<BatchSums> {
            let mut rng = stream_rng(seed, streams::VOLUME_BASE + b as u64);
            let len = BATCH.min(n_samples - b * BATCH);
            let mut s = BatchSums {
                sw: 0.0,
                sww: 0.0,
                swa: vec![0.0; n_list.len()],
                swwa: vec![0.0; n_list.len()],
                acc: vec![0; n_list.len()],
            };
            for _ in 0..len {
                let (p, w) = system.chart_sample(center, radius_used, &mut rng);
                let tau = escape_time(system, &center_orbit, &p, radius_used)?;
                s.sw += w;
                s.sww += w * w;
                for (j, &n) in n_list.iter().enumerate() {
                    if tau >= n {
                        s.swa[j] += w;
                        s.swwa[j] += w * w;
                        s.acc[j] += 1;
                    }
                }
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sw = 0.0;
    let mut sww = 0.0;
    let mut swa = vec![0.0; n_list.len()];
    let mut swwa = vec![0.0; n_list.len()];
    let mut acc = vec![0u64; n_list.len()];
    for s in &sums {
        sw += s.sw;
        sww += s.sww;
        for j in 0..n_list.len() {
            swa[j] += s.swa[j];
            swwa[j] += s.swwa[j];
            acc[j] += s.acc[j];
        }
    }

    Ok(n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let ratio = swa[j] / sw;
            let var_num = (1.0 - ratio).powi(2) * swwa[j] + ratio * ratio * (sww - swwa[j]);
            VolumeEstimate {
                n,
                radius_requested: radius,
                radius_used,
                value: v_ref * ratio,
                std_err: v_ref * var_num.sqrt() / sw,
                samples: n_samples,
                accepted: acc[j],
                resolved: acc[j] >= MIN_ACCEPTED,
            }
        })
        .collect())
}

/// Single-length convenience wrapper over [`ball_volume_profile`].
pub fn ball_volume(
    system: &dyn SystemModel,
    center: &StatePoint,
    radius: f64,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    Ok(ball_volume_profile(system, center, radius, &[n], n_samples, seed)?
        .pop()
        .expect("one estimate per requested length"))
}
