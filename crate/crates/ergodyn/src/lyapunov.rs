//! Lyapunov spectra and linearized ball volumes.
//!
//! Spectra come from the Benettin QR scheme: push an orthonormal frame
//! through the Jacobian cocycle, re-orthonormalize each step, and average
//! the log diagonal of the triangular factors after a burn-in that lets
//! the frame lock onto the Oseledets directions. Tangent balls — the
//! intersections `{ v : |P_i v| < r, i < n }` of cocycle-product ellipsoid
//! preimages — get Monte Carlo volumes with an importance box built from
//! the most contracting product, plus independent exact oracles (interval
//! arithmetic in dimension one, radial-minimum areas in dimension two,
//! sliced radial areas for diagonal cocycles) so the two routes can be
//! compared without sharing code.

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;

use crate::error::{DynError, Result};
use crate::point::StatePoint;
use crate::radial::{ellipse_intersection_area, interval_intersection_halfwidth};
use crate::rng::{stream_rng, streams};
use crate::system::{iterate, SystemModel};
use crate::volume::{VolumeEstimate, MIN_ACCEPTED};

/// Exponent separation below which two directions are reported as one
/// cluster with multiplicity.
pub const CLUSTER_GAP: f64 = 0.05;

/// Exponents above this threshold count as expanding in [`chi_plus`].
pub const POSITIVE_THRESHOLD: f64 = 0.02;

/// A numerically estimated Lyapunov spectrum.
#[derive(Clone, Debug, serde::Serialize)]
pub struct LyapunovSpectrum {
    /// Per-direction exponents, sorted descending.
    pub exponents: Vec<f64>,
    /// Distinct exponents after clustering nearby directions.
    pub cluster_values: Vec<f64>,
    /// Multiplicity of each cluster, aligned with `cluster_values`.
    pub multiplicities: Vec<usize>,
    /// Max per-direction drift between the half-run and full-run averages;
    /// small residuals indicate the averages have settled.
    pub residual: f64,
    pub n_steps: usize,
}

impl LyapunovSpectrum {
    fn from_sums(full: &[f64], half: &[f64], n_full: usize, n_half: usize) -> Self {
        let mut exps: Vec<f64> = full.iter().map(|s| s / n_full as f64).collect();
        exps.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut half_exps: Vec<f64> = half.iter().map(|s| s / n_half as f64).collect();
        half_exps.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let residual = exps
            .iter()
            .zip(&half_exps)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);

        let mut cluster_values: Vec<f64> = Vec::new();
        let mut multiplicities: Vec<usize> = Vec::new();
        for &e in &exps {
            match cluster_values.last_mut() {
                Some(last) => {
                    let k = *multiplicities.last().unwrap() as f64;
                    if (*last - e).abs() <= CLUSTER_GAP {
                        *last = (*last * k + e) / (k + 1.0);
                        *multiplicities.last_mut().unwrap() += 1;
                    } else {
                        cluster_values.push(e);
                        multiplicities.push(1);
                    }
                }
                None => {
                    cluster_values.push(e);
                    multiplicities.push(1);
                }
            }
        }
        LyapunovSpectrum {
            exponents: exps,
            cluster_values,
            multiplicities,
            residual,
            n_steps: n_full,
        }
    }
}

/// Sum of the expanding cluster exponents weighted by multiplicity.
pub fn chi_plus(spectrum: &LyapunovSpectrum) -> f64 {
    spectrum
        .cluster_values
        .iter()
        .zip(&spectrum.multiplicities)
        .filter(|(v, _)| **v > POSITIVE_THRESHOLD)
        .map(|(v, m)| v * *m as f64)
        .sum()
}

/// Re-orthonormalizes `m` in place, returning the log diagonal of the
/// triangular factor with the sign convention that makes it positive.
fn qr_step(m: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let dim = m.nrows();
    let qr = m.qr();
    let mut q = qr.q();
    let r = qr.r();
    let mut logs = Vec::with_capacity(dim);
    for j in 0..dim {
        let d = r[(j, j)];
        if d < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
        logs.push(d.abs().ln());
    }
    (q, logs)
}

/// Benettin QR estimate of the Lyapunov spectrum along the orbit of `x0`.
/// The seed randomizes the initial frame; a burn-in of
/// `min(n_steps / 10, 200)` steps is excluded from the averages so the
/// frame can align before increments count.
pub fn qr_spectrum(
    system: &dyn SystemModel,
    x0: &StatePoint,
    n_steps: usize,
    seed: u64,
) -> Result<LyapunovSpectrum> {
    if n_steps < 10 {
        return Err(DynError::invalid("n_steps", "need at least 10 steps"));
    }
    let dim = system.dim();
    let orbit = iterate(system, x0, n_steps)?;
    let mut rng = stream_rng(seed, streams::LYAPUNOV);
    let gauss = DMatrix::from_fn(dim, dim, |_, _| {
        // Box-Muller from two uniforms; only frame genericity matters.
        let u: f64 = rand::Rng::gen_range(&mut rng, 1e-12..1.0);
        let v: f64 = rand::Rng::gen(&mut rng);
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    });
    let (mut q, _) = qr_step(gauss);

    let burn = (n_steps / 10).min(200);
    let half_mark = burn + (n_steps - burn) / 2;
    let mut sums = vec![0.0f64; dim];
    let mut half_sums = vec![0.0f64; dim];
    for i in 0..n_steps {
        let (next_q, logs) = qr_step(system.jacobian(orbit.get(i)) * &q);
        q = next_q;
        if i >= burn {
            for j in 0..dim {
                sums[j] += logs[j];
                if i < half_mark {
                    half_sums[j] += logs[j];
                }
            }
        }
    }
    Ok(LyapunovSpectrum::from_sums(
        &sums,
        &half_sums,
        n_steps - burn,
        half_mark - burn,
    ))
}

/// Cocycle products `P_0 = I, P_{i+1} = J(x_i) P_i` along the orbit.
pub fn cocycle_products(
    system: &dyn SystemModel,
    x: &StatePoint,
    n: usize,
) -> Result<Vec<DMatrix<f64>>> {
    if n == 0 {
        return Err(DynError::invalid("n", "tangent balls need n >= 1"));
    }
    let orbit = iterate(system, x, n)?;
    let dim = system.dim();
    let mut out = Vec::with_capacity(n);
    out.push(DMatrix::identity(dim, dim));
    for i in 0..n - 1 {
        let next = system.jacobian(orbit.get(i)) * &out[i];
        if !next.iter().all(|e| e.is_finite()) {
            return Err(DynError::Divergence { index: i + 1 });
        }
        out.push(next);
    }
    Ok(out)
}

struct ImportanceBox {
    /// Columns: orthonormal frame to rotate cube samples by.
    frame: DMatrix<f64>,
    semi: DVector<f64>,
    volume: f64,
}

/// Bounding box of the tightest single-product ellipsoid, additionally
/// capped by the metric radius in every direction. Contains the whole
/// intersection, and its volume stays within a dimension constant of it,
/// so acceptance never degenerates as `n` grows.
fn importance_box(products: &[DMatrix<f64>], r: f64) -> ImportanceBox {
    let dim = products[0].nrows();
    let mut best: Option<ImportanceBox> = None;
    for p in products {
        let svd = p.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested");
        let mut semi = DVector::zeros(dim);
        let mut vol = 1.0;
        for j in 0..dim {
            let s = (r / svd.singular_values[j]).min(r);
            semi[j] = s;
            vol *= 2.0 * s;
        }
        if best.as_ref().map_or(true, |b| vol < b.volume) {
            best = Some(ImportanceBox {
                frame: v_t.transpose(),
                semi,
                volume: vol,
            });
        }
    }
    best.expect("nonempty products")
}

fn inside_all(products: &[DMatrix<f64>], v: &DVector<f64>, r: f64) -> bool {
    products.iter().all(|p| (p * v).norm() < r)
}

/// Monte Carlo volume of the tangent `(n, r)`-ball at `x`: the set of
/// tangent vectors whose first `n` cocycle images all stay shorter than
/// `r`. Uniform proposals in the importance box, binomial error bars,
/// deterministic across thread counts.
pub fn tangent_ball_volume(
    system: &dyn SystemModel,
    x: &StatePoint,
    n: usize,
    r: f64,
    n_samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(DynError::invalid("radius", format!("positive radius required, got {r}")));
    }
    if n_samples == 0 {
        return Err(DynError::invalid("n_samples", "at least one sample required"));
    }
    let products = cocycle_products(system, x, n)?;
    let bx = importance_box(&products, r);
    let dim = system.dim();

    const BATCH: usize = 1024;
    let n_batches = n_samples.div_ceil(BATCH);
    let counts: Vec<u64> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, streams::TANGENT_BASE + b as u64);
            let len = BATCH.min(n_samples - b * BATCH);
            let mut hits = 0u64;
            let mut v = DVector::zeros(dim);
            for _ in 0..len {
                for j in 0..dim {
                    let u: f64 = rand::Rng::gen(&mut rng);
                    v[j] = bx.semi[j] * (2.0 * u - 1.0);
                }
                let w = &bx.frame * &v;
                if inside_all(&products, &w, r) {
                    hits += 1;
                }
            }
            hits
        })
        .collect();
    let accepted: u64 = counts.iter().sum();
    let p = accepted as f64 / n_samples as f64;
    Ok(VolumeEstimate {
        n,
        radius_requested: r,
        radius_used: r,
        value: bx.volume * p,
        std_err: bx.volume * (p * (1.0 - p) / n_samples as f64).sqrt(),
        samples: n_samples,
        accepted,
        resolved: accepted >= MIN_ACCEPTED,
    })
}

fn as_matrix2(m: &DMatrix<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn all_diagonal(products: &[DMatrix<f64>]) -> bool {
    products.iter().all(|p| {
        let dim = p.nrows();
        (0..dim).all(|i| (0..dim).all(|j| i == j || p[(i, j)].abs() < 1e-12))
    })
}

/// Exact tangent-ball volume where a closed route exists: interval
/// intersection in dimension one, radial-minimum areas in dimension two,
/// and sliced radial areas for diagonal cocycles in dimension three
/// (where convexity of the per-axis growth in the step index reduces the
/// intersection to its first and last constraints).
pub fn tangent_ball_volume_exact(
    system: &dyn SystemModel,
    x: &StatePoint,
    n: usize,
    r: f64,
) -> Result<f64> {
    let products = cocycle_products(system, x, n)?;
    let dim = system.dim();
    match dim {
        1 => {
            let scales: Vec<f64> = products.iter().map(|p| p[(0, 0)]).collect();
            Ok(2.0 * interval_intersection_halfwidth(&scales, r))
        }
        2 => {
            let mats: Vec<Matrix2<f64>> = products.iter().map(as_matrix2).collect();
            Ok(ellipse_intersection_area(&mats, r, 1e-4))
        }
        3 if all_diagonal(&products) => {
            // Each axis scale is geometric in the step index, so the max of
            // the quadratic constraints over steps is attained at step 0 or
            // step n-1: only those two ellipsoids bind. Slice along the
            // first axis and add up two-constraint radial areas.
            let first = &products[0];
            let last = &products[n - 1];
            let w = (r / last[(0, 0)].abs()).min(r / first[(0, 0)].abs());
            let slices = 2048usize;
            let h = 2.0 * w / slices as f64;
            let mut vol = 0.0;
            for k in 0..slices {
                let t = -w + (k as f64 + 0.5) * h;
                let mut mats = Vec::with_capacity(2);
                for p in [first, last] {
                    let r_slice_sq = r * r - (p[(0, 0)] * t).powi(2);
                    if r_slice_sq <= 0.0 {
                        mats.clear();
                        break;
                    }
                    let rs = r_slice_sq.sqrt();
                    mats.push(Matrix2::new(
                        p[(1, 1)] / rs,
                        0.0,
                        0.0,
                        p[(2, 2)] / rs,
                    ));
                }
                if mats.len() == 2 {
                    vol += h * ellipse_intersection_area(&mats, 1.0, 1e-4);
                }
            }
            Ok(vol)
        }
        d => Err(DynError::invalid(
            "dim",
            format!("no exact route for non-diagonal cocycles in dimension {d}"),
        )),
    }
}

/// Tangent-ball volume carried to the reference measure near `x`.
pub fn linearized_ball_volume(
    system: &dyn SystemModel,
    x: &StatePoint,
    n: usize,
    r: f64,
    n_samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    let mut est = tangent_ball_volume(system, x, n, r, n_samples, seed)?;
    let f = system.tangent_volume_factor(x);
    est.value *= f;
    est.std_err *= f;
    Ok(est)
}

/// One row of a volume-decay profile.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DecayRow {
    pub n: usize,
    pub volume: f64,
    pub std_err: f64,
    /// `-log(volume) / n`.
    pub rate: f64,
    pub resolved: bool,
}

/// Volume-decay diagnostic: tangent-ball volumes over `n_list`, the fitted
/// exponential rate, and the QR sum of positive exponents it should match.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DecayRate {
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `-log volume` against `n` over the resolved
    /// upper half of `n_list` — the volume decay exponent.
    pub slope: f64,
    /// Sum of positive Lyapunov exponents from an independent QR run.
    pub chi_plus_ref: f64,
    /// `slope - chi_plus_ref`.
    pub gap: f64,
    /// Sum of `log^+` of the tangent-map norm over orbit states outside
    /// the model's window: the transparency term for excursions. Zero for
    /// compact charts; reported, never folded into the slope.
    pub excursion_deficit: f64,
    pub resolved: bool,
}

/// Least-squares slope of `(x, y)` pairs; at least two points.
pub fn lsq_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

/// Measures tangent-ball volume decay along `n_list` and compares the
/// fitted rate with the QR spectrum's expanding sum.
pub fn decay_rate(
    system: &dyn SystemModel,
    x: &StatePoint,
    r: f64,
    n_list: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<DecayRate> {
    if n_list.len() < 2 {
        return Err(DynError::invalid("n_list", "decay fits need at least two lengths"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for (k, &n) in n_list.iter().enumerate() {
        let est = tangent_ball_volume(system, x, n, r, n_samples, seed ^ (k as u64) << 32)?;
        rows.push(DecayRow {
            n,
            volume: est.value,
            std_err: est.std_err,
            rate: if est.value > 0.0 { -est.value.ln() / n as f64 } else { f64::NAN },
            resolved: est.resolved,
        });
    }
    let upper_start = n_list.len() / 2;
    let pts: Vec<(f64, f64)> = rows[upper_start..]
        .iter()
        .filter(|row| row.resolved && row.volume > 0.0)
        .map(|row| (row.n as f64, -row.volume.ln()))
        .collect();
    let resolved = pts.len() >= 2;
    let slope = if resolved { lsq_slope(&pts) } else { f64::NAN };
    let spectrum = qr_spectrum(system, x, 2_000, seed.wrapping_mul(0x9E3779B97F4A7C15))?;
    let chi = chi_plus(&spectrum);
    let n_max = *n_list.iter().max().unwrap();
    let window = system.default_window();
    let orbit = iterate(system, x, n_max)?;
    let excursion_deficit: f64 = orbit
        .states()
        .iter()
        .filter(|p| !window.contains(p))
        .map(|p| system.jacobian(p).singular_values().max().ln().max(0.0))
        .sum();
    Ok(DecayRate {
        rows,
        slope,
        chi_plus_ref: chi,
        gap: slope - chi,
        excursion_deficit,
        resolved,
    })
}
