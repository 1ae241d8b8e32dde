//! Thermodynamic diagnostics: Birkhoff sums, Gibbs-property checks for
//! dynamical-ball masses, and entropy-versus-expansion reports.
//!
//! The Gibbs check asks whether the empirical measure of dynamical balls
//! tracks `exp(S_T phi - T c)` along a panel of centers, at the return
//! times of each center orbit to a compact window. The report stacks the
//! independent entropy estimators against the Lyapunov exponent sum and
//! states the slack in the entropy-expansion inequality; the absolutely
//! continuous case upgrades the inequality to an equality check.

use std::collections::BTreeMap;

use crate::entropy::{
    brin_katok_local, katok_entropy, local_mass_counts, riemannian_panel, EntropyEstimate,
    ReturnWindow, MIN_BALL_COUNT,
};
use crate::error::{DynError, Result};
use crate::lyapunov::{chi_plus, lsq_slope, qr_spectrum, LyapunovSpectrum};
use crate::point::StatePoint;
use crate::system::{iterate, SystemModel};

/// Entropy deficits beyond this against the exponent sum fail the report.
pub const RUELLE_TOL: f64 = 0.1;

/// An observable along orbits.
pub trait Potential: Sync {
    fn id(&self) -> String;
    fn value(&self, system: &dyn SystemModel, x: &StatePoint) -> f64;
}

/// The zero observable; its equilibrium weighting is the count itself.
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn id(&self) -> String {
        "zero".to_string()
    }
    fn value(&self, _system: &dyn SystemModel, _x: &StatePoint) -> f64 {
        0.0
    }
}

/// Minus the log unstable expansion rate of the time-one map, delegated
/// to the model's exact constant.
pub struct GeometricPotential;

impl Potential for GeometricPotential {
    fn id(&self) -> String {
        "geometric".to_string()
    }
    fn value(&self, system: &dyn SystemModel, x: &StatePoint) -> f64 {
        system.geometric_potential(x)
    }
}

/// Indicator of a return window, for mass-fraction Birkhoff averages.
pub struct WindowIndicator(pub ReturnWindow);

impl Potential for WindowIndicator {
    fn id(&self) -> String {
        "window-indicator".to_string()
    }
    fn value(&self, _system: &dyn SystemModel, x: &StatePoint) -> f64 {
        if self.0.contains(x) {
            1.0
        } else {
            0.0
        }
    }
}

/// Potentials addressable from configuration files.
pub fn potential_by_id(id: &str) -> Result<Box<dyn Potential>> {
    match id {
        "zero" => Ok(Box::new(ZeroPotential)),
        "geometric" => Ok(Box::new(GeometricPotential)),
        other => Err(DynError::invalid(
            "potential",
            format!("unknown potential `{other}` (known: zero, geometric)"),
        )),
    }
}

/// `sum_{i < n} phi(T^i x)`; zero at `n = 0` by the empty-sum convention.
pub fn birkhoff_sum(
    system: &dyn SystemModel,
    potential: &dyn Potential,
    x: &StatePoint,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let orbit = iterate(system, x, n)?;
    Ok((0..n).map(|i| potential.value(system, orbit.get(i))).sum())
}

/// Time average of the potential over the first `n` orbit states.
pub fn birkhoff_average(
    system: &dyn SystemModel,
    potential: &dyn Potential,
    x: &StatePoint,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(DynError::invalid("n", "average needs at least one step"));
    }
    Ok(birkhoff_sum(system, potential, x, n)? / n as f64)
}

/// One return time of one Gibbs-check center.
#[derive(Clone, Debug, serde::Serialize)]
pub struct GibbsRow {
    pub t: usize,
    pub count: u64,
    pub mass: f64,
    pub birkhoff: f64,
    /// `log mass - (S_t phi - t c)`; constant in `t` when the cloud
    /// measure is the equilibrium state of `phi` at pressure `c`.
    pub ratio: f64,
    pub resolved: bool,
}

/// One center of the Gibbs panel.
#[derive(Clone, Debug, serde::Serialize)]
pub struct GibbsCenter {
    pub index: usize,
    pub rows: Vec<GibbsRow>,
    /// Max minus min of the resolved ratios: the log of the realized
    /// Gibbs-constant range along this orbit.
    pub spread: f64,
    /// Least-squares slope of `log mass` against `t`.
    pub slope: f64,
    pub resolved: bool,
}

/// Panel summary of the Gibbs-property check.
#[derive(Clone, Debug, serde::Serialize)]
pub struct GibbsReport {
    pub potential: String,
    pub pressure: f64,
    pub r: f64,
    pub centers: Vec<GibbsCenter>,
    pub median_slope: f64,
    pub max_spread: f64,
    pub resolved_centers: usize,
    pub resolved: bool,
}

/// Checks the Gibbs property of the cloud's empirical measure for
/// `potential` at pressure guess `pressure`: for each panel center, the
/// ball masses at window-return times `t` are compared against
/// `exp(S_t phi - t pressure)`. Centers come from the cloud prefix,
/// conditioned into the window.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_check(
    system: &dyn SystemModel,
    cloud: &[StatePoint],
    potential: &dyn Potential,
    window: ReturnWindow,
    panel_size: usize,
    r: f64,
    t_list: &[usize],
    pressure: f64,
) -> Result<GibbsReport> {
    if panel_size < 5 {
        return Err(DynError::invalid("panel_size", "panels start at 5 centers"));
    }
    let mut times = t_list.to_vec();
    times.sort_unstable();
    times.dedup();
    if times.len() < 3 {
        return Err(DynError::invalid("t_list", "need at least three return times"));
    }
    let t_max = *times.last().unwrap();
    // Ball of flow depth t checks positions 0..=t, i.e. order t + 1.
    let n_list: Vec<usize> = times.iter().map(|&t| t + 1).collect();

    let total = cloud.len() as f64;
    let mut centers = Vec::new();
    let mut slopes = Vec::new();
    let mut max_spread = f64::NEG_INFINITY;
    for (index, center) in cloud.iter().enumerate() {
        if centers.len() >= panel_size {
            break;
        }
        if !window.contains(center) {
            continue;
        }
        let orbit = match iterate(system, center, t_max + 1) {
            Ok(o) => o,
            Err(_) => continue,
        };
        let counts = local_mass_counts(system, cloud, center, r, &n_list)?;
        let mut prefix = vec![0.0];
        for i in 0..t_max {
            prefix.push(prefix[i] + potential.value(system, orbit.get(i)));
        }
        let mut rows = Vec::new();
        for (j, &t) in times.iter().enumerate() {
            if !window.contains(orbit.get(t)) {
                continue;
            }
            let count = counts[j];
            let mass = count as f64 / total;
            let birkhoff = prefix[t];
            let resolved = count >= MIN_BALL_COUNT;
            let ratio = if count > 0 {
                mass.ln() - (birkhoff - pressure * t as f64)
            } else {
                f64::NAN
            };
            rows.push(GibbsRow {
                t,
                count,
                mass,
                birkhoff,
                ratio,
                resolved,
            });
        }
        let good: Vec<&GibbsRow> = rows.iter().filter(|row| row.resolved).collect();
        let resolved = good.len() >= 3;
        let (spread, slope) = if resolved {
            let hi = good.iter().map(|w| w.ratio).fold(f64::NEG_INFINITY, f64::max);
            let lo = good.iter().map(|w| w.ratio).fold(f64::INFINITY, f64::min);
            let pts: Vec<(f64, f64)> = good
                .iter()
                .map(|w| (w.t as f64, w.mass.ln()))
                .collect();
            (hi - lo, lsq_slope(&pts))
        } else {
            (f64::NAN, f64::NAN)
        };
        if resolved {
            slopes.push(slope);
            max_spread = max_spread.max(spread);
        }
        centers.push(GibbsCenter {
            index,
            rows,
            spread,
            slope,
            resolved,
        });
    }

    let resolved_centers = slopes.len();
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_slope = if slopes.is_empty() {
        f64::NAN
    } else if slopes.len() % 2 == 1 {
        slopes[slopes.len() / 2]
    } else {
        0.5 * (slopes[slopes.len() / 2 - 1] + slopes[slopes.len() / 2])
    };
    Ok(GibbsReport {
        potential: potential.id(),
        pressure,
        r,
        centers,
        median_slope,
        max_spread: if resolved_centers > 0 { max_spread } else { f64::NAN },
        resolved_centers,
        resolved: resolved_centers >= panel_size.div_ceil(2) && resolved_centers >= 5,
    })
}

/// What the sample cloud is a sample of. Decides which estimators may
/// enter the entropy-expansion comparison: local volume rates measure
/// volume decay, which only equals the entropy of the cloud's measure in
/// the absolutely continuous case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MeasureSpec {
    /// I.i.d. samples of the smooth invariant volume.
    SmoothVolume,
    /// Samples of an invariant measure of unknown regularity.
    EmpiricalCloud,
    /// Points along a single periodic orbit.
    PeriodicOrbit,
}

impl MeasureSpec {
    fn label(&self) -> &'static str {
        match self {
            MeasureSpec::SmoothVolume => "smooth-volume",
            MeasureSpec::EmpiricalCloud => "empirical-cloud",
            MeasureSpec::PeriodicOrbit => "periodic-orbit",
        }
    }
}

/// Knobs for [`ruelle_report`], bundled so call sites can tweak one.
#[derive(Clone, Debug)]
pub struct ReportConfig {
    /// Radii for the covering estimator, scanned ascending.
    pub katok_radii: Vec<f64>,
    /// Radius for the shadowing-mass and volume-rate estimators.
    pub r: f64,
    pub n_list: Vec<usize>,
    pub delta: f64,
    pub panel_size: usize,
    /// Monte Carlo samples per volume estimate.
    pub n_samples: usize,
    pub qr_steps: usize,
    pub window: ReturnWindow,
    pub seed: u64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            katok_radii: vec![0.1, 0.2],
            r: 0.1,
            n_list: vec![2, 3, 4, 5, 6, 7],
            delta: 0.1,
            panel_size: 12,
            n_samples: 200_000,
            qr_steps: 2000,
            window: ReturnWindow::Everywhere,
            seed: 7,
        }
    }
}

/// One estimator's line in the report.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ReportEntry {
    pub method: String,
    pub value: f64,
    pub resolved: bool,
    /// Whether this method may bound the entropy of the cloud's measure.
    pub included: bool,
}

/// Entropy estimates stacked against the positive Lyapunov exponent sum.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RuelleReport {
    pub system: String,
    pub measure: String,
    pub entries: Vec<ReportEntry>,
    pub chi_plus: f64,
    /// `chi_plus - h_best` over included resolved estimators: nonnegative
    /// up to noise when the entropy-expansion inequality holds.
    pub slack: f64,
    /// `h_best + mean(geometric potential)`: near zero exactly for the
    /// smooth equilibrium state.
    pub pressure: f64,
    pub satisfied: bool,
    pub resolved: bool,
    #[serde(skip)]
    pub spectrum: Option<LyapunovSpectrum>,
    pub estimates: Vec<EntropyEstimate>,
    pub diagnostics: BTreeMap<String, f64>,
}

/// Runs the covering, shadowing-mass, and volume-rate estimators plus a
/// QR exponent pass, and reports the slack in the entropy-expansion
/// inequality for the cloud's measure.
pub fn ruelle_report(
    system: &dyn SystemModel,
    cloud: &[StatePoint],
    measure: MeasureSpec,
    config: &ReportConfig,
) -> Result<RuelleReport> {
    let katok = katok_entropy(system, cloud, &config.katok_radii, &config.n_list, config.delta)?;
    let bk = brin_katok_local(system, cloud, config.panel_size, config.r, &config.n_list)?;
    let riem = riemannian_panel(
        system,
        cloud,
        config.panel_size,
        config.window,
        config.r,
        &config.n_list,
        config.n_samples,
        config.seed,
    )?;

    // The QR pass needs an orbit that survives; scan a few cloud points.
    let mut spectrum = None;
    for x0 in cloud.iter().take(32) {
        match qr_spectrum(system, x0, config.qr_steps, config.seed) {
            Ok(s) => {
                spectrum = Some(s);
                break;
            }
            Err(DynError::CuspExcursion { .. }) | Err(DynError::Divergence { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let spectrum = spectrum.ok_or_else(|| {
        DynError::invalid("qr", "no cloud orbit survived the exponent pass")
    })?;
    let chi = chi_plus(&spectrum);

    let include_riemannian = measure == MeasureSpec::SmoothVolume;
    let entries = vec![
        ReportEntry {
            method: katok.method.clone(),
            value: katok.value,
            resolved: katok.resolved,
            included: true,
        },
        ReportEntry {
            method: bk.method.clone(),
            value: bk.value,
            resolved: bk.resolved,
            included: true,
        },
        ReportEntry {
            method: riem.method.clone(),
            value: riem.value,
            resolved: riem.resolved,
            included: include_riemannian,
        },
    ];

    let h_best = entries
        .iter()
        .filter(|e| e.included && e.resolved)
        .map(|e| e.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let resolved = h_best.is_finite();
    let slack = if resolved { chi - h_best } else { f64::NAN };

    let geom = GeometricPotential;
    let mean_potential =
        cloud.iter().map(|p| geom.value(system, p)).sum::<f64>() / cloud.len() as f64;
    let pressure = if resolved { h_best + mean_potential } else { f64::NAN };

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("mean_geometric_potential".to_string(), mean_potential);
    diagnostics.insert("qr_residual".to_string(), spectrum.residual);
    diagnostics.insert("h_best".to_string(), h_best);
    Ok(RuelleReport {
        system: system.id().to_string(),
        measure: measure.label().to_string(),
        entries,
        chi_plus: chi,
        slack,
        pressure,
        satisfied: resolved && slack >= -RUELLE_TOL,
        resolved,
        spectrum: Some(spectrum),
        estimates: vec![katok, bk, riem],
        diagnostics,
    })
}

/// Entropy-expansion equality gap, meaningful only for the smooth volume.
#[derive(Clone, Debug, serde::Serialize)]
pub struct PesinGap {
    pub h: f64,
    pub chi_plus: f64,
    pub gap: f64,
    pub satisfied: bool,
}

/// Gap tolerance for [`pesin_check`].
pub const PESIN_TOL: f64 = 0.15;

/// Upgrades a report's inequality to the equality check available for
/// absolutely continuous measures. Any other measure class is refused:
/// singular measures satisfy the inequality strictly, so a small gap
/// would be evidence of a bug, not a theorem.
pub fn pesin_check(report: &RuelleReport) -> Result<PesinGap> {
    if report.measure != MeasureSpec::SmoothVolume.label() {
        return Err(DynError::MeasureClass {
            measure: report.measure.clone(),
            why: "entropy-expansion equality needs an absolutely continuous measure".to_string(),
        });
    }
    if !report.resolved {
        return Err(DynError::unresolved(
            "no resolved entropy estimate to compare against the exponent sum",
        ));
    }
    let h = report
        .entries
        .iter()
        .filter(|e| e.included && e.resolved)
        .map(|e| e.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = (report.chi_plus - h).abs();
    Ok(PesinGap {
        h,
        chi_plus: report.chi_plus,
        gap,
        satisfied: gap <= PESIN_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        cat_expansion, doubling_system, geodesic_system, liouville_sample, CompactWindow,
        IdentitySystem,
    };
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn birkhoff_sums_of_constant_log_expansions_are_exact() {
        let sys = doubling_system();
        let x = StatePoint::scalar(0.3127);
        let s = birkhoff_sum(&sys, &GeometricPotential, &x, 40).unwrap();
        assert!((s + 40.0 * std::f64::consts::LN_2).abs() < 1e-12, "sum {s}");
        assert_eq!(birkhoff_sum(&sys, &ZeroPotential, &x, 40).unwrap(), 0.0);
        assert_eq!(birkhoff_sum(&sys, &GeometricPotential, &x, 0).unwrap(), 0.0);

        let cat = crate::models::cat_system();
        let y = StatePoint::from_slice(&[0.21, 0.68]);
        let avg = birkhoff_average(&cat, &GeometricPotential, &y, 25).unwrap();
        assert!((avg + cat_expansion().ln()).abs() < 1e-12, "avg {avg}");
    }

    #[test]
    fn geodesic_log_expansion_rate_is_one_per_unit_time() {
        let sys = geodesic_system();
        let x = liouville_sample(1, 11)[0].to_state();
        let avg = birkhoff_average(&sys, &GeometricPotential, &x, 50).unwrap();
        assert!((avg + 1.0).abs() < 1e-12, "avg {avg}");
    }

    #[test]
    fn window_occupation_time_matches_the_exact_mass() {
        let sys = geodesic_system();
        let window = CompactWindow::new(8.0).unwrap();
        let x = liouville_sample(1, 3)[0].to_state();
        let ind = WindowIndicator(ReturnWindow::HeightBelow(window.y_max));
        let avg = birkhoff_average(&sys, &ind, &x, 10_000).unwrap();
        let exact = window.liouville_mass();
        assert!(
            (avg - exact).abs() < 0.02 * exact,
            "occupation {avg} vs exact {exact}"
        );
    }

    #[test]
    fn lebesgue_is_the_zero_potential_equilibrium_state_of_doubling() {
        let sys = doubling_system();
        let mut rng = stream_rng(5, 0);
        let cloud: Vec<StatePoint> = (0..100_000).map(|_| StatePoint::scalar(rng.gen())).collect();
        let report = gibbs_check(
            &sys,
            &cloud,
            &ZeroPotential,
            ReturnWindow::Everywhere,
            8,
            0.1,
            &[0, 2, 4, 6, 8],
            std::f64::consts::LN_2,
        )
        .unwrap();
        assert!(report.resolved, "centers resolved {}", report.resolved_centers);
        assert!(
            report.max_spread < 0.45,
            "ratio spread {}",
            report.max_spread
        );
        assert!(
            (report.median_slope + std::f64::consts::LN_2).abs() < 0.08,
            "slope {}",
            report.median_slope
        );
    }

    #[test]
    fn identity_report_is_flat_everywhere() {
        let sys = IdentitySystem::new(2);
        let mut rng = stream_rng(17, 0);
        let cloud: Vec<StatePoint> = (0..4000)
            .map(|_| StatePoint::from_slice(&[rng.gen(), rng.gen()]))
            .collect();
        let config = ReportConfig {
            katok_radii: vec![0.15],
            r: 0.2,
            n_list: vec![1, 2, 3, 4, 5, 6],
            panel_size: 8,
            n_samples: 20_000,
            qr_steps: 200,
            ..ReportConfig::default()
        };
        let report = ruelle_report(&sys, &cloud, MeasureSpec::SmoothVolume, &config).unwrap();
        assert!(report.resolved);
        assert!(report.chi_plus.abs() < 1e-10, "chi {}", report.chi_plus);
        for entry in &report.entries {
            assert!(entry.included);
            assert!(entry.resolved, "{} unresolved", entry.method);
            assert!(entry.value.abs() < 0.05, "{} = {}", entry.method, entry.value);
        }
        assert!(report.slack.abs() < 0.05, "slack {}", report.slack);
        assert!(report.pressure.abs() < 0.05, "pressure {}", report.pressure);
        assert!(report.satisfied);
        let gap = pesin_check(&report).unwrap();
        assert!(gap.satisfied, "gap {}", gap.gap);
    }

    #[test]
    fn equality_check_refuses_singular_measure_classes() {
        let sys = doubling_system();
        let mut rng = stream_rng(23, 0);
        let cloud: Vec<StatePoint> = (0..5000).map(|_| StatePoint::scalar(rng.gen())).collect();
        let config = ReportConfig {
            katok_radii: vec![0.1],
            n_list: vec![2, 3, 4, 5, 6],
            panel_size: 8,
            n_samples: 30_000,
            qr_steps: 200,
            ..ReportConfig::default()
        };
        let report = ruelle_report(&sys, &cloud, MeasureSpec::PeriodicOrbit, &config).unwrap();
        let err = pesin_check(&report).unwrap_err();
        assert!(matches!(err, DynError::MeasureClass { .. }), "got {err}");
        // The volume-rate estimator still ran, but is marked non-binding.
        let riem = report.entries.iter().find(|e| e.method == "riemannian").unwrap();
        assert!(!riem.included);
    }
}
