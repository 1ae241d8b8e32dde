//! Sample clouds: measure-specific generators and the point-file format.
//!
//! Point files are plain CSV, one point per row, header row naming the
//! coordinates (`x`, `x,y`, or `x,y,theta`). Floats are written with 17
//! significant digits so files round-trip bit-exactly.

use std::path::Path;

use rand::Rng;

use crate::error::{DynError, Result};
use crate::models::periodic_orbit_cloud;
use crate::point::StatePoint;
use crate::rng::{stream_rng, streams};
use crate::system::SystemModel;

/// What the cloud samples.
#[derive(Clone, Debug, PartialEq)]
pub enum CloudMeasure {
    /// Uniform on the unit cube chart of a flat model.
    Lebesgue,
    /// The invariant volume of the modular-surface flow.
    Liouville,
    /// Uniform empirical measure along the shipped closed geodesic.
    PeriodicOrbit,
    /// Points loaded verbatim from a CSV file.
    PointFile(String),
}

impl CloudMeasure {
    /// Parses the configuration spelling; `point-file` needs a path.
    pub fn parse(spec: &str, point_file: Option<&str>) -> Result<CloudMeasure> {
        match spec {
            "lebesgue" => Ok(CloudMeasure::Lebesgue),
            "liouville" => Ok(CloudMeasure::Liouville),
            "periodic-orbit" => Ok(CloudMeasure::PeriodicOrbit),
            "point-file" => point_file
                .map(|p| CloudMeasure::PointFile(p.to_string()))
                .ok_or_else(|| {
                    DynError::invalid("measure", "measure `point-file` needs a point_file path")
                }),
            other => Err(DynError::invalid(
                "measure",
                format!(
                    "unknown measure `{other}` (known: lebesgue, liouville, periodic-orbit, point-file)"
                ),
            )),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CloudMeasure::Lebesgue => "lebesgue",
            CloudMeasure::Liouville => "liouville",
            CloudMeasure::PeriodicOrbit => "periodic-orbit",
            CloudMeasure::PointFile(_) => "point-file",
        }
    }
}

/// Coordinate names for point-file headers, by chart dimension.
pub fn coordinate_names(dim: usize) -> &'static [&'static str] {
    match dim {
        1 => &["x"],
        2 => &["x", "y"],
        _ => &["x", "y", "theta"],
    }
}

/// CSV float format: 17 significant digits, locale-independent.
pub fn csv_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Draws `n` cloud points for the measure, deterministically in `seed`.
/// Measures are matched to systems: the hyperbolic measures need the
/// modular chart, Lebesgue needs a flat one.
pub fn generate_cloud(
    system: &dyn SystemModel,
    measure: &CloudMeasure,
    n: usize,
    seed: u64,
) -> Result<Vec<StatePoint>> {
    if n == 0 {
        return Err(DynError::invalid("cloud_size", "need at least one point"));
    }
    let modular = system.id() == "modular-geodesic";
    match measure {
        CloudMeasure::Lebesgue => {
            if modular {
                return Err(DynError::invalid(
                    "measure",
                    "lebesgue is for flat charts; the modular surface uses liouville",
                ));
            }
            let dim = system.dim();
            let mut rng = stream_rng(seed, streams::CLOUD);
            Ok((0..n)
                .map(|_| {
                    let coords: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
                    StatePoint::from_slice(&coords)
                })
                .collect())
        }
        CloudMeasure::Liouville => {
            if !modular {
                return Err(DynError::invalid(
                    "measure",
                    format!("liouville lives on modular-geodesic, not `{}`", system.id()),
                ));
            }
            Ok(crate::models::liouville_sample(n, seed)
                .into_iter()
                .map(|v| v.to_state())
                .collect())
        }
        CloudMeasure::PeriodicOrbit => {
            if !modular {
                return Err(DynError::invalid(
                    "measure",
                    format!(
                        "periodic-orbit lives on modular-geodesic, not `{}`",
                        system.id()
                    ),
                ));
            }
            Ok(periodic_orbit_cloud(n)
                .into_iter()
                .map(|v| v.to_state())
                .collect())
        }
        CloudMeasure::PointFile(path) => {
            let cloud = read_point_csv(Path::new(path))?;
            if let Some(p) = cloud.first() {
                if p.dim() != system.dim() {
                    return Err(DynError::point_file(
                        path.clone(),
                        format!(
                            "points have dimension {}, system `{}` has {}",
                            p.dim(),
                            system.id(),
                            system.dim()
                        ),
                    ));
                }
            }
            if let Some((i, _)) = cloud
                .iter()
                .enumerate()
                .find(|(_, p)| !system.contains(p))
            {
                return Err(DynError::point_file(
                    path.clone(),
                    format!("row {}: point outside the domain of `{}`", i + 2, system.id()),
                ));
            }
            Ok(cloud)
        }
    }
}

/// Writes a cloud as a headed CSV point file.
pub fn write_point_csv(path: &Path, cloud: &[StatePoint]) -> Result<()> {
    if cloud.is_empty() {
        return Err(DynError::invalid("cloud", "refusing to write an empty point file"));
    }
    let dim = cloud[0].dim();
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| DynError::point_file(path.display().to_string(), e.to_string()))?;
    w.write_record(coordinate_names(dim))
        .map_err(|e| DynError::point_file(path.display().to_string(), e.to_string()))?;
    for p in cloud {
        let rec: Vec<String> = (0..dim).map(|i| csv_float(p.get(i))).collect();
        w.write_record(&rec)
            .map_err(|e| DynError::point_file(path.display().to_string(), e.to_string()))?;
    }
    w.flush()
        .map_err(|e| DynError::io(path.display().to_string(), e))?;
    Ok(())
}

/// Loads a headed CSV point file. Every row must parse to finite floats
/// of the header's dimension; the offending line is named otherwise.
pub fn read_point_csv(path: &Path) -> Result<Vec<StatePoint>> {
    let label = path.display().to_string();
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| DynError::point_file(label.clone(), e.to_string()))?;
    let dim = r
        .headers()
        .map_err(|e| DynError::point_file(label.clone(), e.to_string()))?
        .len();
    if !(1..=3).contains(&dim) {
        return Err(DynError::point_file(
            label,
            format!("expected 1 to 3 coordinate columns, found {dim}"),
        ));
    }
    let mut cloud = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| DynError::point_file(label.clone(), e.to_string()))?;
        if rec.len() != dim {
            return Err(DynError::point_file(
                label,
                format!("row {} has {} fields, header has {dim}", i + 2, rec.len()),
            ));
        }
        let mut coords = Vec::with_capacity(dim);
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                DynError::point_file(
                    label.clone(),
                    format!("row {}: `{field}` is not a float", i + 2),
                )
            })?;
            if !v.is_finite() {
                return Err(DynError::point_file(
                    label,
                    format!("row {}: non-finite coordinate", i + 2),
                ));
            }
            coords.push(v);
        }
        cloud.push(StatePoint::from_slice(&coords));
    }
    if cloud.is_empty() {
        return Err(DynError::point_file(label, "no data rows".to_string()));
    }
    Ok(cloud)
}
