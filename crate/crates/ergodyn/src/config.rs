//! Experiment configuration: one TOML file per run, flag-overridable,
//! hashed into the manifest by semantic content.
//!
//! ```toml
//! system = "doubling"
//! measure = "lebesgue"
//! cloud_size = 100000
//! seed = 7
//! output_dir = "out"
//!
//! [[estimator]]
//! method = "katok"
//! r_list = [0.2, 0.1]        # positive, descending
//! n_list = [2, 3, 4, 5, 6]   # positive, ascending
//! delta = 0.1
//! ```
//!
//! Optional `[gibbs]`, `[report]`, and `[lyapunov]` tables request those
//! pipelines; estimator-block fields not meaningful for a method are
//! rejected rather than ignored silently where they would mislead.
//!
//! Default values (everything else must be spelled out):
//!
//! | field                  | default     |
//! |------------------------|-------------|
//! | `cloud_size`           | 50000       |
//! | `output_dir`           | `out`       |
//! | estimator `delta`      | 0.1         |
//! | estimator `panel_size` | 20          |
//! | estimator `n_samples`  | 200000      |
//! | gibbs `potential`      | `geometric` |
//! | gibbs `pressure`       | 0.0         |
//! | gibbs `panel_size`     | 10          |
//! | lyapunov `steps`       | 10000       |
//!
//! The seed has no default anywhere: runs without one are config errors.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cloud::CloudMeasure;
use crate::error::{DynError, Result};
use crate::models::known_models;

pub const DEFAULT_CLOUD_SIZE: usize = 50_000;
pub const DEFAULT_PANEL_SIZE: usize = 20;
pub const DEFAULT_N_SAMPLES: usize = 200_000;
pub const DEFAULT_DELTA: f64 = 0.1;

fn default_cloud_size() -> usize {
    DEFAULT_CLOUD_SIZE
}
fn default_output_dir() -> String {
    "out".to_string()
}
fn default_potential() -> String {
    "geometric".to_string()
}
fn default_gibbs_panel() -> usize {
    10
}
fn default_steps() -> usize {
    10_000
}

/// One entropy-estimator request.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorBlock {
    /// `katok`, `brin-katok`, or `riemannian`.
    pub method: String,
    pub r_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub delta: Option<f64>,
    pub panel_size: Option<usize>,
    pub n_samples: Option<usize>,
    /// Return-window height cap (modular chart only).
    pub window_y_max: Option<f64>,
}

/// Gibbs-property check request.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsBlock {
    #[serde(default = "default_potential")]
    pub potential: String,
    #[serde(default)]
    pub pressure: f64,
    pub r: f64,
    pub t_list: Vec<usize>,
    #[serde(default = "default_gibbs_panel")]
    pub panel_size: usize,
    pub window_y_max: Option<f64>,
}

/// Entropy-versus-expansion report request; unset fields take the
/// per-system defaults table in the runner.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportBlock {
    pub katok_radii: Option<Vec<f64>>,
    pub r: Option<f64>,
    pub n_list: Option<Vec<usize>>,
    pub delta: Option<f64>,
    pub panel_size: Option<usize>,
    pub n_samples: Option<usize>,
    pub qr_steps: Option<usize>,
    pub window_y_max: Option<f64>,
}

/// Exponent-spectrum request.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovBlock {
    #[serde(default = "default_steps")]
    pub steps: usize,
}

/// A full experiment description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: String,
    /// `lebesgue`, `liouville`, `periodic-orbit`, or `point-file`.
    pub measure: String,
    pub point_file: Option<String>,
    #[serde(default = "default_cloud_size")]
    pub cloud_size: usize,
    /// Required: there is no entropy-from-clock fallback.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub estimator: Vec<EstimatorBlock>,
    pub gibbs: Option<GibbsBlock>,
    pub report: Option<ReportBlock>,
    pub lyapunov: Option<LyapunovBlock>,
}

/// Parses and validates a config file. TOML errors arrive with their
/// line and column.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DynError::io(path.display().to_string(), e))?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| DynError::invalid("config", format!("{}: {e}", path.display())))?;
    validate_config(&cfg)?;
    Ok(cfg)
}

/// Structural checks beyond the schema: known ids, grid orderings, and
/// parameter ranges. Called by [`load_config`]; public for flag-built
/// configs.
pub fn validate_config(cfg: &ExperimentConfig) -> Result<()> {
    if !known_models().contains(&cfg.system.as_str()) {
        return Err(DynError::invalid(
            "system",
            format!("unknown system `{}` (known: {})", cfg.system, known_models().join(", ")),
        ));
    }
    CloudMeasure::parse(&cfg.measure, cfg.point_file.as_deref())?;
    if cfg.cloud_size == 0 {
        return Err(DynError::invalid("cloud_size", "need at least one point"));
    }
    for block in &cfg.estimator {
        match block.method.as_str() {
            "katok" | "brin-katok" | "riemannian" => {}
            other => {
                return Err(DynError::invalid(
                    "estimator.method",
                    format!("unknown method `{other}` (known: katok, brin-katok, riemannian)"),
                ))
            }
        }
        if block.r_list.is_empty() {
            return Err(DynError::invalid("estimator.r_list", "must be nonempty"));
        }
        for w in block.r_list.windows(2) {
            if w[0] <= w[1] {
                return Err(DynError::invalid(
                    "estimator.r_list",
                    format!("must be strictly descending, got {:?}", block.r_list),
                ));
            }
        }
        if block.r_list.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(DynError::invalid(
                "estimator.r_list",
                format!("radii must be positive finite, got {:?}", block.r_list),
            ));
        }
        if block.n_list.len() < 2 {
            return Err(DynError::invalid("estimator.n_list", "need at least two depths"));
        }
        for w in block.n_list.windows(2) {
            if w[0] >= w[1] {
                return Err(DynError::invalid(
                    "estimator.n_list",
                    format!("must be strictly ascending, got {:?}", block.n_list),
                ));
            }
        }
        if block.n_list[0] == 0 {
            return Err(DynError::invalid("estimator.n_list", "depths start at 1"));
        }
        if let Some(d) = block.delta {
            if !(0.0 < d && d < 1.0) {
                return Err(DynError::invalid(
                    "estimator.delta",
                    format!("delta in (0, 1) required, got {d}"),
                ));
            }
        }
    }
    if let Some(g) = &cfg.gibbs {
        if !(g.r > 0.0 && g.r.is_finite()) {
            return Err(DynError::invalid("gibbs.r", format!("positive radius required, got {}", g.r)));
        }
        if g.t_list.len() < 3 {
            return Err(DynError::invalid("gibbs.t_list", "need at least three return times"));
        }
        crate::thermo::potential_by_id(&g.potential)?;
    }
    Ok(())
}

fn canonical_json(v: &serde_json::Value, out: &mut String) {
    match v {
        serde_json::Value::Object(map) => {
            let sorted: BTreeMap<&String, &serde_json::Value> = map.iter().collect();
            out.push('{');
            for (i, (k, val)) in sorted.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push(':');
                canonical_json(val, out);
            }
            out.push('}');
        }
        serde_json::Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical_json(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&serde_json::to_string(other).unwrap()),
    }
}

/// Content hash of the parsed config: whitespace, comments, key order,
/// and spelled-out defaults do not change it; any semantic change does.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let value = serde_json::to_value(cfg).expect("config serializes");
    let mut canon = String::new();
    canonical_json(&value, &mut canon);
    let mut hasher = Sha256::new();
    hasher.update(canon.as_bytes());
    format!("{:x}", hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_toml() -> &'static str {
        r#"
            system = "doubling"
            measure = "lebesgue"
            seed = 7

            [[estimator]]
            method = "katok"
            r_list = [0.2, 0.1]
            n_list = [2, 3, 4, 5]
            delta = 0.1
        "#
    }

    fn write_and_load(text: &str) -> Result<ExperimentConfig> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        load_config(&path)
    }

    #[test]
    fn minimal_config_parses_with_documented_defaults() {
        let cfg = write_and_load(base_toml()).unwrap();
        assert_eq!(cfg.cloud_size, DEFAULT_CLOUD_SIZE);
        assert_eq!(cfg.output_dir, "out");
        assert_eq!(cfg.estimator.len(), 1);
    }

    #[test]
    fn seedless_configs_are_rejected() {
        let err = write_and_load(
            r#"
                system = "doubling"
                measure = "lebesgue"
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn grid_ordering_is_enforced() {
        let ascending_r = base_toml().replace("[0.2, 0.1]", "[0.1, 0.2]");
        assert!(write_and_load(&ascending_r).is_err());
        let descending_n = base_toml().replace("[2, 3, 4, 5]", "[5, 3, 2, 1]");
        assert!(write_and_load(&descending_n).is_err());
        let bad_delta = base_toml().replace("delta = 0.1", "delta = 1.5");
        assert!(write_and_load(&bad_delta).is_err());
    }

    #[test]
    fn parse_errors_name_the_location() {
        let err = write_and_load("system = \"doubling\"\nmeasure = [1,\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn hash_ignores_formatting_but_sees_content() {
        let a = write_and_load(base_toml()).unwrap();
        let spaced = base_toml().replace("seed = 7", "seed   =    7   # a comment");
        let b = write_and_load(&spaced).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let explicit_default = base_toml().replace("seed = 7", "seed = 7\ncloud_size = 50000");
        let c = write_and_load(&explicit_default).unwrap();
        assert_eq!(config_hash(&a), config_hash(&c));
        let changed = base_toml().replace("seed = 7", "seed = 8");
        let d = write_and_load(&changed).unwrap();
        assert_ne!(config_hash(&a), config_hash(&d));
    }

    #[test]
    fn unknown_keys_and_methods_are_rejected() {
        let extra = base_toml().replace("seed = 7", "seed = 7\nturbo = true");
        assert!(write_and_load(&extra).is_err());
        let method = base_toml().replace("\"katok\"", "\"kolmogorov\"");
        assert!(write_and_load(&method).is_err());
    }
}
