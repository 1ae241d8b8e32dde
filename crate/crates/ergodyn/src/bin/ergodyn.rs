//! Experiment runner. Subcommands: `sample`, `lyapunov`, `entropy`,
//! `gibbs`, `report`. A TOML config drives the full pipelines; flags
//! override config fields, and `lyapunov`/`report`/`sample` also run
//! configless from flags alone. Exit codes: 0 all requested stages
//! resolved, 2 configuration error, 3 pipeline ran but left a stage
//! unresolved (partial artifacts retained).
//!
//! `ERGODYN_THREADS` caps the worker pool; no other environment input
//! is read, and no entropy is drawn from the clock.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ergodyn::cloud::csv_float;
use ergodyn::config::{
    load_config, validate_config, ExperimentConfig, LyapunovBlock, DEFAULT_CLOUD_SIZE,
};
use ergodyn::error::DynError;
use ergodyn::runner;

/// Documented fallback seed for configless subcommands; a fixed constant,
/// never the clock.
const DEFAULT_SEED: u64 = 7;

#[derive(Parser)]
#[command(name = "ergodyn", version, about = "entropy and expansion experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Overrides {
    /// TOML experiment config; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// System id (doubling, cat, modular-geodesic, identity, identity-2, identity-3)
    #[arg(long)]
    system: Option<String>,
    /// Measure spec: lebesgue | liouville | periodic-orbit | point-file
    #[arg(long)]
    measure: Option<String>,
    /// Point CSV for measure=point-file
    #[arg(long)]
    point_file: Option<String>,
    /// Cloud size for sampling stages
    #[arg(long)]
    cloud_size: Option<usize>,
    /// RNG seed (default 7 when no config supplies one)
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact directory
    #[arg(long)]
    output_dir: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a measure sample and write it as a headed point CSV
    Sample {
        #[arg(long)]
        system: String,
        #[arg(long, default_value = "lebesgue")]
        measure: String,
        #[arg(long)]
        point_file: Option<String>,
        /// Number of points
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Destination CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the Lyapunov spectrum; prints exponents and the positive sum
    Lyapunov {
        #[command(flatten)]
        common: Overrides,
        /// Orthonormalized steps
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run the config's estimator blocks (covering, shadowing-mass, volume-rate)
    Entropy {
        #[command(flatten)]
        common: Overrides,
    },
    /// Check the Gibbs ratio bounds for the config's potential
    Gibbs {
        #[command(flatten)]
        common: Overrides,
    },
    /// Entropy vs expansion report: estimators, spectrum, slack, pressure
    Report {
        #[command(flatten)]
        common: Overrides,
    },
}

/// Everything that happens before a pipeline starts is a configuration
/// problem (2); data-starved runs keep their artifacts and signal 3.
fn exit_for(e: &DynError) -> u8 {
    match e {
        DynError::InvalidParameter { .. }
        | DynError::UnknownSystem(_)
        | DynError::PointFile { .. }
        | DynError::OutsideDomain { .. }
        | DynError::MeasureClass { .. } => 2,
        DynError::NoReturningTimes
        | DynError::Unresolved { .. }
        | DynError::CuspExcursion { .. }
        | DynError::Divergence { .. }
        | DynError::SingularJacobian { .. }
        | DynError::ReductionOverflow { .. } => 3,
        DynError::Io { .. } => 1,
    }
}

fn default_measure_for(system: &str) -> &'static str {
    if system == "modular-geodesic" {
        "liouville"
    } else {
        "lebesgue"
    }
}

/// Builds the effective config: the file when given, flag overrides on
/// top, or a flags-only config for the configless subcommands.
fn resolve_config(ov: &Overrides, require_file: bool) -> Result<ExperimentConfig, DynError> {
    let mut cfg = match &ov.config {
        Some(path) => load_config(path)?,
        None if require_file => {
            return Err(DynError::invalid("config", "--config is required here"))
        }
        None => {
            let system = ov.system.clone().ok_or_else(|| {
                DynError::invalid("system", "--system is required without a config")
            })?;
            ExperimentConfig {
                measure: default_measure_for(&system).to_string(),
                system,
                point_file: None,
                cloud_size: DEFAULT_CLOUD_SIZE,
                seed: DEFAULT_SEED,
                output_dir: "out".to_string(),
                estimator: Vec::new(),
                gibbs: None,
                report: None,
                lyapunov: None,
            }
        }
    };
    if let Some(v) = &ov.system {
        cfg.system = v.clone();
    }
    if let Some(v) = &ov.measure {
        cfg.measure = v.clone();
    }
    if let Some(v) = &ov.point_file {
        cfg.point_file = Some(v.clone());
    }
    if let Some(v) = ov.cloud_size {
        cfg.cloud_size = v;
    }
    if let Some(v) = ov.seed {
        cfg.seed = v;
    }
    if let Some(v) = &ov.output_dir {
        cfg.output_dir = v.clone();
    }
    validate_config(&cfg)?;
    Ok(cfg)
}

fn init_threads() -> Result<(), DynError> {
    if let Ok(v) = std::env::var("ERGODYN_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            DynError::invalid("ERGODYN_THREADS", format!("not a thread count: `{v}`"))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| DynError::invalid("ERGODYN_THREADS", e.to_string()))?;
    }
    Ok(())
}

fn outcome_exit(all_resolved: bool) -> u8 {
    if all_resolved {
        0
    } else {
        eprintln!("unresolved stages; artifacts retained");
        3
    }
}

fn run(cli: Cli) -> Result<u8, DynError> {
    match cli.cmd {
        Cmd::Sample {
            system,
            measure,
            point_file,
            n,
            seed,
            out,
        } => {
            if n == 0 {
                return Err(DynError::invalid("n", "need at least one point"));
            }
            runner::run_sample(&system, &measure, point_file.as_deref(), n, seed, &out)?;
            eprintln!("wrote {} points to {}", n, out.display());
            Ok(0)
        }
        Cmd::Lyapunov { common, steps } => {
            let mut cfg = resolve_config(&common, false)?;
            let block_steps = steps
                .or(cfg.lyapunov.as_ref().map(|b| b.steps))
                .unwrap_or(10_000);
            cfg.lyapunov = Some(LyapunovBlock { steps: block_steps });
            let (artifact, outcome) = runner::run_lyapunov(&cfg)?;
            println!("system: {}", artifact.system);
            println!("steps: {}", artifact.n_steps);
            let fmt = |xs: &[f64]| {
                xs.iter().map(|v| csv_float(*v)).collect::<Vec<_>>().join(" ")
            };
            println!("exponents: {}", fmt(&artifact.exponents));
            for (v, m) in artifact.cluster_values.iter().zip(&artifact.multiplicities) {
                println!("cluster: {} x{}", csv_float(*v), m);
            }
            println!("chi_plus: {}", csv_float(artifact.chi_plus));
            println!("residual: {}", csv_float(artifact.residual));
            Ok(outcome_exit(outcome.all_resolved))
        }
        Cmd::Entropy { common } => {
            let cfg = resolve_config(&common, true)?;
            let outcome = runner::run_estimators(&cfg)?;
            eprintln!("artifacts in {}", outcome.out_dir.display());
            Ok(outcome_exit(outcome.all_resolved))
        }
        Cmd::Gibbs { common } => {
            let cfg = resolve_config(&common, true)?;
            let (report, outcome) = runner::run_gibbs(&cfg)?;
            println!(
                "potential: {}  pressure: {}  centers: {}",
                report.potential,
                csv_float(report.pressure),
                report.resolved_centers
            );
            println!(
                "median_slope: {}  max_spread: {}",
                csv_float(report.median_slope),
                csv_float(report.max_spread)
            );
            Ok(outcome_exit(outcome.all_resolved))
        }
        Cmd::Report { common } => {
            let cfg = resolve_config(&common, false)?;
            let (report, outcome) = runner::run_report(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(outcome_exit(outcome.all_resolved))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
