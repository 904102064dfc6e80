//! Executes a validated configuration and writes its outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use pxaug_core::kraft::{phi_decide, psi_decide};
use pxaug_core::monte_carlo::{sweep, SweepTarget};
use pxaug_core::survey::compare_schemes;
use pxaug_core::{
    activation_measure, affinity, expanded_bound, marginal_bound, product_affinity_iid,
    SimpleHypotheses,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{BuiltModel, Command, ConfigError, ExperimentConfig, Format, TestKind};
use crate::output::{self, OutputError, PlotTable, SweepCsvRow};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PXAUG_OUT_DIR";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(#[from] pxaug_core::Error),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl RunError {
    /// 2 for configuration problems, 1 for numerical or I/O failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(pxaug_core::Error::Domain(_)) => 2,
            RunError::Numerical(_) | RunError::Output(_) => 1,
        }
    }
}

/// Bytes produced by one run, before anything touches the filesystem.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub results: Vec<u8>,
    pub plot: Option<Vec<u8>>,
}

#[derive(Serialize)]
struct AffinityOutput {
    affinity: f64,
    raw_value: f64,
    abs_error_estimate: f64,
    evaluations: usize,
    hellinger_sq: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    product_affinity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    product_hellinger_sq: Option<f64>,
}

#[derive(Serialize)]
struct BoundOutput {
    theta0: f64,
    theta1: f64,
    marginal_bound: f64,
    marginal_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    expanded_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expanded_error: Option<f64>,
}

#[derive(Serialize)]
struct RMeasureOutput {
    theta0: f64,
    theta1: f64,
    marginal_bound: f64,
    marginal_error: f64,
    expanded_bound: f64,
    expanded_error: f64,
    r_measure: f64,
    combined_error: f64,
    strict: bool,
}

#[derive(Serialize)]
struct DecisionOutput {
    t1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    t2: Option<f64>,
    phi_reject_h0: bool,
    phi_log_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi_reject_h0: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi_log_ratio: Option<f64>,
}

#[derive(Serialize)]
struct SweepOutput {
    test: TestKind,
    theta0: f64,
    replicates: usize,
    seed: u64,
    rows: Vec<SweepCsvRow>,
}

/// Renders a flat record as `quantity,value` CSV lines.
fn scalar_csv<T: Serialize>(record: &T) -> Vec<u8> {
    let value = serde_json::to_value(record).expect("record serializes");
    let mut out = String::from("quantity,value\n");
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            out.push_str(&format!("{k},{v}\n"));
        }
    }
    out.into_bytes()
}

fn render_scalar<T: Serialize>(record: &T, format: Format) -> Rendered {
    Rendered {
        results: match format {
            Format::Json => output::to_json(record),
            Format::Csv => scalar_csv(record),
        },
        plot: None,
    }
}

fn run_sweep(cfg: &ExperimentConfig, theta1_list: &[f64]) -> Result<Rendered, RunError> {
    let model = cfg.model()?;
    let mc = cfg.monte_carlo();
    let q = cfg.quadrature()?;
    let theta0 = cfg.theta0()?;
    let rows = match (&model, mc.test) {
        (_, TestKind::Phi) => sweep(
            SweepTarget::Phi(model.family()),
            theta0,
            theta1_list,
            mc.replicates,
            cfg.seed,
            &q,
        )?,
        (BuiltModel::Expanded(em), TestKind::Psi) => {
            sweep(SweepTarget::Psi(em), theta0, theta1_list, mc.replicates, cfg.seed, &q)?
        }
        (BuiltModel::Marginal(_), TestKind::Psi) => {
            return Err(ConfigError::Invalid {
                field: "monte_carlo.test",
                message: "psi needs an expanded model".into(),
            }
            .into())
        }
    };
    let csv_rows: Vec<SweepCsvRow> = rows.iter().map(SweepCsvRow::from).collect();
    let results = match cfg.format {
        Format::Csv => output::to_csv(&csv_rows)?,
        Format::Json => output::to_json(&SweepOutput {
            test: mc.test,
            theta0,
            replicates: mc.replicates,
            seed: cfg.seed,
            rows: csv_rows,
        }),
    };
    Ok(Rendered {
        results,
        plot: Some(output::plot_data(PlotTable::Sweep(&rows))?),
    })
}

/// Runs the configured pipeline and returns the rendered outputs.
pub fn execute(cfg: &ExperimentConfig) -> Result<Rendered, RunError> {
    cfg.validate()?;
    let q = cfg.quadrature()?;
    let command = cfg.command.ok_or(ConfigError::Missing("command"))?;
    match command {
        Command::Affinity => {
            let spec = cfg.affinity_spec()?;
            let base = cfg.base_dir.as_deref();
            let f = spec.f.build("affinity.f", base)?;
            let g = spec.g.build("affinity.g", base)?;
            let r = affinity(&f, &g, &q)?;
            let product = spec
                .n
                .map(|n| product_affinity_iid(&f, &g, n, &q))
                .transpose()?;
            Ok(render_scalar(
                &AffinityOutput {
                    affinity: r.value,
                    raw_value: r.raw_value,
                    abs_error_estimate: r.abs_error_estimate,
                    evaluations: r.evaluations,
                    hellinger_sq: 2.0 * (1.0 - r.value),
                    n: spec.n,
                    product_affinity: product,
                    product_hellinger_sq: product.map(|p| 2.0 * (1.0 - p)),
                },
                cfg.format,
            ))
        }
        Command::Bound => {
            let model = cfg.model()?;
            let hyp = cfg.hypotheses()?;
            let m = marginal_bound(model.family(), &hyp, &q)?;
            let e = match &model {
                BuiltModel::Expanded(em) => Some(expanded_bound(em, &hyp, &q)?),
                BuiltModel::Marginal(_) => None,
            };
            Ok(render_scalar(
                &BoundOutput {
                    theta0: hyp.theta0(),
                    theta1: hyp.theta1(),
                    marginal_bound: m.value,
                    marginal_error: m.abs_error_estimate,
                    expanded_bound: e.map(|e| e.value),
                    expanded_error: e.map(|e| e.abs_error_estimate),
                },
                cfg.format,
            ))
        }
        Command::RMeasure => {
            let em = cfg.expanded_model()?;
            let hyp = cfg.hypotheses()?;
            let c = activation_measure(&em, &hyp, &q)?;
            Ok(render_scalar(
                &RMeasureOutput {
                    theta0: hyp.theta0(),
                    theta1: hyp.theta1(),
                    marginal_bound: c.marginal_bound.value,
                    marginal_error: c.marginal_bound.abs_error_estimate,
                    expanded_bound: c.expanded_bound.value,
                    expanded_error: c.expanded_bound.abs_error_estimate,
                    r_measure: c.r_measure,
                    combined_error: c.combined_error(),
                    strict: c.strict,
                },
                cfg.format,
            ))
        }
        Command::Test => {
            let hyp = cfg.hypotheses()?;
            match cfg.observation {
                Some(obs) => decide(cfg, &hyp, obs.t1, obs.t2),
                None => run_sweep(cfg, &[hyp.theta1()]),
            }
        }
        Command::McSweep => {
            let list = cfg
                .monte_carlo()
                .theta1_list
                .ok_or(ConfigError::Missing("monte_carlo.theta1_list"))?;
            run_sweep(cfg, &list)
        }
        Command::Survey => {
            let s = cfg.survey_spec()?;
            let c = compare_schemes(
                &s.population(cfg.seed),
                &s.accuracy()?,
                s.quantile,
                s.replications,
                cfg.seed,
            )?;
            let results = match cfg.format {
                Format::Csv => output::to_csv(&output::survey_rows(&c))?,
                Format::Json => output::to_json(&c),
            };
            Ok(Rendered {
                results,
                plot: Some(output::plot_data(PlotTable::Survey(&c))?),
            })
        }
    }
}

fn decide(
    cfg: &ExperimentConfig,
    hyp: &SimpleHypotheses,
    t1: f64,
    t2: Option<f64>,
) -> Result<Rendered, RunError> {
    let model = cfg.model()?;
    let phi = phi_decide(t1, model.family(), hyp)?;
    let psi = match (&model, t2) {
        (BuiltModel::Expanded(em), Some(t2)) => Some(psi_decide(t1, t2, em, hyp)?),
        _ => None,
    };
    Ok(render_scalar(
        &DecisionOutput {
            t1,
            t2,
            phi_reject_h0: phi.reject_h0,
            phi_log_ratio: phi.log_ratio,
            psi_reject_h0: psi.map(|d| d.reject_h0),
            psi_log_ratio: psi.map(|d| d.log_ratio),
        },
        cfg.format,
    ))
}

/// Provenance written next to every results file.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub format: Format,
    pub results: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    /// The effective configuration, as TOML; feeding it back reproduces the results.
    pub config: String,
    /// Base for relative paths inside `config`.
    pub config_dir: Option<PathBuf>,
    pub wall_time_ms: u128,
}

/// Where the results went.
#[derive(Debug)]
pub struct RunOutcome {
    pub rendered: Rendered,
    pub manifest: Manifest,
    pub results_path: Option<PathBuf>,
    pub manifest_path: Option<PathBuf>,
}

fn resolve_out(cfg: &ExperimentConfig, env_out_dir: Option<&Path>, command: Command) -> Option<PathBuf> {
    cfg.out.clone().or_else(|| {
        env_out_dir.map(|d| d.join(format!("{}.{}", command.name(), cfg.format.extension())))
    })
}

/// Executes `cfg` and writes results, plot data and manifest. Without an
/// output path the caller receives the bytes and writes nothing.
pub fn run(cfg: &ExperimentConfig, env_out_dir: Option<&Path>) -> Result<RunOutcome, RunError> {
    let started = Instant::now();
    let command = cfg.command.ok_or(ConfigError::Missing("command"))?;
    let rendered = execute(cfg)?;
    let results_path = resolve_out(cfg, env_out_dir, command);

    let mut plot_path = None;
    let mut manifest_path = None;
    if let Some(path) = &results_path {
        output::atomic_write(path, &rendered.results)?;
        if let Some(plot) = &rendered.plot {
            let p = output::sibling(path, "plot.csv");
            output::atomic_write(&p, plot)?;
            plot_path = Some(p);
        }
        manifest_path = Some(output::sibling(path, "manifest.json"));
    }
    let mut effective = cfg.clone();
    effective.out = None;
    let manifest = Manifest {
        tool: "pxaug",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        seed: cfg.seed,
        format: cfg.format,
        results: results_path.clone(),
        plot: plot_path,
        config: effective.to_toml(),
        config_dir: cfg.base_dir.clone(),
        wall_time_ms: started.elapsed().as_millis(),
    };
    if let Some(p) = &manifest_path {
        output::atomic_write(p, &output::to_json(&manifest))?;
    }
    Ok(RunOutcome {
        rendered,
        manifest,
        results_path,
        manifest_path,
    })
}
