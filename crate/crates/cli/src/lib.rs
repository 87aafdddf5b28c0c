//! Experiment driver behind the `curvex` binary.

pub mod config;
pub mod experiments;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use curvex_core::expansion::{Sample, SeriesCoefficients};
use serde::Serialize;
use thiserror::Error;

pub use config::{ConfigError, Experiment, RunConfig, TolerancePolicy};
pub use experiments::{run_experiment, Extracted, Outcome, PlotSeries, Predicted};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] curvex_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv serialization failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("no samples to write")]
    EmptySamples,
    #[error("{0}")]
    Unsupported(String),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub curvex: &'static str,
    pub curvex_core: &'static str,
}

pub const VERSIONS: Versions = Versions { curvex: env!("CARGO_PKG_VERSION"), curvex_core: curvex_core::VERSION };

/// The JSON result document; keys are stable.
#[derive(Debug, Serialize)]
pub struct ResultDocument<'a> {
    pub config: &'a RunConfig,
    pub experiment: Experiment,
    pub predicted: Option<Predicted>,
    pub extracted: Option<Extracted>,
    pub pass: bool,
    pub margins: &'a BTreeMap<String, f64>,
    pub details: &'a serde_json::Value,
    pub versions: Versions,
    pub tolerance_policy: &'a TolerancePolicy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

pub fn result_json(cfg: &RunConfig, out: &Outcome, timestamp: Option<u64>) -> Result<String, CliError> {
    let doc = ResultDocument {
        config: cfg,
        experiment: out.experiment,
        predicted: out.predicted,
        extracted: out.extracted,
        pass: out.pass,
        margins: &out.margins,
        details: &out.details,
        versions: VERSIONS,
        tolerance_policy: &cfg.tolerance,
        timestamp,
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

/// Writes `t, value, fitted, predicted, residual` rows, `residual = value - fitted`.
/// Nothing is written when `samples` is empty.
pub fn emit_plotdata(
    samples: &[Sample],
    fit: &SeriesCoefficients,
    prediction: &SeriesCoefficients,
    path: &Path,
) -> Result<(), CliError> {
    if samples.is_empty() {
        return Err(CliError::EmptySamples);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "value", "fitted", "predicted", "residual"])?;
    for s in samples {
        let fitted = fit.eval(s.t);
        let row = [s.t, s.value, fitted, prediction.eval(s.t), s.value - fitted];
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub timestamp: bool,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub pass: bool,
    pub json_path: PathBuf,
    pub csv_path: Option<PathBuf>,
}

/// Runs the configured experiment and writes `<experiment>.json` (and
/// `<experiment>.csv` for series experiments) into `opts.out_dir`.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    let experiment = cfg
        .experiment
        .ok_or_else(|| CliError::Unsupported("no experiment selected".into()))?;
    let outcome = run_experiment(cfg, experiment)?;
    let timestamp = opts
        .timestamp
        .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
    let json = result_json(cfg, &outcome, timestamp)?;
    fs::create_dir_all(&opts.out_dir).map_err(|e| CliError::io(&opts.out_dir, e))?;
    let json_path = opts.out_dir.join(format!("{experiment}.json"));
    fs::write(&json_path, json).map_err(|e| CliError::io(&json_path, e))?;
    let csv_path = match (&outcome.plot, cfg.output.plotdata) {
        (Some(p), true) => {
            let path = opts.out_dir.join(format!("{experiment}.csv"));
            emit_plotdata(&p.samples, &p.fit, &p.prediction, &path)?;
            Some(path)
        }
        _ => None,
    };
    Ok(RunReport { pass: outcome.pass, json_path, csv_path })
}
