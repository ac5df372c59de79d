//! Monte Carlo sweeps over paired realizations.
//!
//! Every (sweep value, realization) pair draws one scenario from its own
//! random stream; all schemes then run on that scenario from the same
//! generator state, so they also share the initial deployment.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::EnvParams;
use crate::framework::{run_bca, BcaConfig, FrameworkError, IterationRecord, Scheme};
use crate::positioning::AltitudeUpdate;
use crate::power::PowerConfig;
use crate::scenario::{mix64, Region, Scenario};

pub const RESULTS_FILE: &str = "results.csv";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const DEFAULT_REALIZATIONS: usize = 200;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("output {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
    #[error("no result rows to aggregate")]
    NoRows,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "gamma0_db")]
    Gamma0Db,
    #[serde(rename = "n_nodes")]
    NNodes,
    #[serde(rename = "gamma_p_db")]
    GammaPDb,
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gamma0_db" => Ok(SweepAxis::Gamma0Db),
            "n_nodes" => Ok(SweepAxis::NNodes),
            "gamma_p_db" => Ok(SweepAxis::GammaPDb),
            _ => Err(format!("unknown sweep axis {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_nodes: usize,
    pub n_subchannels: usize,
    pub n_it: usize,
    pub gamma_p_db: f64,
    pub gamma0_db: f64,
    pub q: f64,
    pub env: EnvParams,
    pub region: Region,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub realizations: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Fill the runtime column with wall-clock times. Off by default so that
    /// reruns produce byte-identical files.
    pub record_runtime: bool,
    pub power_every_iteration: bool,
    pub altitude_update: AltitudeUpdate,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_nodes: 80,
            n_subchannels: 8,
            n_it: 5,
            gamma_p_db: 20.0,
            gamma0_db: -10.0,
            q: 0.5,
            env: EnvParams::urban(),
            region: Region::table_defaults(),
            sweep_axis: SweepAxis::Gamma0Db,
            sweep_values: vec![-10.0],
            realizations: DEFAULT_REALIZATIONS,
            schemes: vec![Scheme::Proposed],
            seed: 1,
            workers: 0,
            record_runtime: false,
            power_every_iteration: false,
            altitude_update: AltitudeUpdate::Sequential,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, HarnessError> {
    v.parse().map_err(|_| HarnessError::Config { line, reason: format!("bad value {v:?} for {key}") })
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>, HarnessError> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_value(line, key, s)).collect()
}

impl ExperimentConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment;
    /// list values are comma separated.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| HarnessError::Config { line, reason: format!("expected key = value, got {body:?}") })?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "n_nodes" => c.n_nodes = parse_value(line, key, v)?,
                "n_subchannels" => c.n_subchannels = parse_value(line, key, v)?,
                "n_it" => c.n_it = parse_value(line, key, v)?,
                "gamma_p_db" => c.gamma_p_db = parse_value(line, key, v)?,
                "gamma0_db" => c.gamma0_db = parse_value(line, key, v)?,
                "q" => c.q = parse_value(line, key, v)?,
                "psi" => c.env.psi = parse_value(line, key, v)?,
                "omega" => c.env.omega = parse_value(line, key, v)?,
                "eta_los" => c.env.eta_los = parse_value(line, key, v)?,
                "eta_nlos" => c.env.eta_nlos = parse_value(line, key, v)?,
                "alpha_j" => c.env.alpha_j = parse_value(line, key, v)?,
                "alpha_g" => c.env.alpha_g = parse_value(line, key, v)?,
                "x_min" => c.region.x_min = parse_value(line, key, v)?,
                "x_max" => c.region.x_max = parse_value(line, key, v)?,
                "y_min" => c.region.y_min = parse_value(line, key, v)?,
                "y_max" => c.region.y_max = parse_value(line, key, v)?,
                "z_min" => c.region.z_min = parse_value(line, key, v)?,
                "z_max" => c.region.z_max = parse_value(line, key, v)?,
                "n_z" => c.region.n_altitude_levels = parse_value(line, key, v)?,
                "sweep_axis" => {
                    c.sweep_axis = v.parse().map_err(|reason| HarnessError::Config { line, reason })?
                }
                "sweep_values" => c.sweep_values = parse_list(line, key, v)?,
                "realizations" => c.realizations = parse_value(line, key, v)?,
                "schemes" => c.schemes = parse_list(line, key, v)?,
                "seed" => c.seed = parse_value(line, key, v)?,
                "workers" => c.workers = parse_value(line, key, v)?,
                "record_runtime" => c.record_runtime = parse_value(line, key, v)?,
                "power_every_iteration" => c.power_every_iteration = parse_value(line, key, v)?,
                "altitude_update" => {
                    c.altitude_update = match v {
                        "sequential" => AltitudeUpdate::Sequential,
                        "simultaneous" => AltitudeUpdate::Simultaneous,
                        _ => return Err(HarnessError::Config { line, reason: format!("bad value {v:?} for {key}") }),
                    }
                }
                _ => return Err(HarnessError::Config { line, reason: format!("unknown key {key:?}") }),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |s: &str| Err(HarnessError::Invalid(s.to_string()));
        if self.realizations == 0 {
            return bad("realizations must be at least 1");
        }
        if self.sweep_values.is_empty() {
            return bad("sweep_values must not be empty");
        }
        if self.sweep_values.iter().any(|v| !v.is_finite()) {
            return bad("sweep_values must be finite");
        }
        if self.sweep_values.windows(2).any(|w| w[0] > w[1]) {
            return bad("sweep_values must be sorted");
        }
        if self.schemes.is_empty() {
            return bad("schemes must not be empty");
        }
        if self.sweep_axis == SweepAxis::NNodes && self.sweep_values.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
            return bad("n_nodes sweep values must be positive integers");
        }
        if self.n_nodes == 0 {
            return bad("n_nodes must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.q) {
            return bad("q must lie in [0, 1]");
        }
        self.region.validate().map_err(|e| HarnessError::Invalid(e.to_string()))?;
        self.bca_config(self.sweep_values[0]).1.validate()?;
        Ok(())
    }

    /// Node count and base BCA settings at one sweep value.
    pub fn bca_config(&self, value: f64) -> (usize, BcaConfig) {
        let mut n_nodes = self.n_nodes;
        let mut gamma0_db = self.gamma0_db;
        let mut gamma_p_db = self.gamma_p_db;
        match self.sweep_axis {
            SweepAxis::Gamma0Db => gamma0_db = value,
            SweepAxis::NNodes => n_nodes = value as usize,
            SweepAxis::GammaPDb => gamma_p_db = value,
        }
        let config = BcaConfig {
            n_it: self.n_it,
            n_subchannels: self.n_subchannels,
            gamma_p: db_to_linear(gamma_p_db),
            env: self.env,
            power_cfg: PowerConfig { gamma_0: db_to_linear(gamma0_db), ..PowerConfig::default() },
            power_every_iteration: self.power_every_iteration,
            altitude_update: self.altitude_update,
            ..BcaConfig::default()
        };
        (n_nodes, config)
    }

    /// Stream id of one realization at one sweep value.
    pub fn stream_id(&self, value: f64, realization: usize) -> u64 {
        mix64(value.to_bits() ^ mix64(realization as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub realization: usize,
    pub sum_secrecy_rate: f64,
    pub positive_secrecy_pct: f64,
    pub association_rounds: usize,
    pub altitude_rounds: usize,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    /// Per-iteration records, aligned with `rows`.
    pub iterations: Vec<Vec<IterationRecord>>,
}

fn run_point(
    config: &ExperimentConfig,
    value: f64,
    realization: usize,
) -> Result<Vec<(ResultRow, Vec<IterationRecord>)>, HarnessError> {
    let (n_nodes, base) = config.bca_config(value);
    let stream = config.stream_id(value, realization);
    let (scenario, rng) = Scenario::sample_nonempty(config.region, n_nodes, config.q, config.seed, stream)
        .map_err(FrameworkError::from)?;
    config
        .schemes
        .iter()
        .map(|scheme| {
            let bca = scheme.configure(&base);
            let start = Instant::now();
            let record = run_bca(&scenario, &bca, &mut rng.clone())?;
            let runtime_ms = if config.record_runtime { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            let last = record.final_metrics();
            let row = ResultRow {
                scheme: *scheme,
                sweep_value: value,
                realization,
                sum_secrecy_rate: last.sum_secrecy_rate,
                positive_secrecy_pct: last.positive_secrecy_pct,
                association_rounds: record.max_association_rounds(),
                altitude_rounds: record.max_altitude_rounds(),
                runtime_ms,
            };
            Ok((row, record.iterations))
        })
        .collect()
}

/// Runs every (value, realization, scheme) triple. Rows come back in that
/// order whatever the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let points: Vec<(f64, usize)> = config
        .sweep_values
        .iter()
        .flat_map(|v| (0..config.realizations).map(move |r| (*v, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Invalid(e.to_string()))?;
    let per_point: Vec<_> =
        pool.install(|| points.par_iter().map(|(v, r)| run_point(config, *v, *r)).collect::<Result<Vec<_>, _>>())?;
    let (rows, iterations) = per_point.into_iter().flatten().unzip();
    Ok(RunOutput { rows, iterations })
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>, HarnessError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(HarnessError::from)).collect()
}

pub fn write_iterations<W: Write>(output: &RunOutput, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scheme",
        "sweep_value",
        "realization",
        "iteration",
        "executed",
        "sum_secrecy_rate",
        "positive_secrecy_pct",
        "association_rounds",
        "altitude_rounds",
    ])?;
    for (row, records) in output.rows.iter().zip(&output.iterations) {
        for r in records {
            w.serialize((
                row.scheme,
                row.sweep_value,
                row.realization,
                r.iteration,
                r.executed,
                r.sum_secrecy_rate,
                r.positive_secrecy_pct,
                r.association_rounds,
                r.altitude_rounds,
            ))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub count: usize,
    pub sum_secrecy_rate_mean: f64,
    pub sum_secrecy_rate_stderr: f64,
    pub positive_secrecy_pct_mean: f64,
    pub positive_secrecy_pct_stderr: f64,
}

/// Sample mean and standard error of the mean (n − 1 denominator; 0 for one sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Groups rows by (scheme, sweep value) in order of first appearance.
pub fn aggregate(rows: &[ResultRow]) -> Result<Vec<SummaryRow>, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::NoRows);
    }
    let mut index: HashMap<(Scheme, u64), usize> = HashMap::new();
    let mut groups: Vec<Vec<&ResultRow>> = Vec::new();
    for row in rows {
        let slot = *index.entry((row.scheme, row.sweep_value.to_bits())).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(row);
    }
    Ok(groups
        .into_iter()
        .map(|g| {
            let rate: Vec<f64> = g.iter().map(|r| r.sum_secrecy_rate).collect();
            let pct: Vec<f64> = g.iter().map(|r| r.positive_secrecy_pct).collect();
            let (rm, rs) = mean_stderr(&rate);
            let (pm, ps) = mean_stderr(&pct);
            SummaryRow {
                scheme: g[0].scheme,
                sweep_value: g[0].sweep_value,
                count: g.len(),
                sum_secrecy_rate_mean: rm,
                sum_secrecy_rate_stderr: rs,
                positive_secrecy_pct_mean: pm,
                positive_secrecy_pct_stderr: ps,
            }
        })
        .collect())
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for row in summary {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>, HarnessError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(HarnessError::from)).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| HarnessError::Output { path: path.to_path_buf(), source })
}

/// Creates `dir` and opens every output file, so an unwritable destination
/// fails before any simulation work.
pub fn prepare_output(dir: &Path) -> Result<[BufWriter<File>; 3], HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Output { path: dir.to_path_buf(), source })?;
    Ok([
        create(&dir.join(RESULTS_FILE))?,
        create(&dir.join(ITERATIONS_FILE))?,
        create(&dir.join(SUMMARY_FILE))?,
    ])
}

/// Runs the experiment and writes `results.csv`, `iterations.csv` and
/// `summary.csv` into `dir`.
pub fn run_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let [results, iterations, summary] = prepare_output(dir)?;
    let output = run_experiment(config)?;
    write_rows(&output.rows, results)?;
    write_iterations(&output, iterations)?;
    write_summary(&aggregate(&output.rows)?, summary)?;
    Ok(output)
}
