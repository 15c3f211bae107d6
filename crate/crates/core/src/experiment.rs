//! Multi-seed batches, parameter sweeps and CSV output.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::sim::simulate;
use crate::traffic::{confidence_interval, mean_current_pdr, DropCounts, PdrSample};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid {param} value {value}: {reason}")]
    InvalidValue { param: &'static str, value: f64, reason: &'static str },
    #[error("sweep needs at least one value")]
    EmptySweep,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Lambda,
    Nodes,
    Streams,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Nodes => "nodes",
            SweepParam::Streams => "streams",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, ExperimentError> {
        let invalid = |reason| ExperimentError::InvalidValue { param: self.as_str(), value, reason };
        let mut cfg = base.clone();
        match self {
            SweepParam::Lambda => {
                if !value.is_finite() || value < 0.0 {
                    return Err(invalid("must be a finite number >= 0"));
                }
                cfg.lambda = value;
            }
            SweepParam::Nodes | SweepParam::Streams => {
                if !value.is_finite() || value.fract() != 0.0 || value < 0.0 {
                    return Err(invalid("must be a non-negative integer"));
                }
                if self == SweepParam::Nodes {
                    cfg.nodes = value as usize;
                } else {
                    cfg.streams = value as usize;
                }
            }
        }
        cfg.validate().map_err(|e| match e {
            ConfigError::Invalid { .. } => invalid("fails scenario validation"),
            other => other.into(),
        })?;
        Ok(cfg)
    }
}

/// One CSV row: one simulation of one configuration with one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub protocol: String,
    pub balanced: bool,
    pub lambda: f64,
    pub nodes: usize,
    pub streams: usize,
    pub seed: u64,
    pub ok: bool,
    pub sent: u64,
    pub received: u64,
    pub overall_pdr: Option<f64>,
    pub mean_current_pdr: Option<f64>,
    pub drops: DropCounts,
    pub control_messages: u64,
    /// Simulated seconds.
    pub runtime_s: f64,
    pub events: u64,
    pub error: String,
}

pub const CSV_HEADER: [&str; 22] = [
    "scenario",
    "protocol",
    "balanced",
    "lambda",
    "nodes",
    "streams",
    "seed",
    "status",
    "sent",
    "received",
    "overall_pdr",
    "mean_current_pdr",
    "drop_collision",
    "drop_queue_overflow",
    "drop_no_route",
    "drop_ttl",
    "drop_out_of_range",
    "drop_total",
    "control_messages",
    "runtime_s",
    "events",
    "error",
];

/// Shortest decimal with 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = 8 - exp;
    if !(0..=17).contains(&decimals) {
        return format!("{x:.8e}");
    }
    let s = format!("{:.*}", decimals as usize, x);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig9).unwrap_or_default()
}

impl ResultRow {
    pub fn failed(cfg: &ScenarioConfig, seed: u64, error: String) -> Self {
        ResultRow {
            scenario: cfg.name.clone(),
            protocol: cfg.protocol.as_str().into(),
            balanced: cfg.balancing,
            lambda: cfg.lambda,
            nodes: cfg.nodes,
            streams: cfg.streams,
            seed,
            ok: false,
            sent: 0,
            received: 0,
            overall_pdr: None,
            mean_current_pdr: None,
            drops: DropCounts::default(),
            control_messages: 0,
            runtime_s: 0.0,
            events: 0,
            error,
        }
    }

    pub fn fields(&self) -> Vec<String> {
        let d = &self.drops;
        vec![
            self.scenario.clone(),
            self.protocol.clone(),
            self.balanced.to_string(),
            format_sig9(self.lambda),
            self.nodes.to_string(),
            self.streams.to_string(),
            self.seed.to_string(),
            if self.ok { "ok" } else { "failed" }.into(),
            self.sent.to_string(),
            self.received.to_string(),
            opt(self.overall_pdr),
            opt(self.mean_current_pdr),
            d.collision.to_string(),
            d.queue_overflow.to_string(),
            d.no_route.to_string(),
            d.ttl.to_string(),
            d.out_of_range.to_string(),
            d.total().to_string(),
            self.control_messages.to_string(),
            format_sig9(self.runtime_s),
            self.events.to_string(),
            self.error.clone(),
        ]
    }
}

/// A finished run: its CSV row plus the windowed PDR trace.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub row: ResultRow,
    pub trace: Vec<PdrSample>,
    pub conserved: bool,
}

pub fn run_one(cfg: &ScenarioConfig, seed: u64) -> RunResult {
    match catch_unwind(AssertUnwindSafe(|| simulate(cfg, seed))) {
        Ok(report) => {
            let trace = report.pdr_series();
            let mut drops = DropCounts::default();
            for s in &report.streams {
                drops.merge(&s.stats.drops);
            }
            let row = ResultRow {
                scenario: cfg.name.clone(),
                protocol: cfg.protocol.as_str().into(),
                balanced: cfg.balancing,
                lambda: cfg.lambda,
                nodes: cfg.nodes,
                streams: cfg.streams,
                seed,
                ok: true,
                sent: report.sent(),
                received: report.received(),
                overall_pdr: report.overall_pdr(),
                mean_current_pdr: mean_current_pdr(&trace),
                drops,
                control_messages: report.control_transmissions,
                runtime_s: report.end.as_secs_f64(),
                events: report.events,
                error: String::new(),
            };
            RunResult { row, trace, conserved: report.conserved() }
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "run panicked".into());
            RunResult { row: ResultRow::failed(cfg, seed, msg), trace: Vec::new(), conserved: false }
        }
    }
}

/// Runs every job and returns results in job order.
pub fn run_jobs(jobs: &[(ScenarioConfig, u64)], exec: Execution) -> Vec<RunResult> {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            jobs.par_iter().map(|(cfg, seed)| run_one(cfg, *seed)).collect()
        }
        _ => jobs.iter().map(|(cfg, seed)| run_one(cfg, *seed)).collect(),
    }
}

pub fn run_batch(cfg: &ScenarioConfig, seeds: &[u64], exec: Execution) -> Vec<RunResult> {
    let jobs: Vec<_> = seeds.iter().map(|&s| (cfg.clone(), s)).collect();
    run_jobs(&jobs, exec)
}

/// One row per seed, in seed order.
pub fn run_experiment(cfg: &ScenarioConfig, seeds: &[u64]) -> Vec<ResultRow> {
    run_batch(cfg, seeds, Execution::default()).into_iter().map(|r| r.row).collect()
}

/// Configurations for each sweep value; fails before anything runs.
pub fn sweep_configs(
    cfg: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<ScenarioConfig>, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::EmptySweep);
    }
    values.iter().map(|&v| param.apply(cfg, v)).collect()
}

pub fn sweep_results(
    cfg: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<RunResult>, ExperimentError> {
    let configs = sweep_configs(cfg, param, values)?;
    let jobs: Vec<_> = configs
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (c.clone(), s)))
        .collect();
    Ok(run_jobs(&jobs, exec))
}

/// Value-major product of `values` x `seeds`.
pub fn sweep(
    cfg: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
    seeds: &[u64],
) -> Result<Vec<ResultRow>, ExperimentError> {
    Ok(sweep_results(cfg, param, values, seeds, Execution::default())?
        .into_iter()
        .map(|r| r.row)
        .collect())
}

/// Plain then balanced, on the same seeds.
pub fn compare_results(cfg: &ScenarioConfig, seeds: &[u64], exec: Execution) -> Vec<RunResult> {
    let plain = ScenarioConfig { balancing: false, ..cfg.clone() };
    let balanced = ScenarioConfig { balancing: true, ..cfg.clone() };
    let jobs: Vec<_> = [plain, balanced]
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (c.clone(), s)))
        .collect();
    run_jobs(&jobs, exec)
}

pub fn write_csv_to<W: Write>(rows: &[ResultRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<(), ExperimentError> {
    let file = std::fs::File::create(path)?;
    write_csv_to(rows, std::io::BufWriter::new(file))
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv_to(rows, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8")
}

pub fn write_trace<W: Write>(trace: &[PdrSample], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["window_end_s", "sent", "received", "current_pdr"])?;
    for s in trace {
        w.write_record([
            format_sig9(s.window_end.as_secs_f64()),
            s.sent.to_string(),
            s.received.to_string(),
            opt(s.pdr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean overall PDR with a 95 % interval for one configuration group.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub protocol: String,
    pub balanced: bool,
    pub lambda: f64,
    pub nodes: usize,
    pub streams: usize,
    pub runs: usize,
    pub failed: usize,
    pub mean_pdr: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<Summary> {
    let mut groups: BTreeMap<(String, bool, u64, usize, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.protocol.clone(), r.balanced, r.lambda.to_bits(), r.nodes, r.streams))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((protocol, balanced, lambda, nodes, streams), rs)| {
            let pdrs: Vec<f64> = rs.iter().filter_map(|r| r.overall_pdr).collect();
            let mean = (!pdrs.is_empty()).then(|| pdrs.iter().sum::<f64>() / pdrs.len() as f64);
            let ci = confidence_interval(&pdrs, 0.95).ok();
            Summary {
                protocol,
                balanced,
                lambda: f64::from_bits(lambda),
                nodes,
                streams,
                runs: rs.len(),
                failed: rs.iter().filter(|r| !r.ok).count(),
                mean_pdr: mean,
                ci_lo: ci.map(|c| c.lo),
                ci_hi: ci.map(|c| c.hi),
            }
        })
        .collect()
}
