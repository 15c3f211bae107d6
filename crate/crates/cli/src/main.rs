//! Command-line front end: single batches, parameter sweeps and
//! plain-vs-balanced comparisons, all written as CSV.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use manet_lb::experiment::{
    compare_results, csv_string, run_batch, summarize, sweep_results, write_csv, write_trace, Execution,
    RunResult, SweepParam,
};
use manet_lb::{Protocol, ScenarioConfig};

#[derive(Parser)]
#[command(name = "manet-lb", version, about = "MANET load-balancing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario once per seed.
    Run(Common),
    /// Sweep the path-quality likelihood lambda.
    SweepLambda(SweepArgs),
    /// Sweep the node count.
    SweepNodes(SweepArgs),
    /// Sweep the number of parallel streams.
    SweepStreams(SweepArgs),
    /// Plain routing vs balanced forwarding on identical seeds.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Unset keys take the reference defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed list, e.g. `1,2,5` or `1-25`.
    #[arg(long)]
    seeds: Option<String>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the routing protocol (batman, golsr, batmobile).
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Directory for per-run windowed PDR traces.
    #[arg(long)]
    trace_pdr: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated values; defaults depend on the parameter.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
}

enum Failure {
    Config(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Run(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Run(m) => m,
        }
    }
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
                let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
                if b < a {
                    return Err(format!("empty seed range `{part}`"));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| format!("bad seed `{part}`"))?),
        }
    }
    Ok(seeds)
}

fn load(common: &Common) -> Result<(ScenarioConfig, Vec<u64>), Failure> {
    let mut cfg = match &common.config {
        Some(path) => ScenarioConfig::load(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
        None => ScenarioConfig::default(),
    };
    if let Some(p) = common.protocol {
        cfg.protocol = p;
    }
    let seeds = match (&common.seeds, common.seed) {
        (Some(spec), _) => parse_seeds(spec).map_err(Failure::Config)?,
        (None, Some(s)) => vec![s],
        (None, None) => (cfg.seed..cfg.seed + cfg.runs as u64).collect(),
    };
    Ok((cfg, seeds))
}

fn trace_name(r: &RunResult) -> String {
    let row = &r.row;
    let mode = if row.balanced { format!("lambda{}", row.lambda) } else { "plain".into() };
    format!(
        "{}_{}_{}_n{}_s{}_seed{}.csv",
        row.scenario, row.protocol, mode, row.nodes, row.streams, row.seed
    )
}

fn emit(results: &[RunResult], common: &Common) -> Result<(), Failure> {
    let rows: Vec<_> = results.iter().map(|r| r.row.clone()).collect();
    match &common.out {
        Some(path) => write_csv(&rows, path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(csv_string(&rows).as_bytes())
                .map_err(|e| Failure::Run(e.to_string()))?;
        }
    }
    if let Some(dir) = &common.trace_pdr {
        write_traces(results, dir)?;
    }
    for s in summarize(&rows) {
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        eprintln!(
            "{:<9} {:<8} lambda={:<4} nodes={:<3} streams={} runs={} failed={} pdr={} ci95=[{}, {}]",
            s.protocol,
            if s.balanced { "balanced" } else { "plain" },
            s.lambda,
            s.nodes,
            s.streams,
            s.runs,
            s.failed,
            fmt(s.mean_pdr),
            fmt(s.ci_lo),
            fmt(s.ci_hi),
        );
    }
    let failed: Vec<_> = rows.iter().filter(|r| !r.ok).collect();
    if let Some(first) = failed.first() {
        return Err(Failure::Run(format!(
            "{} run(s) failed; first: seed {}: {}",
            failed.len(),
            first.seed,
            first.error
        )));
    }
    Ok(())
}

fn write_traces(results: &[RunResult], dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))?;
    for r in results.iter().filter(|r| r.row.ok) {
        let path = dir.join(trace_name(r));
        let file = std::fs::File::create(&path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
        write_trace(&r.trace, std::io::BufWriter::new(file))
            .map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn default_values(param: SweepParam) -> Vec<f64> {
    match param {
        SweepParam::Lambda => vec![0.0, 0.3, 0.6, 0.9, 1.0, 1.1],
        SweepParam::Nodes => vec![5.0, 10.0, 15.0, 20.0, 25.0],
        SweepParam::Streams => vec![1.0, 2.0, 3.0],
    }
}

fn run_sweep(args: &SweepArgs, param: SweepParam) -> Result<(), Failure> {
    let (mut cfg, seeds) = load(&args.common)?;
    if param == SweepParam::Lambda {
        cfg.balancing = true;
    }
    let values = if args.values.is_empty() { default_values(param) } else { args.values.clone() };
    let results =
        sweep_results(&cfg, param, &values, &seeds, Execution::default()).map_err(|e| Failure::Config(e.to_string()))?;
    emit(&results, &args.common)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run(common) => {
            let (cfg, seeds) = load(common)?;
            emit(&run_batch(&cfg, &seeds, Execution::default()), common)
        }
        Command::Compare(common) => {
            let (cfg, seeds) = load(common)?;
            emit(&compare_results(&cfg, &seeds, Execution::default()), common)
        }
        Command::SweepLambda(a) => run_sweep(a, SweepParam::Lambda),
        Command::SweepNodes(a) => run_sweep(a, SweepParam::Nodes),
        Command::SweepStreams(a) => run_sweep(a, SweepParam::Streams),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
