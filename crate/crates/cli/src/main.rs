//! Experiment harness for the localpower distributed eigensolver simulator.
//!
//! Three subcommands:
//! * `run` — execute a sweep over (m, schedule, seed) cells from a flat
//!   `key = value` config (every key also available as a `--key value`
//!   override), writing one trace CSV per cell plus a `summary.json`.
//! * `summarize` — compare existing trace files in an aligned table and a
//!   JSON twin.
//! * `theory` — evaluate the convergence-bound calculators for a spectrum.
//!
//! Exit codes: 0 on full success, 1 when any cell or write fails at run
//! time, 2 for configuration or input errors.

mod config;
mod summarize;
mod sweep;
mod theory;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, ExperimentConfig};
use sweep::SweepError;

#[derive(Parser)]
#[command(
    name = "localpower",
    version,
    about = "Distributed truncated-eigenspace simulator: local power steps with periodic averaging"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a sweep of simulator cells and write traces + summary.
    Run(Box<RunArgs>),
    /// Tabulate existing trace CSVs.
    Summarize(SummarizeArgs),
    /// Evaluate the theoretical bounds for a spectrum.
    Theory(TheoryArgs),
}

/// Every experiment key doubles as a flag; flags override the config file.
#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// LIBSVM data file (plain or gzip).
    #[arg(long)]
    dataset: Option<String>,
    /// Expected feature dimension for LIBSVM parsing.
    #[arg(long = "expected_dim")]
    expected_dim: Option<String>,
    /// Synthetic row count.
    #[arg(long = "synthetic_n")]
    synthetic_n: Option<String>,
    /// Synthetic dimension (with synthetic_ratio).
    #[arg(long = "synthetic_d")]
    synthetic_d: Option<String>,
    /// Geometric spectrum ratio in (0, 1).
    #[arg(long = "synthetic_ratio")]
    synthetic_ratio: Option<String>,
    /// Explicit comma-separated Gram spectrum (overrides the ratio form).
    #[arg(long = "synthetic_sigmas")]
    synthetic_sigmas: Option<String>,
    /// Seed for the synthetic generator.
    #[arg(long = "synthetic_seed")]
    synthetic_seed: Option<String>,
    /// Target eigenspace rank.
    #[arg(long)]
    k: Option<String>,
    /// Iterate column count (k <= r <= d).
    #[arg(long)]
    r: Option<String>,
    /// Iteration horizon.
    #[arg(long = "T")]
    horizon: Option<String>,
    /// Semicolon-separated schedule descriptors
    /// (full | every:<p> | decay:<p> | oneshot | steps:a,b,...).
    #[arg(long)]
    schedules: Option<String>,
    /// Comma-separated worker counts.
    #[arg(long = "m_values")]
    m_values: Option<String>,
    /// Comma-separated seeds; `a..b` ranges allowed.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated accuracy targets in (0, 1].
    #[arg(long = "eps_targets")]
    eps_targets: Option<String>,
    /// Output directory for traces, cache, and summary.
    #[arg(long = "output_dir")]
    output_dir: Option<String>,
    /// Enable the per-step noise decomposition.
    #[arg(long)]
    diagnostics: Option<String>,
    /// Initialization-quality constant used by the noise threshold.
    #[arg(long = "noise_tau")]
    noise_tau: Option<String>,
    /// Accuracy constant used by the noise threshold.
    #[arg(long = "noise_eps")]
    noise_eps: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, Option<&String>)> {
        vec![
            ("dataset", self.dataset.as_ref()),
            ("expected_dim", self.expected_dim.as_ref()),
            ("synthetic_n", self.synthetic_n.as_ref()),
            ("synthetic_d", self.synthetic_d.as_ref()),
            ("synthetic_ratio", self.synthetic_ratio.as_ref()),
            ("synthetic_sigmas", self.synthetic_sigmas.as_ref()),
            ("synthetic_seed", self.synthetic_seed.as_ref()),
            ("k", self.k.as_ref()),
            ("r", self.r.as_ref()),
            ("T", self.horizon.as_ref()),
            ("schedules", self.schedules.as_ref()),
            ("m_values", self.m_values.as_ref()),
            ("seeds", self.seeds.as_ref()),
            ("eps_targets", self.eps_targets.as_ref()),
            ("output_dir", self.output_dir.as_ref()),
            ("diagnostics", self.diagnostics.as_ref()),
            ("noise_tau", self.noise_tau.as_ref()),
            ("noise_eps", self.noise_eps.as_ref()),
        ]
    }

    fn build(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut map: BTreeMap<String, String> = match &self.config {
            Some(path) => config::parse_file(path)?,
            None => BTreeMap::new(),
        };
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                map.insert(key.to_string(), v.clone());
            }
        }
        ExperimentConfig::from_map(&map)
    }
}

#[derive(Args)]
struct SummarizeArgs {
    /// Trace CSV files; alternatively use --dir.
    traces: Vec<PathBuf>,
    /// Summarize every trace-*.csv in this directory.
    #[arg(long)]
    dir: Option<PathBuf>,
    /// Accuracy targets for the comms-to-eps columns.
    #[arg(long = "eps_targets")]
    eps_targets: Option<String>,
    /// Where to write the JSON twin of the table
    /// (default: <dir>/summary_table.json or ./summary_table.json).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Comma-separated Gram spectrum, descending.
    #[arg(long)]
    sigmas: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    r: usize,
    /// Longest synchronization gap of the schedule under study.
    #[arg(long)]
    delta: usize,
    /// Measured shard deviation (scales the error floor; 0 if unknown).
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Accuracy target in (0, 1/2].
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Initialization-quality constant.
    #[arg(long, default_value_t = 6.0)]
    tau: f64,
}

fn run_cmd(args: &RunArgs) -> Result<bool, CliFailure> {
    let cfg = args.build().map_err(CliFailure::config)?;
    let (rows, all_ok) = sweep::run_sweep(&cfg).map_err(CliFailure::from_sweep)?;
    println!(
        "wrote {} cells to {}",
        rows.len(),
        cfg.output_dir.join("summary.json").display()
    );
    Ok(all_ok)
}

fn summarize_cmd(args: &SummarizeArgs) -> Result<(), CliFailure> {
    let mut traces = args.traces.clone();
    if let Some(dir) = &args.dir {
        let entries = std::fs::read_dir(dir)
            .map_err(|e| CliFailure::config(format!("cannot read {}: {e}", dir.display())))?;
        let mut found: Vec<PathBuf> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .map(|n| {
                        let n = n.to_string_lossy();
                        n.starts_with("trace-") && n.ends_with(".csv")
                    })
                    .unwrap_or(false)
            })
            .collect();
        found.sort();
        traces.extend(found);
    }
    let eps_targets = match &args.eps_targets {
        Some(list) => config::parse_f64_list("eps_targets", list).map_err(CliFailure::config)?,
        None => Vec::new(),
    };
    let json_out = args.json.clone().unwrap_or_else(|| {
        args.dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
            .join("summary_table.json")
    });
    summarize::summarize(&traces, &eps_targets, &json_out).map_err(|e| match e {
        summarize::SummarizeError::Write(_) => CliFailure::runtime(e),
        _ => CliFailure::config(e),
    })
}

fn theory_cmd(args: &TheoryArgs) -> Result<(), CliFailure> {
    let sigmas: Vec<f64> = args
        .sigmas
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| CliFailure::config(format!("--sigmas: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let out = theory::evaluate(
        &sigmas, args.k, args.r, args.delta, args.eta, args.eps, args.tau,
    )
    .map_err(CliFailure::config)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&out).expect("serializable")
    );
    Ok(())
}

/// A classified failure: exit code 2 for configuration/input trouble, 1 for
/// runtime trouble.
struct CliFailure {
    message: String,
    code: u8,
}

impl CliFailure {
    fn config(err: impl std::fmt::Display) -> Self {
        CliFailure {
            message: err.to_string(),
            code: 2,
        }
    }

    fn runtime(err: impl std::fmt::Display) -> Self {
        CliFailure {
            message: err.to_string(),
            code: 1,
        }
    }

    fn from_sweep(err: SweepError) -> Self {
        match err {
            SweepError::Input(_) => CliFailure::config(err),
            SweepError::Io(..) | SweepError::Runtime(_) => CliFailure::runtime(err),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.cmd {
        Cmd::Run(args) => run_cmd(args).map(|all_ok| {
            if all_ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("some cells failed; see summary.json");
                ExitCode::from(1)
            }
        }),
        Cmd::Summarize(args) => summarize_cmd(args).map(|()| ExitCode::SUCCESS),
        Cmd::Theory(args) => theory_cmd(args).map(|()| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
