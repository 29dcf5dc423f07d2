//! Command-line front end: `simulate`, `validate` and `sweep`.
//!
//! Exit codes: 0 success, 1 validation failure (or a run that could not
//! complete), 2 configuration error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;
use toml::Value;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{self, RunSummary};
use crate::mmc::{self, MmcParams};
use crate::sim::{self, ControlConfig, Distribution, Recording, RunOutput, SimConfig};
use crate::workload::WorkloadDescriptor;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "parsimony", version, about = "PID-driven horizontal autoscaling simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write samples, actions and a summary.
    Simulate(RunArgs),
    /// Compare a fixed-pool simulation with the Erlang C mean queue length.
    Validate(ValidateArgs),
    /// Run a parameter grid times a list of seeds.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML config file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Dotted-path override, e.g. `--set control.target=25`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.2)]
    pub mu: f64,
    #[arg(long, default_value_t = 6)]
    pub c: u32,
    #[arg(long, default_value_t = 1_000_000)]
    pub requests: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Maximum relative error between simulated and analytic Lq.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// TOML sweep spec: `seeds = [...]` and a `[grid]` of dotted keys to value lists.
    #[arg(long)]
    pub sweep: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Validate(a) => cmd_validate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::Trace { .. } | Error::Unstable { .. } => {
            EXIT_CONFIG
        }
        _ => EXIT_VALIDATION,
    }
}

/// Loads the config file (if any) and applies overrides and flags.
pub fn resolve_config(args: &RunArgs) -> Result<RunConfig> {
    let base = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.with_overrides(&args.overrides)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `config.toml`, `samples.csv`, `samples_smoothed.csv`,
/// `actions.log` and `summary.json` into `cfg.output.dir`.
pub fn write_run(cfg: &RunConfig, out: &RunOutput) -> Result<()> {
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    metrics::write_samples(BufWriter::new(File::create(dir.join("samples.csv"))?), &out.samples)?;
    if cfg.output.smoothed {
        let smoothed = metrics::smooth_samples(&out.samples, cfg.output.window)?;
        metrics::write_smoothed(
            BufWriter::new(File::create(dir.join("samples_smoothed.csv"))?),
            &smoothed,
        )?;
    }
    if cfg.output.actions {
        let mut log = BufWriter::new(File::create(dir.join("actions.log"))?);
        for a in &out.actions {
            writeln!(log, "{a}")?;
        }
        log.flush()?;
    }
    metrics::write_summary(BufWriter::new(File::create(dir.join("summary.json"))?), &out.summary)?;
    Ok(())
}

pub fn cmd_simulate(args: &RunArgs) -> Result<i32> {
    let cfg = resolve_config(args)?;
    let out = sim::run(&cfg.sim())?;
    write_run(&cfg, &out)?;
    println!("{}", serde_json::to_string_pretty(&out.summary)?);
    if !out.summary.requests_conserved() {
        eprintln!("request conservation does not hold");
        return Ok(EXIT_VALIDATION);
    }
    Ok(EXIT_OK)
}

/// Result of a fixed-pool run against the analytic mean queue length.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub simulated_lq: f64,
    pub analytic_lq: f64,
    pub relative_error: f64,
    pub summary: RunSummary,
}

/// Simulates M/M/c with the controller off for `requests` arrivals.
pub fn validate_fixed_pool(params: MmcParams, requests: u64, seed: u64) -> Result<Validation> {
    let analytic_lq = mmc::mean_queue_length(&params)?;
    let cfg = SimConfig {
        seed,
        horizon: f64::INFINITY,
        workload: WorkloadDescriptor::Poisson {
            mean_interarrival: 1.0 / params.lambda,
            limit: Some(requests),
        },
        service: Distribution::Exponential {
            mean: 1.0 / params.mu,
        },
        startup: Distribution::Constant { value: 0.0 },
        control: ControlConfig::fixed(params.c),
    };
    let out = sim::run_with(
        &cfg,
        Recording {
            samples: false,
            trace: false,
        },
    )?;
    let simulated_lq = out.summary.time_average_w;
    Ok(Validation {
        simulated_lq,
        analytic_lq,
        relative_error: (simulated_lq - analytic_lq).abs() / analytic_lq,
        summary: out.summary,
    })
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<i32> {
    let params = MmcParams::new(args.lambda, args.mu, args.c)?;
    if params.utilisation() >= 1.0 {
        eprintln!(
            "unstable: lambda / (c * mu) = {} >= 1, the queue has no steady state",
            params.utilisation()
        );
        return Ok(EXIT_CONFIG);
    }
    if args.requests == 0 {
        return Err(Error::config("--requests must be >= 1"));
    }
    let v = validate_fixed_pool(params, args.requests, args.seed)?;
    println!(
        "M/M/{} lambda={} mu={} rho={:.6} requests={} seed={}",
        params.c,
        params.lambda,
        params.mu,
        params.utilisation(),
        args.requests,
        args.seed
    );
    println!("erlang_c      {:.6}", mmc::erlang_c(&params)?);
    println!("analytic Lq   {:.6}", v.analytic_lq);
    println!("simulated Lq  {:.6}", v.simulated_lq);
    println!("relative err  {:.4} (tolerance {})", v.relative_error, args.tolerance);
    if v.relative_error <= args.tolerance {
        println!("PASS");
        Ok(EXIT_OK)
    } else {
        println!("FAIL");
        Ok(EXIT_VALIDATION)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Dotted config key -> values. Axes are expanded in key order.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<Value>>,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Cartesian product of the grid, times the seeds (or `[None]` when no
    /// seeds are listed).
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        if self.grid.is_empty() && self.seeds.is_empty() {
            return Err(Error::config("empty sweep: no grid axes and no seeds"));
        }
        if let Some((k, _)) = self.grid.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::config(format!("sweep axis {k} has no values")));
        }
        let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for (key, values) in &self.grid {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |v| {
                        let mut c = c.clone();
                        c.push((key.clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        let seeds: Vec<Option<u64>> = if self.seeds.is_empty() {
            vec![None]
        } else {
            self.seeds.iter().copied().map(Some).collect()
        };
        Ok(combos
            .iter()
            .flat_map(|c| {
                seeds.iter().map(move |&seed| SweepPoint {
                    values: c.clone(),
                    seed,
                })
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub values: Vec<(String, Value)>,
    pub seed: Option<u64>,
}

/// Runs every point of `spec` on top of `base`, each into
/// `<base.output.dir>/run_NNNN`, and returns the per-run configs and summaries
/// in grid order.
pub fn run_sweep(base: &RunConfig, spec: &SweepSpec) -> Result<Vec<(RunConfig, RunSummary)>> {
    let points = spec.points()?;
    let configs = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut cfg = base.with_values(p.values.iter().map(|(k, v)| (k.as_str(), v.clone())))?;
            if let Some(seed) = p.seed {
                cfg.seed = seed;
            }
            cfg.output.dir = base.output.dir.join(format!("run_{i:04}"));
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    configs
        .into_par_iter()
        .map(|cfg| {
            let out = sim::run(&cfg.sim())?;
            write_run(&cfg, &out)?;
            Ok((cfg, out.summary))
        })
        .collect()
}

pub fn write_sweep_summary<W: Write>(
    out: W,
    spec: &SweepSpec,
    runs: &[(RunConfig, RunSummary)],
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["run".to_owned(), "seed".to_owned()];
    header.extend(spec.grid.keys().cloned());
    header.extend(
        [
            "time_average_w",
            "time_average_p",
            "max_w",
            "max_p",
            "requests_generated",
            "requests_served",
            "mean_response_time",
            "creations",
            "destructions",
        ]
        .map(str::to_owned),
    );
    w.write_record(&header)?;
    let points = spec.points()?;
    for (i, ((cfg, s), p)) in runs.iter().zip(&points).enumerate() {
        let mut row = vec![format!("run_{i:04}"), cfg.seed.to_string()];
        row.extend(p.values.iter().map(|(_, v)| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }));
        row.extend([
            s.time_average_w.to_string(),
            s.time_average_p.to_string(),
            s.max_w.to_string(),
            s.max_p.to_string(),
            s.requests_generated.to_string(),
            s.requests_served.to_string(),
            s.mean_response_time.map_or_else(String::new, |m| m.to_string()),
            s.creations.to_string(),
            s.destructions.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let base = resolve_config(&args.run)?;
    let spec = SweepSpec::load(&args.sweep)?;
    let runs = run_sweep(&base, &spec)?;
    fs::create_dir_all(&base.output.dir)?;
    let path = base.output.dir.join("sweep_summary.csv");
    write_sweep_summary(BufWriter::new(File::create(&path)?), &spec, &runs)?;
    println!("{} runs, summary in {}", runs.len(), path.display());
    let broken = runs.iter().filter(|(_, s)| !s.requests_conserved()).count();
    if broken > 0 {
        eprintln!("{broken} runs violate request conservation");
        return Ok(EXIT_VALIDATION);
    }
    Ok(EXIT_OK)
}
