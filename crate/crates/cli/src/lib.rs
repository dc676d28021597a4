//! Command-line driver for `wsnpl`: config parsing, the four subcommands, and
//! CSV/SVG output.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;
pub mod table;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::{CERTIFIED_TRIALS, ORACLE_TOLERANCE, VALIDATION_TOLERANCE};
use crate::config::{parse_config, RunConfig, Source};
pub use crate::error::{CliError, Result};

pub const THREADS_ENV: &str = "WSNPL_THREADS";

const ABOUT: &str = "Minimum-power gain allocation for analog amplify-and-forward sensor networks";

const LONG_ABOUT: &str = "\
Minimum-power gain allocation for analog amplify-and-forward sensor networks
fused by a best linear unbiased estimator.

Not reproduced: Fig. 4 of the source paper (analog versus digital MQAM and
Shannon-limit power curves). Its quantization and modulation power model is
defined in the paper's external reference [7], not in the paper, so no
substitute model is invented.";

const AFTER_HELP: &str = "\
Exit codes:
  0  success
  1  usage, configuration, solver, or output error
  2  infeasible distortion target (the floor is printed)
  3  statistical validation failure
  4  oracle disagreement

Environment:
  WSNPL_THREADS  worker threads for sweeps (default: all cores)";

#[derive(Debug, Parser)]
#[command(name = "wsnpl", version, about = ABOUT, long_about = LONG_ABOUT, after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (sectioned key = value text).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Overrides the master seed of the [problem] section.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal gains for one network: per-sensor CSV and a summary line.
    Solve(Common),
    /// Optimal-vs-uniform savings and active counts over distance spreads.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Also write an SVG chart of savings and active count vs R.
        #[arg(long, value_name = "PATH")]
        plot: Option<PathBuf>,
    },
    /// Monte-Carlo check of the estimator variance against its closed form.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Scales all noise to zero; the estimate must recover theta exactly.
        #[arg(long)]
        noiseless: bool,
    },
    /// Cross-checks the closed form against bisection and projected descent.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Runs this many seeded random instances instead of the configured one.
        #[arg(long, value_name = "N")]
        count: Option<usize>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve(c) => c,
            Command::Sweep { common, .. } | Command::Validate { common, .. } | Command::Oracle { common, .. } => common,
        }
    }
}

/// Positive thread count from `WSNPL_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Usage(format!("{THREADS_ENV}: {e}"))),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
    }
}

pub fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.problem.seed = s;
        if let Some(Source::Topology(p)) = &mut cfg.source {
            p.seed = s;
        }
    }
    Ok(cfg)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn io_err(source: std::io::Error) -> CliError {
    CliError::Io {
        path: "<stdout>".into(),
        source,
    }
}

/// Writes to `path`, or to `out` when no path is configured.
fn emit(path: Option<&Path>, content: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_file(p, content),
        None => out.write_all(content.as_bytes()).map_err(io_err),
    }
}

/// Runs one invocation; diagnostics go to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let common = cli.command.common();
    let cfg = load_config(&common.config, common.seed)?;
    let note = |err: &mut dyn Write, msg: &str| -> Result<()> { writeln!(err, "{msg}").map_err(io_err) };
    match &cli.command {
        Command::Solve(_) => {
            let inst = commands::instance(&cfg)?;
            note(err, &inst.d0_note)?;
            let rep = commands::cmd_solve(&inst)?;
            let sensors = rep.sensors.render();
            let summary = rep.summary.render();
            emit(cfg.output.csv.as_deref(), &sensors, out)?;
            match (&cfg.output.csv, &cfg.output.summary) {
                (_, Some(p)) => write_file(p, &summary)?,
                (Some(_), None) => out.write_all(summary.as_bytes()).map_err(io_err)?,
                (None, None) => write!(out, "\n{summary}").map_err(io_err)?,
            }
        }
        Command::Sweep { plot, .. } => {
            let threads = threads_from_env()?;
            let rep = commands::cmd_sweep(&cfg, threads)?;
            note(err, &rep.d0_note)?;
            emit(cfg.output.csv.as_deref(), &rep.table.render(), out)?;
            if let Some(p) = plot.as_ref().or(cfg.output.plot.as_ref()) {
                let k = cfg.topology().map_or(0, |t| t.k);
                write_file(p, &commands::sweep_plot(&rep.rows, k))?;
            }
        }
        Command::Validate { noiseless, .. } => {
            let inst = commands::instance(&cfg)?;
            note(err, &inst.d0_note)?;
            let rep = commands::cmd_validate(&cfg, &inst, *noiseless)?;
            emit(cfg.output.csv.as_deref(), &rep.table.render(), out)?;
            for r in &rep.runs {
                note(
                    err,
                    &format!(
                        "{}: bias {:.3e} ({:.2} standard errors)",
                        r.noise_kind,
                        r.empirical_bias,
                        if r.bias_std_error > 0.0 { r.empirical_bias / r.bias_std_error } else { 0.0 }
                    ),
                )?;
            }
            if !rep.certified {
                note(
                    err,
                    &format!(
                        "{} trials: below {CERTIFIED_TRIALS}, the {VALIDATION_TOLERANCE} tolerance is not enforced",
                        cfg.validate.trials
                    ),
                )?;
            }
            let failures = rep.failures();
            if !failures.is_empty() {
                return Err(CliError::Validation(failures.join("; ")));
            }
        }
        Command::Oracle { count, .. } => {
            let rep = match count {
                Some(n) => commands::cmd_oracle_batch(cfg.problem.seed, *n)?,
                None => {
                    let inst = commands::instance(&cfg)?;
                    note(err, &inst.d0_note)?;
                    commands::cmd_oracle_instance(&inst)?
                }
            };
            emit(cfg.output.csv.as_deref(), &rep.table.render(), out)?;
            note(err, &format!("{} instance(s) in {:.3} s", rep.instances, rep.elapsed_s))?;
            if !(rep.worst <= ORACLE_TOLERANCE) {
                return Err(CliError::Disagreement(format!(
                    "worst relative difference {:e} exceeds {ORACLE_TOLERANCE:e}",
                    rep.worst
                )));
            }
        }
    }
    Ok(())
}
