//! Experiment harness for the SIR random-dynamics library.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 I/O
//! error. The default output directory comes from `--out`, the config file's
//! `out_dir`, or the `SIR_DYNAMICS_OUT` environment variable, in that order.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod plot;
mod presets;

use commands::{CliError, CliResult, ScanParam};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "sir-dynamics",
    version,
    about = "SIR models with vital dynamics, reinfection and random forcing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured model; one trajectory CSV per realization.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ensemble size override.
        #[arg(long)]
        realizations: Option<usize>,
        /// Integration step override.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Equilibria, eigenvalues, threshold ratios and the regime verdict.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a canonical figure preset (ids 3..8).
    Figure {
        #[arg(long)]
        id: u8,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of noise realizations on top of the deterministic reference.
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Pullback endpoint table over increasing horizons.
    Pullback {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated strictly increasing horizons (defaults to the
        /// config's pullback_horizon).
        #[arg(long)]
        horizons: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Sweep one parameter and report verdicts plus tail infection floors.
    Scan {
        #[arg(long)]
        config: PathBuf,
        /// One of: gamma, d, e, q.
        #[arg(long)]
        param: String,
        /// Comma-separated grid values; an empty string scans nothing.
        #[arg(long)]
        values: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
    },
}

fn load_config(
    path: &std::path::Path,
    seed: Option<u64>,
    realizations: Option<usize>,
    dt: Option<f64>,
) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(n) = realizations {
        if n == 0 {
            return Err(CliError::Config("realizations must be >= 1".into()));
        }
        cfg.realizations = n;
    }
    if let Some(dt) = dt {
        if dt <= 0.0 {
            return Err(CliError::Config("dt must be > 0".into()));
        }
        cfg.dt = dt;
    }
    Ok(cfg)
}

fn parse_float_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Config(format!("{what}: `{s}` is not a number")))
        })
        .collect()
}

fn run() -> CliResult {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            realizations,
            dt,
        } => {
            let cfg = load_config(&config, seed, realizations, dt)?;
            let out_dir = commands::resolve_out_dir(out, cfg.out_dir.as_ref());
            commands::cmd_simulate(&cfg, &out_dir)
        }
        Command::Report { config, out } => {
            let cfg = load_config(&config, None, None, None)?;
            let out_dir = commands::resolve_out_dir(out, cfg.out_dir.as_ref());
            commands::cmd_report(&cfg, &out_dir)
        }
        Command::Figure {
            id,
            seed,
            out,
            realizations,
            dt,
        } => {
            let out_dir = commands::resolve_out_dir(out, None);
            commands::cmd_figure(id, seed, realizations, dt, &out_dir)
        }
        Command::Pullback {
            config,
            horizons,
            seed,
            out,
            dt,
        } => {
            let cfg = load_config(&config, seed, None, dt)?;
            let out_dir = commands::resolve_out_dir(out, cfg.out_dir.as_ref());
            let horizons = match horizons {
                Some(text) => parse_float_list(&text, "horizons")?,
                None => vec![cfg.pullback_horizon],
            };
            commands::cmd_pullback(&cfg, &horizons, &out_dir)
        }
        Command::Scan {
            config,
            param,
            values,
            seed,
            out,
            realizations,
            dt,
        } => {
            let cfg = load_config(&config, seed, realizations, dt)?;
            let out_dir = commands::resolve_out_dir(out, cfg.out_dir.as_ref());
            let param: ScanParam = param.parse()?;
            let values = parse_float_list(&values, "values")?;
            commands::cmd_scan(&cfg, param, &values, &out_dir)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
