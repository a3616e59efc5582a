//! `infoest`: check the divergence-derivative identities from the command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 runtime domain error.

mod commands;
mod config;
mod error;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use infoest::battery::DEFAULT_SEED;
use infoest::Family;

use commands::SelftestOptions;
use config::{parse_family, OutputFormat, Overrides, RunConfig};
use error::CliError;

/// Environment variable holding the default selftest seed.
const SEED_ENV: &str = "INFOEST_SEED";

#[derive(Parser, Debug)]
#[command(name = "infoest", version, about = "Divergence derivative identities for binomial and negative binomial channels")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Output format, overriding the config file.
    #[arg(long, global = true, value_parser = clap::builder::ValueParser::new(|s: &str| s.parse::<OutputFormat>()))]
    format: Option<OutputFormat>,
    /// Seed, overriding the config file (and INFOEST_SEED for selftest).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Channel family, overriding the config file.
    #[arg(long, global = true, value_parser = parse_family)]
    family: Option<Family>,
    /// Comma-separated scaling parameters, overriding the config file.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    grid: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the pmf recursion for both priors and the divergence derivative.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate the divergence and both derivative estimates over a grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in verification battery.
    Selftest {
        /// Relative tolerance for both identity suites.
        #[arg(long)]
        rel_tol: Option<f64>,
        /// Absolute tolerance for both identity suites.
        #[arg(long)]
        abs_tol: Option<f64>,
    },
}

enum Outcome {
    Ok,
    Failed,
}

fn load(path: &Path, global: &GlobalArgs, sweep: bool) -> Result<config::Run, CliError> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides {
        family: global.family,
        grid: global.grid.clone(),
        format: global.format,
        seed: global.seed,
    });
    if sweep {
        cfg.param = None;
        if cfg.grid.len() < 2 {
            return Err(CliError::config("grid", "sweep needs at least two grid points"));
        }
    }
    cfg.validate()
}

fn default_seed() -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={s} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let outcome = match &cli.command {
        Command::Verify { config } => {
            let run = load(config, &cli.global, false)?;
            let rows = commands::verify_rows(&run)?;
            commands::write_verify(&mut out, &rows, run.config.format)?;
            if rows.iter().all(|r| r.pass) {
                Outcome::Ok
            } else {
                Outcome::Failed
            }
        }
        Command::Sweep { config } => {
            let run = load(config, &cli.global, true)?;
            let rows = commands::sweep_rows(&run)?;
            commands::write_sweep(&mut out, &rows, run.config.format)?;
            Outcome::Ok
        }
        Command::Selftest { rel_tol, abs_tol } => {
            let seed = match cli.global.seed {
                Some(s) => s,
                None => default_seed()?,
            };
            let opts = SelftestOptions { seed, rel_tol: *rel_tol, abs_tol: *abs_tol };
            let failed = commands::selftest(opts, &mut out, &mut io::stderr())?;
            if failed.is_empty() {
                Outcome::Ok
            } else {
                let ids: Vec<String> = failed.iter().map(u8::to_string).collect();
                eprintln!("failing criteria: {}", ids.join(", "));
                Outcome::Failed
            }
        }
    };
    out.flush()?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("infoest: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
