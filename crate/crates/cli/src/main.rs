use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use growthlab::catalog;
use growthlab::commands::{self, CommandOutput, EXIT_ERROR};
use growthlab::config::{load_file, DiagnoseArgs, ProxArgs, TrackingArgs};
use growthlab::output::write_all;

/// Growth, tilt-stability and Łojasiewicz diagnostics, proximal point runs and
/// elliptic tracking experiments.
///
/// Settings come from `--config` (a flat TOML file for one subcommand) and are
/// overridden by flags. Worker threads are capped by GROWTHLAB_THREADS.
#[derive(Parser)]
#[command(name = "growthlab", version)]
struct Cli {
    /// Flat TOML file with settings for the chosen subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for report files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the three constants of a catalog function and audit their relations.
    Diagnose(DiagnoseArgs),
    /// Run the p-power proximal point method and audit its rates.
    Prox(ProxArgs),
    /// Solve the tracking problem, estimate second-order growth and sweep target perturbations.
    Tracking(TrackingArgs),
    /// List the catalog functions.
    Catalog,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("GROWTHLAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("GROWTHLAB_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<Option<CommandOutput>> {
    configure_threads()?;
    let config = cli.config.as_deref();
    let out = match cli.command {
        Command::Catalog => {
            print!("{}", catalog::listing());
            return Ok(None);
        }
        Command::Diagnose(args) => {
            let args = match config {
                Some(path) => args.over(load_file(path)?),
                None => args,
            };
            let (settings, func) = args.resolve()?;
            commands::run_diagnose(&settings, &func)?
        }
        Command::Prox(args) => {
            let args = match config {
                Some(path) => args.over(load_file(path)?),
                None => args,
            };
            let (settings, func) = args.resolve()?;
            commands::run_prox(&settings, &func)?
        }
        Command::Tracking(args) => {
            let args = match config {
                Some(path) => args.over(load_file(path)?),
                None => args,
            };
            commands::run_tracking(&args.resolve()?)?
        }
    };
    write_all(&cli.out, &out.files)?;
    Ok(Some(out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(out)) => {
            print!("{}", out.summary);
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if !out.passed {
                eprintln!("check failed");
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
