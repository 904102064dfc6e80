use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pxaug_cli::config::{Command, ExperimentConfig, Format, Overrides};
use pxaug_cli::run::{run, RunError, OUT_DIR_ENV};

/// Hypothesis-testing bounds, Monte Carlo error rates and survey simulations.
#[derive(Debug, Parser)]
#[command(name = "pxaug", version)]
struct Cli {
    /// What to compute.
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Results file; the manifest and plot data are written beside it.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
}

fn main_inner(cli: Cli) -> Result<(), RunError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(
        cli.command,
        &Overrides {
            seed: cli.seed,
            out: cli.out,
            format: cli.format,
            abs_tol: cli.abs_tol,
            replicates: cli.replicates,
        },
    )?;
    let env_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let outcome = run(&cfg, env_dir.as_deref())?;
    match &outcome.results_path {
        Some(p) => eprintln!("wrote {}", p.display()),
        None => {
            let mut stdout = std::io::stdout().lock();
            // a closed pipe is not worth a failure exit
            let _ = stdout.write_all(&outcome.rendered.results);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
