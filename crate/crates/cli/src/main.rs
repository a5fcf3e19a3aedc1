//! `polyq`: experiments on random walks with random charges.

mod commands;
mod config;
mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use log::{error, info};

use config::{Cli, ConfigError, ExperimentConfig};
use polyq::PolyqError;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_UNCONVERGED: u8 = 4;

fn init_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("POLYQ_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("POLYQ_THREADS=`{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError(format!("POLYQ_THREADS: {e}")))?;
    info!("using {n} threads");
    Ok(())
}

fn execute(cfg: &ExperimentConfig) -> anyhow::Result<commands::Outcome> {
    let outcome = commands::run(cfg)?;
    match &cfg.output {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            output::write_rows(&outcome.rows, cfg.format, &mut f)?;
            f.flush()?;
            if cfg.emit_gnuplot {
                let script = output::gnuplot_script(cfg.command, &path.to_string_lossy(), cfg.grid)
                    .context("no plot for this subcommand")?;
                let gp = format!("{}.gp", path.display());
                std::fs::write(&gp, script).with_context(|| format!("writing {gp}"))?;
                info!("wrote {gp}");
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            output::write_rows(&outcome.rows, cfg.format, &mut lock)?;
        }
    }
    Ok(outcome)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match e.downcast_ref::<PolyqError>() {
        Some(PolyqError::BudgetExceeded { .. }) => EXIT_BUDGET,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let cfg = match init_threads().and_then(|_| ExperimentConfig::from_cli(&cli)) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match execute(&cfg) {
        Ok(o) if !o.failed_checks.is_empty() => {
            error!("failed checks: {:?}", o.failed_checks);
            ExitCode::from(EXIT_FAILURE)
        }
        Ok(o) if o.unconverged && cfg.strict => {
            error!("unconverged chain with --strict");
            ExitCode::from(EXIT_UNCONVERGED)
        }
        Ok(o) => {
            if o.unconverged {
                info!("some chains look unconverged (autocorrelation time above sweeps/50)");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
