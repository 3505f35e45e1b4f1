use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sifbm::{run, Command, ExperimentConfig};

/// Simulation and verification of set-indexed fractional Brownian motion.
#[derive(Debug, Parser)]
#[command(name = "sifbm", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

const PASS: u8 = 0;
const USAGE: u8 = 1;
const FAIL: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { PASS });
        }
    };
    let result = ExperimentConfig::load(&cli.config).and_then(|mut cfg| {
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        let exp = cfg.validate()?;
        run(cli.command, &exp, cli.jobs)
    });
    match result {
        Ok(o) if o.passed => ExitCode::from(PASS),
        Ok(_) => {
            eprintln!("{}: criterion failed", cli.command.name());
            ExitCode::from(FAIL)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE)
        }
    }
}
