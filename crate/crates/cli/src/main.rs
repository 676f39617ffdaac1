mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tdslip", version, about = "Simulate and co-design torque-driven SLIP running robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one design and export its trajectory and evaluation report.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Design JSON keyed like the design table.
        #[arg(long)]
        design: PathBuf,
    },
    /// Search the design space with the mixed-discrete swarm.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte-Carlo validation of one design under touchdown-angle noise.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        design: PathBuf,
        /// Number of noisy runs.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Motor catalog utilities.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Debug, Subcommand)]
enum CatalogAction {
    /// Load and check a catalog file (the built-in table if none is given).
    Check {
        path: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    case: Option<u8>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(case) = self.case {
            cfg.case = case;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common, design } => {
            let cfg = common.resolve()?;
            cfg.validate()?;
            commands::simulate(&cfg, &design)
        }
        Command::Optimize { common } => {
            let cfg = common.resolve()?;
            cfg.validate()?;
            commands::optimize(&cfg)
        }
        Command::Validate { common, design, runs } => {
            let mut cfg = common.resolve()?;
            if let Some(n) = runs {
                cfg.runs = n;
            }
            cfg.validate()?;
            commands::validate(&cfg, &design)
        }
        Command::Catalog {
            action: CatalogAction::Check { path, config },
        } => {
            let path = match (path, config) {
                (Some(p), _) => Some(p),
                (None, Some(c)) => RunConfig::load(&c)?.catalog,
                (None, None) => None,
            };
            commands::catalog_check(path.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not failures
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
