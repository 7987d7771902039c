use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use regrom_cli::config::{parse_config, ExperimentConfig, ModelName};
use regrom_cli::pipeline;

#[derive(Parser)]
#[command(
    name = "regrom",
    version,
    about = "Regularized reduced-order models for Burgers and imported flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full-order model and write snapshots.
    Fom(Overrides),
    /// Compute the POD basis and the reduced operators.
    Pod(Overrides),
    /// Integrate one reduced model.
    Rom(Overrides),
    /// Run all three models and write error, energy and summary files.
    Compare(Overrides),
    /// Mean errors over a grid of filter radii and AD parameters.
    Sweep(Overrides),
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    model: Option<ModelName>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "order-n")]
    order_n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = parse_config(&self.config)?;
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(d) = self.delta {
            anyhow::ensure!(d.is_finite() && d >= 0.0, "--delta must be nonnegative");
            cfg.delta = Some(d);
        }
        if let Some(mu) = self.mu {
            anyhow::ensure!(mu.is_finite() && mu >= 0.0, "--mu must be nonnegative");
            cfg.mu = Some(mu);
        }
        if let Some(n) = self.order_n {
            cfg.order_n = Some(n);
        }
        if let Some(r) = self.r {
            anyhow::ensure!(r > 0, "--r must be positive");
            cfg.r = r;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Fom(o) => pipeline::cmd_fom(&o.load()?),
        Command::Pod(o) => pipeline::cmd_pod(&o.load()?),
        Command::Rom(o) => pipeline::cmd_rom(&o.load()?),
        Command::Compare(o) => pipeline::cmd_compare(&o.load()?),
        Command::Sweep(o) => pipeline::cmd_sweep(&o.load()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
