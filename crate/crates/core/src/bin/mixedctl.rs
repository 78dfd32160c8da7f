use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use mixedctl::harness::{self, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mixedctl", version, about = "Neumann boundary control experiments for mixed elliptic problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config overlaid on the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV reports. Overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random starting controls and sampled checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// State and adjoint h-convergence at a fixed control.
    StateConv(Common),
    /// Optimal-control h-convergence against a fine reference.
    ControlConv(Common),
    /// Robin-to-Dirichlet limit along the alpha ladder.
    AlphaSweep(Common),
    /// Level-by-alpha table of control distances to the reference.
    Diagram(Common),
    /// Discrete coercivity and trace constants per level.
    Constants(Common),
}

fn run(cli: Cli) -> mixedctl::Result<bool> {
    let (exp, common) = match cli.command {
        Command::StateConv(c) => (Experiment::StateConv, c),
        Command::ControlConv(c) => (Experiment::ControlConv, c),
        Command::AlphaSweep(c) => (Experiment::AlphaSweep, c),
        Command::Diagram(c) => (Experiment::Diagram, c),
        Command::Constants(c) => (Experiment::Constants, c),
    };
    let cfg = ExperimentConfig::load(exp, common.config.as_deref())?;
    let report = harness::run(exp, &cfg, common.seed)?;
    let out = common
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let paths = report.write(&out)?;
    print!("{}", report.summary());
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
