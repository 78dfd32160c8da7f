//! Experiment configs, reports and the convergence studies run by the CLI.

pub mod config;
pub mod experiments;
pub mod expr;
pub mod report;

pub use config::{Experiment, ExperimentConfig, ProblemConfig, Tolerances};
pub use experiments::{run_alpha_sweep, run_constants, run_control_convergence, run_diagram, run_state_convergence};
pub use expr::{Axis, Expr, FieldExpr};
pub use report::{ConvergenceReport, RateFit, Verdict};

use crate::error::Result;

/// Runs one experiment by kind.
pub fn run(exp: Experiment, cfg: &ExperimentConfig, seed: u64) -> Result<ConvergenceReport> {
    match exp {
        Experiment::StateConv => run_state_convergence(cfg),
        Experiment::ControlConv => run_control_convergence(cfg, seed),
        Experiment::AlphaSweep => run_alpha_sweep(cfg, seed),
        Experiment::Diagram => run_diagram(cfg),
        Experiment::Constants => run_constants(cfg, seed),
    }
}
