//! Solvers for the CP least-squares problem.

mod config;
mod gradient;
mod nesterov_als;
mod rules;
mod state;
mod trace;

pub use config::{EtaMode, MomentumRule, ParseSolverError, RestartKind, RestartRule, SolverConfig, Variant};
pub use gradient::{gradient_descent, nesterov_gradient};
pub use nesterov_als::{als, nesterov_als_direct, nesterov_als_ls, nesterov_als_restarted};
pub use rules::{eta_advance, initial_eta, momentum_weight, restart_check, scheduled_eta, terminated};
pub use state::{IterateStats, NesterovSequence, SolverState};
pub use trace::{CostModel, IterationRecord, RunStatus, RunTrace, WorkCounters};

use crate::error::Result;
use crate::kruskal::{CpProblem, FlatIterate, KruskalModel};
use crate::scalar::Scalar;

/// Result of a solver run: the final (or best) iterate and its trace.
#[derive(Debug, Clone)]
pub struct SolveOutput<T> {
    pub model: KruskalModel<T>,
    pub x: FlatIterate<T>,
    pub trace: RunTrace,
}

/// Runs the solver described by `cfg` from `x0`.
pub fn solve<T: Scalar>(problem: &CpProblem<T>, x0: &FlatIterate<T>, cfg: &SolverConfig) -> Result<SolveOutput<T>> {
    match cfg.variant {
        Variant::Als => als(problem, x0, cfg),
        Variant::NesterovAlsDirect => nesterov_als_direct(problem, x0, cfg),
        Variant::NesterovAlsLs => nesterov_als_ls(problem, x0, cfg),
        Variant::NesterovAlsRestarted => nesterov_als_restarted(problem, x0, cfg),
        Variant::GradientDescent => gradient_descent(problem, x0, cfg),
        Variant::NesterovGradient => nesterov_gradient(problem, x0, cfg),
    }
}
