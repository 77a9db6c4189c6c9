//! ALS and its Nesterov-accelerated variants.
//!
//! Every variant runs the same loop, `x_{k+1} = ALS(x_k + β_k (x_k − x_{k−1}))`, and
//! differs only in how `β_k` is chosen and whether a bad iterate may be discarded:
//!
//! ```text
//! x_2 ← ALS(x_1), i ← 2, β_1 = 0
//! for k = 2, 3, …
//!     if restart condition holds and β_{k−1} ≠ 0:
//!         x_k ← x_{k−1};  β_k ← 0;  i ← 1
//!     else
//!         β_k ← momentum weight (rule, line search, or 0 for plain ALS)
//!     stop if ‖∇f(x_k)‖ / n_X ≤ tol
//!     x_{k+1} ← ALS(x_k + β_k (x_k − x_{k−1}));  i ← i + 1
//! ```
//!
//! A discarded iterate keeps its index `k`; its duplicate is recorded in the trace so
//! the work of the rejected step is still accounted for.

use std::time::Instant;

use super::config::{MomentumRule, RestartRule, SolverConfig, Variant};
use super::rules::{eta_advance, initial_eta, momentum_weight, restart_check, terminated};
use super::state::{IterateStats, SolverState};
use super::trace::{CostModel, IterationRecord, RunStatus, RunTrace, WorkCounters};
use super::SolveOutput;
use crate::error::{Error, Result};
use crate::kruskal::{CpProblem, Evaluation, FlatIterate};
use crate::linesearch::{more_thuente, LineSearchConfig, LineSearchStatus};
use crate::scalar::Scalar;

/// Where `β_k` comes from when no restart fires.
#[derive(Debug, Clone, Copy)]
enum BetaSource {
    Rule(MomentumRule),
    LineSearch(LineSearchConfig),
}

/// Best iterate seen so far, returned when a run ends without converging.
struct Best<T> {
    f: T,
    x: FlatIterate<T>,
}

impl<T: Scalar> Best<T> {
    fn offer(&mut self, f: T, x: &FlatIterate<T>) {
        if f < self.f {
            self.f = f;
            self.x = x.clone();
        }
    }
}

pub(crate) struct Recorder {
    pub start: Instant,
    pub counters: WorkCounters,
    pub records: Vec<IterationRecord>,
}

impl Recorder {
    pub fn new(cost: CostModel) -> Self {
        Self { start: Instant::now(), counters: WorkCounters::new(cost), records: Vec::new() }
    }

    pub fn push<T: Scalar>(&mut self, k: usize, stats: &IterateStats<T>, beta: T, alpha: T, restarted: bool) {
        let c = &self.counters;
        self.records.push(IterationRecord {
            k,
            f: stats.f.to_f64_lossy(),
            grad_norm: stats.grad_norm.to_f64_lossy(),
            delta_x_norm: stats.delta_x_norm.to_f64_lossy(),
            beta_used: beta.to_f64_lossy(),
            alpha_used: alpha.to_f64_lossy(),
            restarted,
            n_f_evals: c.n_f_evals,
            n_g_evals: c.n_g_evals,
            n_als_sweeps: c.n_als_sweeps,
            sweep_equivalents: c.sweep_equivalents(),
            wall_seconds: self.start.elapsed().as_secs_f64(),
        });
    }

    pub fn over_budget(&self, cfg: &SolverConfig) -> bool {
        self.counters.sweep_equivalents() >= cfg.max_sweeps || self.start.elapsed().as_secs_f64() >= cfg.max_seconds
    }
}

/// Counts consecutive iterations in which `f` is frozen (relative change below 1e-16) and
/// `‖∇f‖` sets no new minimum. Near a minimizer `f` settles to machine precision well before
/// `‖∇f‖` reaches a tight tolerance, so a frozen `f` alone is not a stall; and momentum
/// methods that oscillate in `f` are still moving.
pub(crate) struct StallDetector<T> {
    window: usize,
    run: usize,
    prev_f: Option<T>,
    best_g: T,
}

impl<T: Scalar> StallDetector<T> {
    pub fn new(window: usize) -> Self {
        Self { window, run: 0, prev_f: None, best_g: T::infinity() }
    }

    pub fn observe(&mut self, f: T, grad_norm: T) -> bool {
        let frozen = self.prev_f.is_some_and(|p| (f - p).abs() < T::lit(1e-16) * p.abs());
        let better_g = grad_norm < self.best_g;
        self.prev_f = Some(f);
        self.best_g = self.best_g.min(grad_norm);
        if frozen && !better_g {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= self.window
    }
}

pub(crate) fn check_start<T: Scalar>(problem: &CpProblem<T>, x0: &FlatIterate<T>, cfg: &SolverConfig) -> Result<()> {
    cfg.validate().map_err(Error::InvalidParameter)?;
    if x0.len() != problem.n_vars() {
        return Err(Error::DimensionMismatch(format!(
            "initial iterate has {} values, problem needs {}",
            x0.len(),
            problem.n_vars()
        )));
    }
    if !x0.is_finite() {
        return Err(Error::InvalidParameter("initial iterate is not finite".into()));
    }
    Ok(())
}

pub(crate) fn finish<T: Scalar>(
    problem: &CpProblem<T>,
    cfg: &SolverConfig,
    recorder: Recorder,
    status: RunStatus,
    x: FlatIterate<T>,
) -> Result<SolveOutput<T>> {
    let model = x.unpack(problem.layout())?;
    Ok(SolveOutput {
        model,
        x,
        trace: RunTrace {
            solver: cfg.name(),
            n_vars: problem.n_vars(),
            tol: cfg.tol,
            records: recorder.records,
            status,
        },
    })
}

fn stats_of<T: Scalar>(e: &Evaluation<T>, dx: T, duplicate: bool) -> IterateStats<T> {
    IterateStats { f: e.f, grad_norm: e.grad_norm, delta_x_norm: dx, duplicate }
}

fn finite_eval<T: Scalar>(e: &Evaluation<T>) -> bool {
    e.f.is_finite() && e.grad_norm.is_finite()
}

/// Picks `β` by a Moré–Thuente search on `φ(β) = f(x_k + β Δ)`; zero when `Δ` is not a
/// descent direction or the search found nothing better than `x_k`.
fn line_search_beta<T: Scalar>(
    problem: &CpProblem<T>,
    state: &SolverState<T>,
    eval: &Evaluation<T>,
    ls: &LineSearchConfig,
    counters: &mut WorkCounters,
) -> Result<T> {
    let dir = state.x_curr.sub(&state.x_prev);
    let g0 = eval.grad.dot(&dir);
    if !(g0 < T::zero()) {
        return Ok(T::zero());
    }
    let mut failure = None;
    let res = more_thuente(
        |beta| {
            counters.fused_eval();
            match problem.evaluate(&state.x_curr.add_scaled(beta, &dir)) {
                Ok(e) => (e.f, e.grad.dot(&dir)),
                Err(err) => {
                    failure.get_or_insert(err);
                    (T::nan(), T::nan())
                }
            }
        },
        eval.f,
        g0,
        ls,
    );
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(match res.status {
        LineSearchStatus::Converged => res.step,
        LineSearchStatus::MaxIters | LineSearchStatus::Stalled if res.f_at_step < eval.f => res.step,
        _ => T::zero(),
    })
}

fn run<T: Scalar>(
    problem: &CpProblem<T>,
    x0: &FlatIterate<T>,
    cfg: &SolverConfig,
    restart: RestartRule,
    source: BetaSource,
) -> Result<SolveOutput<T>> {
    check_start(problem, x0, cfg)?;
    let n_vars = problem.n_vars();
    let tol = T::lit(cfg.tol);
    let cost = CostModel::new(problem.layout().shape(), problem.rank());
    let mut rec = Recorder::new(cost);
    let mut stall = StallDetector::new(cfg.stall_window);

    // k = 1: the initial guess, with x_0 = x_1.
    let mut eval_prev = problem.evaluate(x0)?;
    rec.counters.fused_eval();
    let first = stats_of(&eval_prev, T::zero(), false);
    rec.push(1, &first, T::zero(), T::zero(), false);
    let mut best = Best { f: T::infinity(), x: x0.clone() };
    if !finite_eval(&eval_prev) {
        return finish(problem, cfg, rec, RunStatus::Diverged, x0.clone());
    }
    best.offer(eval_prev.f, x0);

    let x2 = problem.als_sweep(x0)?;
    rec.counters.sweep();
    let mut state = SolverState::new(x0.clone(), x2, restart.delay + 1);
    state.push_history(first);
    state.k = 2;
    state.i = 2;
    state.beta_prev = T::zero();
    state.eta = initial_eta(&restart);

    loop {
        let mut eval = problem.evaluate(&state.x_curr)?;
        rec.counters.fused_eval();
        let dx = state.x_curr.sub(&state.x_prev).norm();
        state.current = stats_of(&eval, dx, false);

        let restarted = restart_check(&restart, &state);
        let beta = if restarted {
            state.x_curr = state.x_prev.clone();
            eval = eval_prev.clone();
            state.current = stats_of(&eval, T::zero(), true);
            state.i = 1;
            T::zero()
        } else if !finite_eval(&eval) {
            T::zero()
        } else {
            match source {
                BetaSource::Rule(rule) => momentum_weight(&rule, &mut state),
                BetaSource::LineSearch(ls) => line_search_beta(problem, &state, &eval, &ls, &mut rec.counters)?,
            }
        };
        eta_advance(&restart, &mut state, restarted);

        rec.push(state.k, &state.current, beta, T::zero(), restarted);
        state.push_history(state.current);

        if !finite_eval(&eval) {
            return finish(problem, cfg, rec, RunStatus::Diverged, best.x);
        }
        best.offer(eval.f, &state.x_curr);
        if terminated(eval.grad_norm, tol, n_vars) {
            return finish(problem, cfg, rec, RunStatus::Converged, state.x_curr);
        }
        if rec.over_budget(cfg) {
            return finish(problem, cfg, rec, RunStatus::BudgetExhausted, best.x);
        }
        if stall.observe(eval.f, eval.grad_norm) {
            return finish(problem, cfg, rec, RunStatus::Stalled, best.x);
        }

        let y = if beta == T::zero() {
            state.x_curr.clone()
        } else {
            state.x_curr.add_scaled(beta, &state.x_curr.sub(&state.x_prev))
        };
        let x_next = problem.als_sweep(&y)?;
        rec.counters.sweep();

        state.x_prev = std::mem::replace(&mut state.x_curr, x_next);
        eval_prev = eval;
        state.beta_prev = beta;
        state.k += 1;
        state.i += 1;
    }
}

/// Plain ALS: one full sweep per iteration.
pub fn als<T: Scalar>(problem: &CpProblem<T>, x0: &FlatIterate<T>, cfg: &SolverConfig) -> Result<SolveOutput<T>> {
    let cfg = SolverConfig { variant: Variant::Als, ..*cfg };
    run(problem, x0, &cfg, RestartRule::none(), BetaSource::Rule(MomentumRule::Constant(0.0)))
}

/// Nesterov weights indexed by the global iteration, without any safeguard.
pub fn nesterov_als_direct<T: Scalar>(
    problem: &CpProblem<T>,
    x0: &FlatIterate<T>,
    cfg: &SolverConfig,
) -> Result<SolveOutput<T>> {
    let cfg = SolverConfig {
        variant: Variant::NesterovAlsDirect,
        momentum: MomentumRule::SN,
        restart: RestartRule::none(),
        ..*cfg
    };
    run(problem, x0, &cfg, RestartRule::none(), BetaSource::Rule(MomentumRule::SN))
}

/// Momentum weight from a line search along `x_k − x_{k−1}`.
pub fn nesterov_als_ls<T: Scalar>(
    problem: &CpProblem<T>,
    x0: &FlatIterate<T>,
    cfg: &SolverConfig,
) -> Result<SolveOutput<T>> {
    let cfg = SolverConfig { variant: Variant::NesterovAlsLs, restart: RestartRule::none(), ..*cfg };
    run(problem, x0, &cfg, RestartRule::none(), BetaSource::LineSearch(cfg.ls))
}

/// Restarted Nesterov-ALS with the configured momentum and restart rules.
pub fn nesterov_als_restarted<T: Scalar>(
    problem: &CpProblem<T>,
    x0: &FlatIterate<T>,
    cfg: &SolverConfig,
) -> Result<SolveOutput<T>> {
    let cfg = SolverConfig { variant: Variant::NesterovAlsRestarted, ..*cfg };
    run(problem, x0, &cfg, cfg.restart, BetaSource::Rule(cfg.momentum))
}
