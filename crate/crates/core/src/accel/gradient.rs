//! First-order baselines: steepest descent and Nesterov's accelerated gradient, both
//! with a Moré–Thuente step along the negative gradient.

use super::config::{SolverConfig, Variant};
use super::nesterov_als::{check_start, finish, Recorder, StallDetector};
use super::rules::terminated;
use super::state::{IterateStats, NesterovSequence};
use super::trace::{CostModel, RunStatus};
use super::SolveOutput;
use crate::error::Result;
use crate::kruskal::{CpProblem, Evaluation, FlatIterate};
use crate::linesearch::{more_thuente, LineSearchConfig, LineSearchStatus};
use crate::scalar::Scalar;

struct Step<T> {
    alpha: T,
    x: FlatIterate<T>,
    /// Evaluation at `x` when the search already computed it.
    eval: Option<Evaluation<T>>,
}

/// Moré–Thuente along `−∇f(y)`, starting from the previous accepted step length.
fn gradient_step<T: Scalar>(
    problem: &CpProblem<T>,
    y: &FlatIterate<T>,
    ey: &Evaluation<T>,
    alpha0: T,
    ls: &LineSearchConfig,
    rec: &mut Recorder,
) -> Result<Option<Step<T>>> {
    let dir = FlatIterate(ey.grad.0.iter().map(|&g| -g).collect());
    let g0 = -(ey.grad_norm * ey.grad_norm);
    if !(g0 < T::zero()) {
        return Ok(None);
    }
    let cfg = LineSearchConfig { step0: alpha0.to_f64_lossy(), ..*ls };
    let mut last: Option<(T, Evaluation<T>)> = None;
    let mut failure = None;
    let res = more_thuente(
        |a| {
            rec.counters.fused_eval();
            match problem.evaluate(&y.add_scaled(a, &dir)) {
                Ok(e) => {
                    let out = (e.f, e.grad.dot(&dir));
                    last = Some((a, e));
                    out
                }
                Err(err) => {
                    failure.get_or_insert(err);
                    (T::nan(), T::nan())
                }
            }
        },
        ey.f,
        g0,
        &cfg,
    );
    if let Some(err) = failure {
        return Err(err);
    }
    let accept = match res.status {
        LineSearchStatus::Converged => true,
        LineSearchStatus::MaxIters | LineSearchStatus::Stalled => res.f_at_step < ey.f,
        LineSearchStatus::DegenerateDirection => false,
    };
    if !accept {
        return Ok(None);
    }
    let eval = last.and_then(|(a, e)| (a == res.step).then_some(e));
    Ok(Some(Step { alpha: res.step, x: y.add_scaled(res.step, &dir), eval }))
}

fn run<T: Scalar>(
    problem: &CpProblem<T>,
    x0: &FlatIterate<T>,
    cfg: &SolverConfig,
    accelerated: bool,
) -> Result<SolveOutput<T>> {
    check_start(problem, x0, cfg)?;
    let n_vars = problem.n_vars();
    let tol = T::lit(cfg.tol);
    let mut rec = Recorder::new(CostModel::new(problem.layout().shape(), problem.rank()));
    let mut stall = StallDetector::new(cfg.stall_window);
    let mut lambda = NesterovSequence::<T>::new();

    let mut x_prev = x0.clone();
    let mut x = x0.clone();
    let mut cached: Option<Evaluation<T>> = None;
    let mut alpha = T::lit(cfg.ls.step0);
    let mut best = (T::infinity(), x0.clone());
    // Momentum index; reset when an extrapolated point is rejected.
    let mut j = 1usize;

    for k in 1.. {
        let ex = match cached.take() {
            Some(e) => e,
            None => {
                rec.counters.fused_eval();
                problem.evaluate(&x)?
            }
        };
        let stats =
            IterateStats { f: ex.f, grad_norm: ex.grad_norm, delta_x_norm: x.sub(&x_prev).norm(), duplicate: false };
        let beta = if accelerated && j > 1 { lambda.beta(j) } else { T::zero() };
        rec.push(k, &stats, beta, alpha, false);

        if !(ex.f.is_finite() && ex.grad_norm.is_finite()) {
            return finish(problem, cfg, rec, RunStatus::Diverged, best.1);
        }
        if ex.f < best.0 {
            best = (ex.f, x.clone());
        }
        if terminated(ex.grad_norm, tol, n_vars) {
            return finish(problem, cfg, rec, RunStatus::Converged, x);
        }
        if rec.over_budget(cfg) {
            return finish(problem, cfg, rec, RunStatus::BudgetExhausted, best.1);
        }
        if stall.observe(ex.f, ex.grad_norm) {
            return finish(problem, cfg, rec, RunStatus::Stalled, best.1);
        }

        let (y, ey) = if beta == T::zero() {
            (x.clone(), ex)
        } else {
            let y = x.add_scaled(beta, &x.sub(&x_prev));
            rec.counters.fused_eval();
            let ey = problem.evaluate(&y)?;
            (y, ey)
        };
        match gradient_step(problem, &y, &ey, alpha, &cfg.ls, &mut rec)? {
            Some(step) => {
                alpha = step.alpha;
                cached = step.eval;
                x_prev = std::mem::replace(&mut x, step.x);
            }
            None if beta != T::zero() => {
                // The extrapolated point gave no descent; fall back to x with no momentum.
                j = 0;
                x_prev = x.clone();
            }
            None => return finish(problem, cfg, rec, RunStatus::Stalled, best.1),
        }
        j += 1;
    }
    unreachable!("the iteration loop only exits by returning")
}

/// Steepest descent with a line search.
pub fn gradient_descent<T: Scalar>(
    problem: &CpProblem<T>,
    x0: &FlatIterate<T>,
    cfg: &SolverConfig,
) -> Result<SolveOutput<T>> {
    let cfg = SolverConfig { variant: Variant::GradientDescent, ..*cfg };
    run(problem, x0, &cfg, false)
}

/// Nesterov's accelerated gradient with a line search at the extrapolated point.
pub fn nesterov_gradient<T: Scalar>(
    problem: &CpProblem<T>,
    x0: &FlatIterate<T>,
    cfg: &SolverConfig,
) -> Result<SolveOutput<T>> {
    let cfg = SolverConfig { variant: Variant::NesterovGradient, ..*cfg };
    run(problem, x0, &cfg, true)
}
