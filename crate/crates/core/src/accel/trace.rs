//! Per-iteration run records and the deterministic work model.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    Stalled,
    /// The objective or gradient became non-finite.
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::BudgetExhausted => "budget_exhausted",
            Self::Stalled => "stalled",
            Self::Diverged => "diverged",
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "converged" => Ok(Self::Converged),
            "budget_exhausted" => Ok(Self::BudgetExhausted),
            "stalled" => Ok(Self::Stalled),
            "diverged" => Ok(Self::Diverged),
            other => Err(format!("unknown run status {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    /// `‖x_k − x_{k−1}‖`
    pub delta_x_norm: f64,
    pub beta_used: f64,
    /// Gradient step length for the gradient baselines; zero for ALS-based solvers.
    pub alpha_used: f64,
    pub restarted: bool,
    pub n_f_evals: u64,
    pub n_g_evals: u64,
    pub n_als_sweeps: u64,
    pub sweep_equivalents: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub solver: String,
    pub n_vars: usize,
    pub tol: f64,
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
}

impl RunTrace {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn total_sweep_equivalents(&self) -> f64 {
        self.last().map_or(0.0, |r| r.sweep_equivalents)
    }

    pub fn total_seconds(&self) -> f64 {
        self.last().map_or(0.0, |r| r.wall_seconds)
    }

    pub fn n_restarts(&self) -> usize {
        self.records.iter().filter(|r| r.restarted).count()
    }
}

/// Flop-count model of one ALS sweep and one fused objective+gradient evaluation, used
/// to express all work in sweep-equivalents independently of the machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub sweep_flops: f64,
    pub eval_flops: f64,
}

impl CostModel {
    pub fn new(shape: &[usize], rank: usize) -> Self {
        let r = rank as f64;
        let total: f64 = shape.iter().map(|&e| e as f64).product();
        let n = shape.len() as f64;
        let mut sweep = 0.0;
        let mut eval = 0.0;
        for (m, &e) in shape.iter().enumerate() {
            let e = e as f64;
            let right: f64 = shape[m + 1..].iter().map(|&v| v as f64).product();
            let mttkrp = 2.0 * r * total + 2.0 * r * e * right;
            let gram = e * r * (r + 1.0);
            let hadamard = n * r * r;
            let solve = r * r * r / 3.0 + 2.0 * e * r * r;
            sweep += mttkrp + gram + hadamard + solve;
            eval += mttkrp + gram + hadamard + 2.0 * e * r * r;
        }
        Self { sweep_flops: sweep, eval_flops: eval }
    }

    /// Cost of one objective+gradient evaluation in sweep-equivalents.
    pub fn eval_ratio(&self) -> f64 {
        self.eval_flops / self.sweep_flops
    }
}

/// Running work counters of a solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkCounters {
    pub n_f_evals: u64,
    pub n_g_evals: u64,
    pub n_als_sweeps: u64,
    eval_ratio: f64,
}

impl WorkCounters {
    pub fn new(cost: CostModel) -> Self {
        Self { n_f_evals: 0, n_g_evals: 0, n_als_sweeps: 0, eval_ratio: cost.eval_ratio() }
    }

    pub fn fused_eval(&mut self) {
        self.n_f_evals += 1;
        self.n_g_evals += 1;
    }

    pub fn sweep(&mut self) {
        self.n_als_sweeps += 1;
    }

    pub fn sweep_equivalents(&self) -> f64 {
        self.n_als_sweeps as f64 + self.eval_ratio * self.n_g_evals as f64
    }
}
