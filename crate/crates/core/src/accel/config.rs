//! Declarative solver descriptions and the `Nesterov-ALS-RF-SG-D2-E` naming scheme.

use std::fmt;
use std::str::FromStr;

use crate::linesearch::LineSearchConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Als,
    /// Nesterov weights indexed by the global iteration, no restart.
    NesterovAlsDirect,
    /// Momentum weight chosen by a line search on `f(x_k + β(x_k − x_{k−1}))`.
    NesterovAlsLs,
    NesterovAlsRestarted,
    GradientDescent,
    NesterovGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumRule {
    /// `SN`: `(λ_{i−1} − 1)/λ_i` with the restart-local index `i`.
    Nesterov,
    /// `SG`: `‖∇f(x_k)‖ / ‖∇f(x_{k−1})‖`. With `skip_duplicates`, the denominator is the
    /// most recent record that was not a restart duplicate.
    GradientRatio { skip_duplicates: bool },
    /// `S1` when the value is 1.
    Constant(f64),
}

impl MomentumRule {
    pub const SN: Self = Self::Nesterov;
    pub const SG: Self = Self::GradientRatio { skip_duplicates: false };
    pub const S1: Self = Self::Constant(1.0);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RestartKind {
    None,
    /// `RF`: `f(x_k) > η f(x_{k−d})`
    Function,
    /// `RG`: `‖∇f(x_k)‖ > η ‖∇f(x_{k−d})‖`
    Gradient,
    /// `RX`: `‖x_k − x_{k−1}‖ < η ‖x_{k−d} − x_{k−d−1}‖`
    Speed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EtaMode {
    FixedOne,
    /// `eta0` right after a restart, then reduced by `eta_decrement` per step down to `eta_min`.
    Scheduled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartRule {
    pub kind: RestartKind,
    pub delay: usize,
    pub eta_mode: EtaMode,
    pub eta0: f64,
    pub eta_min: f64,
    pub eta_decrement: f64,
}

impl RestartRule {
    pub const DEFAULT_ETA0: f64 = 1.25;
    pub const DEFAULT_ETA_MIN: f64 = 1.15;
    pub const DEFAULT_ETA_DECREMENT: f64 = 0.02;

    pub fn new(kind: RestartKind) -> Self {
        Self {
            kind,
            delay: 1,
            eta_mode: EtaMode::FixedOne,
            eta0: Self::DEFAULT_ETA0,
            eta_min: Self::DEFAULT_ETA_MIN,
            eta_decrement: Self::DEFAULT_ETA_DECREMENT,
        }
    }

    pub fn none() -> Self {
        Self::new(RestartKind::None)
    }

    pub fn with_delay(mut self, d: usize) -> Self {
        self.delay = d;
        self
    }

    pub fn scheduled(mut self) -> Self {
        self.eta_mode = EtaMode::Scheduled;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.delay < 1 {
            return Err("restart delay must be at least 1".into());
        }
        if self.eta_mode == EtaMode::Scheduled
            && !(self.eta0 >= self.eta_min && self.eta_min >= 1.0 && self.eta_decrement > 0.0)
        {
            return Err(format!(
                "eta schedule needs eta0 >= eta_min >= 1 and decrement > 0, got {} / {} / {}",
                self.eta0, self.eta_min, self.eta_decrement
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    pub momentum: MomentumRule,
    pub restart: RestartRule,
    pub ls: LineSearchConfig,
    /// Stop once `‖∇f‖ / n_X ≤ tol`.
    pub tol: f64,
    /// Budget in sweep-equivalents.
    pub max_sweeps: f64,
    pub max_seconds: f64,
    /// Declare a stall after this many consecutive iterations with `f` frozen and no new
    /// smallest `‖∇f‖`.
    pub stall_window: usize,
}

impl SolverConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            momentum: MomentumRule::SN,
            restart: RestartRule::none(),
            ls: LineSearchConfig::default(),
            tol: 1e-9,
            max_sweeps: 10_000.0,
            max_seconds: f64::INFINITY,
            stall_window: 50,
        }
    }

    pub fn als() -> Self {
        Self::new(Variant::Als)
    }

    pub fn restarted(restart: RestartRule, momentum: MomentumRule) -> Self {
        Self { momentum, restart, ..Self::new(Variant::NesterovAlsRestarted) }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_budget(mut self, max_sweeps: f64) -> Self {
        self.max_sweeps = max_sweeps;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol >= 0.0) {
            return Err(format!("tol must be non-negative, got {}", self.tol));
        }
        if !(self.max_sweeps > 0.0) || !(self.max_seconds > 0.0) {
            return Err("budgets must be positive".into());
        }
        if self.stall_window == 0 {
            return Err("stall window must be positive".into());
        }
        self.ls.validate()?;
        self.restart.validate()
    }

    /// Canonical name in the naming scheme.
    pub fn name(&self) -> String {
        match self.variant {
            Variant::Als => "ALS".into(),
            Variant::NesterovAlsDirect => "Nesterov-ALS".into(),
            Variant::NesterovAlsLs => "Nesterov-ALS-LS".into(),
            Variant::GradientDescent => "GD".into(),
            Variant::NesterovGradient => "Nesterov-GD".into(),
            Variant::NesterovAlsRestarted => {
                let mut s = String::from("Nesterov-ALS");
                match self.restart.kind {
                    RestartKind::None => {}
                    RestartKind::Function => s.push_str("-RF"),
                    RestartKind::Gradient => s.push_str("-RG"),
                    RestartKind::Speed => s.push_str("-RX"),
                }
                match self.momentum {
                    MomentumRule::Nesterov => s.push_str("-SN"),
                    MomentumRule::GradientRatio { .. } => s.push_str("-SG"),
                    MomentumRule::Constant(c) if c == 1.0 => s.push_str("-S1"),
                    MomentumRule::Constant(c) => s.push_str(&format!("-S{c}")),
                }
                if self.restart.delay > 1 {
                    s.push_str(&format!("-D{}", self.restart.delay));
                }
                if self.restart.eta_mode == EtaMode::Scheduled {
                    s.push_str("-E");
                }
                s
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseSolverError(pub String);

impl fmt::Display for ParseSolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown solver name: {}", self.0)
    }
}

impl std::error::Error for ParseSolverError {}

impl FromStr for SolverConfig {
    type Err = ParseSolverError;

    fn from_str(name: &str) -> Result<Self, Self::Err> {
        let err = || ParseSolverError(name.to_string());
        let upper = name.trim().to_ascii_uppercase();
        match upper.as_str() {
            "ALS" => return Ok(Self::als()),
            "NESTEROV-ALS" => return Ok(Self::new(Variant::NesterovAlsDirect)),
            "NESTEROV-ALS-LS" => return Ok(Self::new(Variant::NesterovAlsLs)),
            "GD" | "GRADIENT-DESCENT" => return Ok(Self::new(Variant::GradientDescent)),
            "NESTEROV-GD" | "NESTEROV-GRADIENT" | "NAG" => return Ok(Self::new(Variant::NesterovGradient)),
            _ => {}
        }
        let rest = upper.strip_prefix("NESTEROV-ALS-").ok_or_else(err)?;
        let mut parts = rest.split('-').peekable();
        let kind = match parts.peek().copied() {
            Some("RF") => Some(RestartKind::Function),
            Some("RG") => Some(RestartKind::Gradient),
            Some("RX") => Some(RestartKind::Speed),
            _ => None,
        };
        let kind = match kind {
            Some(k) => {
                parts.next();
                k
            }
            None => RestartKind::None,
        };
        let momentum = match parts.next() {
            Some("SN") => MomentumRule::SN,
            Some("SG") => MomentumRule::SG,
            Some("S1") => MomentumRule::S1,
            Some(other) => match other.strip_prefix('S').and_then(|v| v.parse::<f64>().ok()) {
                Some(c) if c.is_finite() => MomentumRule::Constant(c),
                _ => return Err(err()),
            },
            None => return Err(err()),
        };
        let mut restart = RestartRule::new(kind);
        let mut seen_e = false;
        for p in parts {
            if let Some(d) = p.strip_prefix('D') {
                let d: usize = d.parse().map_err(|_| err())?;
                if d < 1 || restart.delay != 1 || seen_e {
                    return Err(err());
                }
                restart.delay = d;
            } else if p == "E" && !seen_e {
                seen_e = true;
                restart.eta_mode = EtaMode::Scheduled;
            } else {
                return Err(err());
            }
        }
        Ok(Self::restarted(restart, momentum))
    }
}

impl fmt::Display for SolverConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
