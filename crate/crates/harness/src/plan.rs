//! Experiment plans and their TOML form.
//!
//! ```toml
//! output_dir = "runs"          # required, relative to the plan file
//! parallelism = 4              # worker threads, default: all cores
//! repetitions = 1
//!
//! [tolerance]
//! mode = "absolute"            # or "relative": tol is multiplied by ‖∇f(x0)‖
//! value = 1e-9
//!
//! [budget]
//! sweeps = 5000                # sweep-equivalents per run
//! seconds = 600                # optional wall-clock cap
//!
//! [suite]                      # optional: the standard synthetic classes
//! instances = 10
//! base_seed = 2024
//! classes = [1, 3]             # optional 1-based subset
//!
//! [[problem]]                  # optional, repeatable
//! name = "collinear"
//! s = 50
//! c = 0.9
//! rank = 3
//! l1 = 1.0
//! l2 = 1.0
//! seed = 7
//!
//! [[problem]]
//! name = "user"
//! file = "data/x.tns"          # relative to the plan file
//! rank = 3
//! init_seed = 1                # seeds above 2^63 - 1 go in quotes: "18446744073709551615"
//!
//! [[solver]]                   # repeatable
//! spec = "Nesterov-ALS-RF-SG-D2-E"
//! name = "rfsg-d2e"            # optional, default: the canonical name
//! eta0 = 1.3                   # optional overrides, same names as the CLI flags
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use cpnest::accel::{EtaMode, MomentumRule, RestartKind, SolverConfig, Variant};
use cpnest::problems::{derive_seed, make_synthetic, ProblemInstance, SyntheticSpec, STANDARD_CLASSES};
use serde::Deserialize;

use crate::error::{io_err, HarnessError, Result};

/// Optional per-field changes applied on top of a named solver.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    /// Variant: als, direct, ls, restarted, gd, nag
    #[arg(long)]
    pub variant: Option<String>,
    /// Momentum rule: SN, SG, S1 or a constant such as 0.5
    #[arg(long)]
    pub momentum: Option<String>,
    /// Restart condition: none, RF, RG, RX
    #[arg(long)]
    pub restart: Option<String>,
    /// Restart delay d
    #[arg(long)]
    pub delay: Option<usize>,
    /// η mode: fixed or scheduled
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long)]
    pub eta0: Option<f64>,
    #[arg(long)]
    pub eta_min: Option<f64>,
    #[arg(long)]
    pub eta_decrement: Option<f64>,
    /// SG denominator skips restart duplicates
    #[arg(long)]
    pub skip_duplicates: Option<bool>,
    #[arg(long)]
    pub ls_c_descent: Option<f64>,
    #[arg(long)]
    pub ls_c_curv: Option<f64>,
    #[arg(long)]
    pub ls_step0: Option<f64>,
    #[arg(long)]
    pub ls_max_iters: Option<usize>,
    #[arg(long)]
    pub ls_step_min: Option<f64>,
    #[arg(long)]
    pub ls_step_max: Option<f64>,
    #[arg(long)]
    pub ls_xtol: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Budget in sweep-equivalents
    #[arg(long)]
    pub max_sweeps: Option<f64>,
    #[arg(long)]
    pub max_seconds: Option<f64>,
    #[arg(long)]
    pub stall_window: Option<usize>,
}

fn parse_momentum(s: &str, skip_duplicates: bool) -> Result<MomentumRule> {
    Ok(match s.to_ascii_uppercase().as_str() {
        "SN" | "NESTEROV" => MomentumRule::SN,
        "SG" | "GRADIENT-RATIO" => MomentumRule::GradientRatio { skip_duplicates },
        "S1" => MomentumRule::S1,
        other => {
            let v = other.strip_prefix('S').unwrap_or(other);
            match v.parse::<f64>() {
                Ok(c) if c.is_finite() => MomentumRule::Constant(c),
                _ => return Err(HarnessError::Usage(format!("unknown momentum rule {s:?}"))),
            }
        }
    })
}

impl SolverOverrides {
    pub fn apply(&self, mut cfg: SolverConfig) -> Result<SolverConfig> {
        if let Some(v) = &self.variant {
            cfg.variant = match v.to_ascii_lowercase().as_str() {
                "als" => Variant::Als,
                "direct" => Variant::NesterovAlsDirect,
                "ls" => Variant::NesterovAlsLs,
                "restarted" => Variant::NesterovAlsRestarted,
                "gd" => Variant::GradientDescent,
                "nag" => Variant::NesterovGradient,
                other => return Err(HarnessError::Usage(format!("unknown variant {other:?}"))),
            };
        }
        if let Some(m) = &self.momentum {
            cfg.momentum = parse_momentum(m, self.skip_duplicates.unwrap_or(false))?;
        } else if let (Some(skip), MomentumRule::GradientRatio { .. }) = (self.skip_duplicates, cfg.momentum) {
            cfg.momentum = MomentumRule::GradientRatio { skip_duplicates: skip };
        }
        if let Some(r) = &self.restart {
            cfg.restart.kind = match r.to_ascii_uppercase().as_str() {
                "NONE" => RestartKind::None,
                "RF" | "FUNCTION" => RestartKind::Function,
                "RG" | "GRADIENT" => RestartKind::Gradient,
                "RX" | "SPEED" => RestartKind::Speed,
                other => return Err(HarnessError::Usage(format!("unknown restart condition {other:?}"))),
            };
        }
        if let Some(d) = self.delay {
            cfg.restart.delay = d;
        }
        if let Some(e) = &self.eta {
            cfg.restart.eta_mode = match e.to_ascii_lowercase().as_str() {
                "fixed" | "one" => EtaMode::FixedOne,
                "scheduled" | "e" => EtaMode::Scheduled,
                other => return Err(HarnessError::Usage(format!("unknown eta mode {other:?}"))),
            };
        }
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut cfg.restart.eta0, self.eta0);
        set(&mut cfg.restart.eta_min, self.eta_min);
        set(&mut cfg.restart.eta_decrement, self.eta_decrement);
        set(&mut cfg.ls.c_descent, self.ls_c_descent);
        set(&mut cfg.ls.c_curv, self.ls_c_curv);
        set(&mut cfg.ls.step0, self.ls_step0);
        set(&mut cfg.ls.step_min, self.ls_step_min);
        set(&mut cfg.ls.step_max, self.ls_step_max);
        set(&mut cfg.ls.xtol, self.ls_xtol);
        set(&mut cfg.tol, self.tol);
        set(&mut cfg.max_sweeps, self.max_sweeps);
        set(&mut cfg.max_seconds, self.max_seconds);
        if let Some(n) = self.ls_max_iters {
            cfg.ls.max_iters = n;
        }
        if let Some(n) = self.stall_window {
            cfg.stall_window = n;
        }
        // a momentum or restart choice on top of ALS means the restarted family
        if self.variant.is_none()
            && (self.restart.is_some() || self.momentum.is_some())
            && matches!(cfg.variant, Variant::Als | Variant::NesterovAlsDirect)
        {
            cfg.variant = Variant::NesterovAlsRestarted;
        }
        cfg.validate().map_err(HarnessError::Usage)?;
        Ok(cfg)
    }
}

/// Parses a solver name and applies overrides.
pub fn solver_from_parts(spec: &str, overrides: &SolverOverrides) -> Result<SolverConfig> {
    overrides.apply(spec.parse()?)
}

/// Every field of a configuration, for trace provenance.
pub fn describe_config(cfg: &SolverConfig) -> String {
    let m = match cfg.momentum {
        MomentumRule::Nesterov => "SN".to_string(),
        MomentumRule::GradientRatio { skip_duplicates } => format!("SG(skip_duplicates={skip_duplicates})"),
        MomentumRule::Constant(c) => format!("S{c}"),
    };
    let r = &cfg.restart;
    format!(
        "variant={:?};momentum={m};restart={:?};delay={};eta={:?};eta0={};eta_min={};eta_decrement={};\
         ls=({},{},{},{},{},{},{});tol={};max_sweeps={};max_seconds={};stall_window={}",
        cfg.variant,
        r.kind,
        r.delay,
        r.eta_mode,
        r.eta0,
        r.eta_min,
        r.eta_decrement,
        cfg.ls.c_descent,
        cfg.ls.c_curv,
        cfg.ls.step0,
        cfg.ls.max_iters,
        cfg.ls.step_min,
        cfg.ls.step_max,
        cfg.ls.xtol,
        cfg.tol,
        cfg.max_sweeps,
        cfg.max_seconds,
        cfg.stall_window
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TolPolicy {
    Absolute(f64),
    /// `tol · ‖∇f(x0)‖`
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Synthetic(SyntheticSpec),
    File { path: PathBuf, rank: usize, init_seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemRef {
    pub name: String,
    pub source: ProblemSource,
}

impl ProblemRef {
    pub fn synthetic(name: impl Into<String>, spec: SyntheticSpec) -> Self {
        Self { name: name.into(), source: ProblemSource::Synthetic(spec) }
    }

    pub fn load(&self) -> Result<ProblemInstance<f64>> {
        Ok(match &self.source {
            ProblemSource::Synthetic(spec) => make_synthetic(spec)?,
            ProblemSource::File { path, rank, init_seed } => ProblemInstance::from_file(path, *rank, *init_seed)?,
        })
    }

    pub fn describe(&self) -> String {
        match &self.source {
            ProblemSource::Synthetic(s) => {
                format!("synthetic(s={},c={},R={},l1={},l2={})", s.s, s.c, s.rank, s.l1, s.l2)
            }
            ProblemSource::File { path, rank, .. } => format!("file({},R={rank})", path.display()),
        }
    }

    pub fn seed(&self) -> u64 {
        match &self.source {
            ProblemSource::Synthetic(s) => s.seed,
            ProblemSource::File { init_seed, .. } => *init_seed,
        }
    }
}

/// Names of the standard classes, `class1` … `class6`, with instance suffixes.
pub fn suite_problems(instances: usize, base_seed: u64, classes: Option<&[usize]>) -> Result<Vec<ProblemRef>> {
    let mut out = Vec::new();
    for (ci, &(s, c, r, l1, l2)) in STANDARD_CLASSES.iter().enumerate() {
        if classes.is_some_and(|cs| !cs.contains(&(ci + 1))) {
            continue;
        }
        for i in 0..instances {
            let spec = SyntheticSpec::new(s, c, r, l1, l2, derive_seed(base_seed, ci, i));
            out.push(ProblemRef::synthetic(format!("class{}-{:02}", ci + 1, i), spec));
        }
    }
    if let Some(cs) = classes {
        if let Some(bad) = cs.iter().find(|&&c| c == 0 || c > STANDARD_CLASSES.len()) {
            return Err(HarnessError::Plan(format!("no standard class {bad}")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub problems: Vec<ProblemRef>,
    pub solvers: Vec<(String, SolverConfig)>,
    pub tol: TolPolicy,
    pub repetitions: usize,
    pub parallelism: usize,
    pub output_dir: PathBuf,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() || self.solvers.is_empty() {
            return Err(HarnessError::Plan("a plan needs at least one problem and one solver".into()));
        }
        if self.repetitions == 0 {
            return Err(HarnessError::Plan("repetitions must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for p in &self.problems {
            if !seen.insert(&p.name) {
                return Err(HarnessError::Plan(format!("duplicate problem name {:?}", p.name)));
            }
            if let ProblemSource::Synthetic(s) = &p.source {
                s.validate()?;
            }
        }
        let mut seen = HashSet::new();
        for (name, cfg) in &self.solvers {
            if !seen.insert(name) {
                return Err(HarnessError::Plan(format!("duplicate solver name {name:?}")));
            }
            cfg.validate().map_err(HarnessError::Plan)?;
        }
        match self.tol {
            TolPolicy::Absolute(t) | TolPolicy::Relative(t) if t >= 0.0 => Ok(()),
            _ => Err(HarnessError::Plan("tolerance must be non-negative".into())),
        }
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawPlan = toml::from_str(text).map_err(|e| HarnessError::Plan(e.to_string()))?;
        raw.into_plan(base_dir)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

/// Seeds span the full `u64` range but TOML integers stop at `i64::MAX`, so a seed may
/// also be written as a decimal string.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawSeed {
    Int(u64),
    Str(String),
}

impl RawSeed {
    fn value(&self) -> Result<u64> {
        match self {
            RawSeed::Int(v) => Ok(*v),
            RawSeed::Str(s) => s.trim().parse().map_err(|_| HarnessError::Plan(format!("bad seed {s:?}"))),
        }
    }
}

fn seed_of(raw: &Option<RawSeed>) -> Result<Option<u64>> {
    raw.as_ref().map(RawSeed::value).transpose()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    output_dir: PathBuf,
    parallelism: Option<usize>,
    repetitions: Option<usize>,
    tolerance: Option<RawTolerance>,
    budget: Option<RawBudget>,
    suite: Option<RawSuite>,
    #[serde(default)]
    problem: Vec<RawProblem>,
    #[serde(default)]
    solver: Vec<RawSolver>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerance {
    mode: String,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    sweeps: Option<f64>,
    seconds: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    instances: usize,
    base_seed: RawSeed,
    classes: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    name: String,
    s: Option<usize>,
    c: Option<f64>,
    rank: usize,
    l1: Option<f64>,
    l2: Option<f64>,
    seed: Option<RawSeed>,
    file: Option<PathBuf>,
    init_seed: Option<RawSeed>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    spec: String,
    name: Option<String>,
    #[serde(flatten)]
    overrides: SolverOverrides,
}

impl RawPlan {
    fn into_plan(self, base_dir: &Path) -> Result<ExperimentPlan> {
        let tol = match &self.tolerance {
            None => TolPolicy::Absolute(1e-9),
            Some(t) => match t.mode.as_str() {
                "absolute" => TolPolicy::Absolute(t.value),
                "relative" => TolPolicy::Relative(t.value),
                other => return Err(HarnessError::Plan(format!("unknown tolerance mode {other:?}"))),
            },
        };
        let mut problems = match &self.suite {
            Some(s) => suite_problems(s.instances, s.base_seed.value()?, s.classes.as_deref())?,
            None => Vec::new(),
        };
        for p in self.problem {
            let source = match (&p.file, p.s) {
                (Some(f), None) => ProblemSource::File {
                    path: base_dir.join(f),
                    rank: p.rank,
                    init_seed: seed_of(&p.init_seed)?.unwrap_or(0),
                },
                (None, Some(s)) => ProblemSource::Synthetic(SyntheticSpec::new(
                    s,
                    p.c.unwrap_or(0.9),
                    p.rank,
                    p.l1.unwrap_or(0.0),
                    p.l2.unwrap_or(0.0),
                    seed_of(&p.seed)?
                        .ok_or_else(|| HarnessError::Plan(format!("problem {:?} needs a seed", p.name)))?,
                )),
                _ => {
                    return Err(HarnessError::Plan(format!("problem {:?} needs exactly one of 'file' or 's'", p.name)))
                }
            };
            problems.push(ProblemRef { name: p.name, source });
        }
        let mut solvers = Vec::new();
        for s in self.solver {
            let mut cfg = solver_from_parts(&s.spec, &s.overrides)
                .map_err(|e| HarnessError::Plan(format!("solver {:?}: {e}", s.spec)))?;
            if let Some(b) = &self.budget {
                if s.overrides.max_sweeps.is_none() {
                    cfg.max_sweeps = b.sweeps.unwrap_or(cfg.max_sweeps);
                }
                if s.overrides.max_seconds.is_none() {
                    cfg.max_seconds = b.seconds.unwrap_or(cfg.max_seconds);
                }
            }
            solvers.push((s.name.unwrap_or_else(|| cfg.name()), cfg));
        }
        let plan = ExperimentPlan {
            problems,
            solvers,
            tol,
            repetitions: self.repetitions.unwrap_or(1),
            parallelism: self.parallelism.unwrap_or(0),
            output_dir: base_dir.join(self.output_dir),
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_grammar() {
        let text = r#"
            output_dir = "runs"
            parallelism = 2
            [tolerance]
            mode = "relative"
            value = 1e-7
            [budget]
            sweeps = 300
            [suite]
            instances = 2
            base_seed = 5
            classes = [1, 3]
            [[problem]]
            name = "collinear"
            s = 50
            c = 0.9
            rank = 3
            l1 = 1.0
            l2 = 1.0
            seed = 7
            [[solver]]
            spec = "ALS"
            [[solver]]
            spec = "Nesterov-ALS-RF-SG-D2-E"
            name = "tuned"
            eta0 = 1.3
            max_sweeps = 50
        "#;
        let plan = ExperimentPlan::from_toml(text, Path::new("/tmp/base")).unwrap();
        assert_eq!(plan.problems.len(), 5);
        assert_eq!(plan.problems[2].name, "class3-00");
        assert_eq!(plan.tol, TolPolicy::Relative(1e-7));
        assert_eq!(plan.output_dir, Path::new("/tmp/base/runs"));
        assert_eq!(plan.solvers[0].0, "ALS");
        assert_eq!(plan.solvers[0].1.max_sweeps, 300.0);
        let (name, cfg) = &plan.solvers[1];
        assert_eq!(name, "tuned");
        assert_eq!(cfg.restart.eta0, 1.3);
        assert_eq!(cfg.restart.delay, 2);
        assert_eq!(cfg.max_sweeps, 50.0);
    }

    #[test]
    fn rejects_bad_plans() {
        let base = Path::new(".");
        let solver = "[[solver]]\nspec = \"ALS\"\n";
        let prob = "[[problem]]\nname = \"a\"\ns = 5\nrank = 2\nseed = 1\n";
        for bad in [
            format!("output_dir = \"o\"\n{solver}"),
            format!("output_dir = \"o\"\n{prob}"),
            format!("output_dir = \"o\"\n{prob}{prob}{solver}"),
            format!("output_dir = \"o\"\n{prob}[[solver]]\nspec = \"Nesterov-ALS-XX\"\n"),
            format!("output_dir = \"o\"\nbogus = 1\n{prob}{solver}"),
            format!("output_dir = \"o\"\n{prob}{solver}[tolerance]\nmode = \"sideways\"\nvalue = 1.0\n"),
            format!("output_dir = \"o\"\n[suite]\ninstances = 1\nbase_seed = 0\nclasses = [7]\n{solver}"),
        ] {
            assert!(ExperimentPlan::from_toml(&bad, base).is_err(), "accepted:\n{bad}");
        }
    }

    #[test]
    fn overrides_cover_restart_fields() {
        let o = SolverOverrides {
            restart: Some("RG".into()),
            momentum: Some("0.5".into()),
            delay: Some(3),
            eta: Some("scheduled".into()),
            eta_min: Some(1.1),
            ..Default::default()
        };
        let cfg = solver_from_parts("ALS", &o).unwrap();
        assert_eq!(cfg.variant, Variant::NesterovAlsRestarted);
        assert_eq!(cfg.restart.kind, RestartKind::Gradient);
        assert_eq!(cfg.momentum, MomentumRule::Constant(0.5));
        assert_eq!((cfg.restart.delay, cfg.restart.eta_mode, cfg.restart.eta_min), (3, EtaMode::Scheduled, 1.1));
        let o = SolverOverrides { skip_duplicates: Some(true), ..Default::default() };
        let cfg = solver_from_parts("Nesterov-ALS-RF-SG", &o).unwrap();
        assert_eq!(cfg.momentum, MomentumRule::GradientRatio { skip_duplicates: true });
        assert!(solver_from_parts(
            "ALS",
            &SolverOverrides { delay: Some(0), restart: Some("RF".into()), ..Default::default() }
        )
        .is_err());
    }

    #[test]
    fn seeds_beyond_i64_are_quoted() {
        let text = r#"
            output_dir = "o"
            [[problem]]
            name = "big"
            s = 5
            rank = 2
            seed = "18446744073709551615"
            [[problem]]
            name = "small"
            file = "x.tns"
            rank = 2
            init_seed = 3
            [[solver]]
            spec = "ALS"
        "#;
        let plan = ExperimentPlan::from_toml(text, Path::new(".")).unwrap();
        assert_eq!(plan.problems[0].seed(), u64::MAX);
        assert_eq!(plan.problems[1].seed(), 3);
        let bad = text.replace("\"18446744073709551615\"", "\"x1\"");
        assert!(ExperimentPlan::from_toml(&bad, Path::new(".")).is_err());
    }
}
