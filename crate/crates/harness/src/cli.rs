//! Command-line interface.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cpnest::problems::{save_tensor, SyntheticSpec};
use cpnest::DenseTensor;

use crate::error::{io_err, HarnessError, Result};
use crate::plan::{
    solver_from_parts, suite_problems, ExperimentPlan, ProblemRef, ProblemSource, SolverOverrides, TolPolicy,
};
use crate::plot::{emit_convergence_curve, write_profile};
use crate::profile::{geometric_grid, tau_profile, CostTable, FailureHandling, Metric};
use crate::runner::{run_plan, run_single, version_string};
use crate::tracefile::{read_dir_traces, work_checksum, TraceFile};

#[derive(Debug, Parser)]
#[command(name = "cpnest", version, about = "CP decomposition with ALS and Nesterov-accelerated ALS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the standard synthetic suite as tensor files plus a plan file.
    Gen(GenArgs),
    /// Decompose one tensor with one solver; writes the trace and the factors.
    Decompose(DecomposeArgs),
    /// Run an experiment plan.
    Bench(BenchArgs),
    /// Build a performance profile from a directory of traces.
    Profile(ProfileArgs),
    /// Plot the convergence of one trace.
    Curve(CurveArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub instances: usize,
    #[arg(long, default_value_t = 2024)]
    pub base_seed: u64,
    /// Comma-separated 1-based class numbers (default: all six)
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Tensor file; omit to generate a synthetic tensor from --s/--c/--l1/--l2/--seed
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    #[arg(long)]
    pub rank: usize,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 0.9)]
    pub c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub l1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    /// Synthetic seed, or the initial-guess seed for a tensor file
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solver name, e.g. ALS, Nesterov-ALS-LS, Nesterov-ALS-RF-SG-D2-E
    #[arg(long, default_value = "ALS")]
    pub solver: String,
    #[command(flatten)]
    pub overrides: SolverOverrides,
    /// absolute or relative (tol times the initial gradient norm)
    #[arg(long, default_value = "absolute")]
    pub tol_mode: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub traces: PathBuf,
    /// work (sweep-equivalents) or time
    #[arg(long, default_value = "work")]
    pub metric: String,
    /// Output path without extension (default: <traces>/profile)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 16.0)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 200)]
    pub tau_points: usize,
    /// Leave problems no solver converged on out of the denominator
    #[arg(long)]
    pub exclude_unsolved: bool,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value = "work")]
    pub metric: String,
    /// Output path without extension (default: next to the trace)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn tol_policy(mode: &str, tol: f64) -> Result<TolPolicy> {
    match mode {
        "absolute" => Ok(TolPolicy::Absolute(tol)),
        "relative" => Ok(TolPolicy::Relative(tol)),
        other => Err(HarnessError::Usage(format!("unknown tolerance mode {other:?}"))),
    }
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(io_err(p))
}

fn gen(a: &GenArgs, out: &mut String) -> Result<()> {
    mkdir(&a.out)?;
    let problems = suite_problems(a.instances, a.base_seed, a.classes.as_deref())?;
    let mut plan = String::from("output_dir = \"runs\"\n\n[tolerance]\nmode = \"absolute\"\nvalue = 1e-9\n\n");
    for p in &problems {
        let ProblemSource::Synthetic(spec) = &p.source else { unreachable!("suite problems are synthetic") };
        let inst = p.load()?;
        let file = format!("{}.tns", p.name);
        save_tensor(&inst.tensor, a.out.join(&file))?;
        writeln!(
            plan,
            "# s={} c={} R={} l1={} l2={} seed={}\n[[problem]]\nname = \"{}\"\nfile = \"{file}\"\nrank = {}\ninit_seed = \"{}\"\n",
            spec.s, spec.c, spec.rank, spec.l1, spec.l2, spec.seed, p.name, spec.rank, spec.seed
        )
        .unwrap();
    }
    plan.push_str("[[solver]]\nspec = \"ALS\"\n\n[[solver]]\nspec = \"Nesterov-ALS-RF-SG\"\n");
    let plan_path = a.out.join("plan.toml");
    fs::write(&plan_path, plan).map_err(io_err(&plan_path))?;
    writeln!(out, "wrote {} tensors and {}", problems.len(), plan_path.display()).unwrap();
    Ok(())
}

fn decompose(a: &DecomposeArgs, out: &mut String) -> Result<()> {
    let cfg = solver_from_parts(&a.solver, &a.overrides)?;
    let pref = match (&a.tensor, a.s) {
        (Some(path), None) => ProblemRef {
            name: path.file_stem().map_or("tensor".into(), |s| s.to_string_lossy().into_owned()),
            source: ProblemSource::File { path: path.clone(), rank: a.rank, init_seed: a.seed },
        },
        (None, Some(s)) => ProblemRef::synthetic("synthetic", SyntheticSpec::new(s, a.c, a.rank, a.l1, a.l2, a.seed)),
        _ => return Err(HarnessError::Usage("give exactly one of --tensor or --s".into())),
    };
    let inst = pref.load()?;
    let tol = tol_policy(&a.tol_mode, cfg.tol)?;
    let result = run_single(&inst, &cfg, tol)?;
    mkdir(&a.out)?;
    let file = TraceFile {
        meta: vec![
            ("problem".into(), pref.name.clone()),
            ("solver".into(), cfg.name()),
            ("seed".into(), pref.seed().to_string()),
            ("spec".into(), pref.describe()),
            ("config".into(), crate::plan::describe_config(&cfg)),
            ("init".into(), "uniform(0,1)".into()),
            ("version".into(), version_string()),
        ],
        trace: result.trace,
    };
    let trace_path = a.out.join(format!("{}.trace", pref.name));
    file.write(&trace_path)?;
    for (n, f) in result.model.factors().iter().enumerate() {
        let t = DenseTensor::new(vec![f.rows(), f.cols()], f.values().to_vec())?;
        save_tensor(&t, a.out.join(format!("factor_{n}.tns")))?;
    }
    let t = &file.trace;
    let last = t.last().expect("a run records at least one iterate");
    writeln!(
        out,
        "{}: {} after {} iterations, {:.1} sweep-equivalents, {} restarts, f = {:e}, |grad|/n_X = {:e}\ntrace: {}",
        t.solver,
        t.status,
        last.k,
        last.sweep_equivalents,
        t.n_restarts(),
        last.f,
        last.grad_norm / t.n_vars as f64,
        trace_path.display()
    )
    .unwrap();
    Ok(())
}

fn bench(a: &BenchArgs, out: &mut String) -> Result<()> {
    let mut plan = ExperimentPlan::from_file(&a.config)?;
    if let Some(p) = a.parallelism {
        plan.parallelism = p;
    }
    if let Some(o) = &a.output {
        plan.output_dir = o.clone();
    }
    let outcomes = run_plan(&plan)?;
    let mut sums = String::new();
    for o in &outcomes {
        let t = &o.file.trace;
        writeln!(sums, "{}  {}", work_checksum(t), o.path.file_name().unwrap().to_string_lossy()).unwrap();
        writeln!(
            out,
            "{:<24} {:<28} r{} {:<16} {:>10.1} sweep-eq{}",
            o.problem,
            o.solver,
            o.repetition,
            t.status,
            t.total_sweep_equivalents(),
            o.error.as_deref().map(|e| format!("  error: {e}")).unwrap_or_default()
        )
        .unwrap();
    }
    let sums_path = plan.output_dir.join("checksums.txt");
    fs::write(&sums_path, sums).map_err(io_err(&sums_path))?;
    writeln!(out, "{} runs, checksums in {}", outcomes.len(), sums_path.display()).unwrap();
    Ok(())
}

fn profile(a: &ProfileArgs, out: &mut String) -> Result<()> {
    let metric: Metric = a.metric.parse()?;
    if a.tau_points < 2 || a.tau_max < 1.0 {
        return Err(HarnessError::Usage("need --tau-points >= 2 and --tau-max >= 1".into()));
    }
    let traces = read_dir_traces(&a.traces)?;
    let table = CostTable::from_traces(&traces, metric)?;
    let failure = if a.exclude_unsolved { FailureHandling::Exclude } else { FailureHandling::CountAsUnsolved };
    let prof = tau_profile(&table, &geometric_grid(a.tau_max, a.tau_points), failure)?;
    let stem = a.out.clone().unwrap_or_else(|| a.traces.join("profile"));
    let (csv, svg) = write_profile(&prof, metric, &stem)?;
    writeln!(out, "{} problems, {} solvers", prof.n_problems, prof.solvers.len()).unwrap();
    for (s, name) in prof.solvers.iter().enumerate() {
        writeln!(out, "  {name:<28} best on {:.2}  solved {:.2}", prof.fractions[s][0], prof.solve_rates[s]).unwrap();
    }
    writeln!(out, "wrote {} and {}", csv.display(), svg.display()).unwrap();
    Ok(())
}

fn curve(a: &CurveArgs, out: &mut String) -> Result<()> {
    let metric: Metric = a.metric.parse()?;
    let file = TraceFile::read(&a.trace)?;
    let stem = a.out.clone().unwrap_or_else(|| a.trace.with_extension(""));
    let (dat, svg) = emit_convergence_curve(&file.trace, metric, &stem)?;
    writeln!(out, "wrote {} and {}", dat.display(), svg.display()).unwrap();
    Ok(())
}

/// Runs a parsed command and returns what it would print.
pub fn execute(cli: &Cli) -> Result<String> {
    let mut out = String::new();
    match &cli.command {
        Command::Gen(a) => gen(a, &mut out)?,
        Command::Decompose(a) => decompose(a, &mut out)?,
        Command::Bench(a) => bench(a, &mut out)?,
        Command::Profile(a) => profile(a, &mut out)?,
        Command::Curve(a) => curve(a, &mut out)?,
    }
    Ok(out)
}
