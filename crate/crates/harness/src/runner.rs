//! Executes every (problem, solver, repetition) of a plan on a bounded worker pool.

use std::fs;
use std::path::PathBuf;

use cpnest::accel::{solve, RunStatus, RunTrace, SolverConfig};
use cpnest::problems::ProblemInstance;
use cpnest::CpProblem;
use rayon::prelude::*;

use crate::error::{io_err, HarnessError, Result};
use crate::plan::{describe_config, ExperimentPlan, ProblemRef, TolPolicy};
use crate::tracefile::{TraceFile, TRACE_EXTENSION};

pub fn version_string() -> String {
    format!("cpnest v{}", env!("CARGO_PKG_VERSION"))
}

/// One finished run and where its trace was written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub problem: String,
    pub solver: String,
    pub repetition: usize,
    pub path: PathBuf,
    pub file: TraceFile,
    /// Set when the run could not be executed at all.
    pub error: Option<String>,
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

pub fn trace_file_name(problem: &str, solver: &str, repetition: usize) -> String {
    format!("{}__{}__r{repetition}.{TRACE_EXTENSION}", sanitize(problem), sanitize(solver))
}

/// Runs one solver on one loaded problem, applying the tolerance policy.
pub fn run_single(
    problem: &ProblemInstance<f64>,
    cfg: &SolverConfig,
    tol: TolPolicy,
) -> Result<cpnest::SolveOutput<f64>> {
    let p = CpProblem::new(problem.tensor.clone(), problem.rank_to_fit)?;
    let mut cfg = *cfg;
    cfg.tol = match tol {
        TolPolicy::Absolute(t) => t,
        TolPolicy::Relative(t) => t * p.evaluate(&problem.x0)?.grad_norm,
    };
    Ok(solve(&p, &problem.x0, &cfg)?)
}

fn meta_for(p: &ProblemRef, solver: &str, cfg: &SolverConfig, rep: usize, tol: TolPolicy) -> Vec<(String, String)> {
    let tol = match tol {
        TolPolicy::Absolute(t) => format!("absolute:{t}"),
        TolPolicy::Relative(t) => format!("relative:{t}"),
    };
    vec![
        ("problem".into(), p.name.clone()),
        ("solver".into(), solver.to_string()),
        ("seed".into(), p.seed().to_string()),
        ("spec".into(), p.describe()),
        ("config".into(), describe_config(cfg)),
        ("tolerance".into(), tol),
        ("init".into(), "uniform(0,1)".into()),
        ("repetition".into(), rep.to_string()),
        ("version".into(), version_string()),
    ]
}

fn failed_trace(solver: &str, cfg: &SolverConfig) -> RunTrace {
    RunTrace { solver: solver.to_string(), n_vars: 0, tol: cfg.tol, records: Vec::new(), status: RunStatus::Diverged }
}

/// Runs the whole plan. Traces are written as each run finishes; a failing run is
/// recorded (status `diverged`, `error` header) and never aborts the plan.
pub fn run_plan(plan: &ExperimentPlan) -> Result<Vec<RunOutcome>> {
    plan.validate()?;
    fs::create_dir_all(&plan.output_dir).map_err(io_err(&plan.output_dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism)
        .build()
        .map_err(|e| HarnessError::Plan(format!("worker pool: {e}")))?;

    let jobs: Vec<(usize, usize, usize)> = (0..plan.problems.len())
        .flat_map(|p| (0..plan.solvers.len()).flat_map(move |s| (0..plan.repetitions).map(move |r| (p, s, r))))
        .collect();

    pool.install(|| {
        jobs.par_iter()
            .map(|&(pi, si, rep)| {
                let pref = &plan.problems[pi];
                let (sname, cfg) = &plan.solvers[si];
                let path = plan.output_dir.join(trace_file_name(&pref.name, sname, rep));
                let mut meta = meta_for(pref, sname, cfg, rep, plan.tol);
                let result = pref.load().and_then(|inst| run_single(&inst, cfg, plan.tol));
                let (trace, error) = match result {
                    Ok(out) => (out.trace, None),
                    Err(e) => {
                        meta.push(("error".into(), e.to_string().replace('\n', " ")));
                        (failed_trace(&cfg.name(), cfg), Some(e.to_string()))
                    }
                };
                let file = TraceFile { meta, trace };
                file.write(&path)?;
                Ok(RunOutcome { problem: pref.name.clone(), solver: sname.clone(), repetition: rep, path, file, error })
            })
            .collect::<Result<Vec<_>>>()
    })
}
