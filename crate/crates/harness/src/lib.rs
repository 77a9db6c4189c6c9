//! Experiment plans, run traces, performance profiles and plots for `cpnest`.

pub mod cli;
pub mod error;
pub mod plan;
pub mod plot;
pub mod profile;
pub mod runner;
pub mod tracefile;

pub use error::{HarnessError, Result};
pub use plan::{ExperimentPlan, ProblemRef, ProblemSource, SolverOverrides, TolPolicy};
pub use profile::{tau_profile, CostTable, FailureHandling, Metric, TauProfile};
pub use runner::{run_plan, run_single, RunOutcome};
pub use tracefile::{work_checksum, TraceFile};
