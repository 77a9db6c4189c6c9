use std::fs;
use std::path::Path;

use clap::Parser;
use cpnest::accel::{EtaMode, MomentumRule, RestartKind, Variant};
use cpnest::RunStatus;
use cpnest_harness::cli::{execute, Cli, Command};
use cpnest_harness::{run_plan, ExperimentPlan, TraceFile};

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("cpnest").chain(args.iter().copied())).unwrap()
}

fn exec(args: &[&str]) -> String {
    execute(&cli(args)).unwrap_or_else(|e| panic!("{args:?}: {e}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solver_flags_parse() {
    let c = cli(&["decompose", "--s", "5", "--rank", "2", "--out", "x", "--solver", "Nesterov-ALS-RF-SG"]);
    let Command::Decompose(a) = c.command else { panic!("wrong subcommand") };
    let cfg = cpnest_harness::plan::solver_from_parts(&a.solver, &a.overrides).unwrap();
    assert_eq!(cfg.variant, Variant::NesterovAlsRestarted);
    assert_eq!(cfg.restart.kind, RestartKind::Function);
    assert_eq!(cfg.momentum, MomentumRule::SG);

    let c = cli(&[
        "decompose",
        "--s",
        "5",
        "--rank",
        "2",
        "--out",
        "x",
        "--solver",
        "Nesterov-ALS-RG-S1-E",
        "--eta0",
        "1.3",
        "--delay",
        "2",
    ]);
    let Command::Decompose(a) = c.command else { panic!("wrong subcommand") };
    let cfg = cpnest_harness::plan::solver_from_parts(&a.solver, &a.overrides).unwrap();
    assert_eq!(cfg.restart.kind, RestartKind::Gradient);
    assert_eq!(cfg.momentum, MomentumRule::S1);
    assert_eq!(cfg.restart.eta_mode, EtaMode::Scheduled);
    assert_eq!(cfg.restart.eta0, 1.3);
    assert_eq!(cfg.restart.delay, 2);

    assert!(Cli::try_parse_from(["cpnest", "decompose", "--out", "x"]).is_err());
    let c = cli(&["decompose", "--s", "5", "--rank", "2", "--out", "x", "--solver", "Nesterov-ALS-XX"]);
    assert!(execute(&c).is_err());
}

#[test]
fn decompose_writes_trace_and_factors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let msg = exec(&[
        "decompose",
        "--s",
        "8",
        "--c",
        "0.5",
        "--rank",
        "2",
        "--seed",
        "3",
        "--solver",
        "Nesterov-ALS-RF-SG",
        "--tol",
        "1e-8",
        "--out",
        s(&out),
    ]);
    assert!(msg.contains("converged"), "{msg}");
    let trace = TraceFile::read(&out.join("synthetic.trace")).unwrap();
    assert_eq!(trace.trace.solver, "Nesterov-ALS-RF-SG");
    assert_eq!(trace.trace.status, RunStatus::Converged);
    assert_eq!(trace.get("seed"), Some("3"));
    for n in 0..3 {
        let f = cpnest::problems::load_tensor(out.join(format!("factor_{n}.tns"))).unwrap();
        assert_eq!(f.shape(), &[8, 2]);
    }

    // A tensor file works the same way.
    let tns = dir.path().join("t.tns");
    let t = cpnest::problems::make_synthetic(&cpnest::problems::SyntheticSpec::new(6, 0.5, 2, 0.0, 0.0, 1)).unwrap();
    cpnest::problems::save_tensor(&t.tensor, &tns).unwrap();
    exec(&["decompose", "--tensor", s(&tns), "--rank", "2", "--out", s(&out)]);
    assert!(out.join("t.trace").exists());
}

#[test]
fn budget_limited_runs_report_budget_exhausted() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
output_dir = "runs"
[budget]
sweeps = 20
[[problem]]
name = "p"
s = 10
c = 0.9
rank = 3
l1 = 1.0
l2 = 1.0
seed = 4
[[solver]]
spec = "ALS"
[[solver]]
spec = "GD"
"#;
    let plan = ExperimentPlan::from_toml(text, dir.path()).unwrap();
    let outcomes = run_plan(&plan).unwrap();
    assert_eq!(outcomes.len(), 2);
    for o in &outcomes {
        assert_eq!(o.file.trace.status, RunStatus::BudgetExhausted, "{}", o.solver);
        assert!(o.path.exists());
        let back = TraceFile::read(&o.path).unwrap();
        assert_eq!(back.trace.status, RunStatus::BudgetExhausted);
    }
}

#[test]
fn gen_bench_profile_curve_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    let msg = exec(&["gen", "--out", s(&suite), "--instances", "2", "--classes", "2,4"]);
    assert!(msg.contains("wrote 4 tensors"), "{msg}");
    let tensors =
        fs::read_dir(&suite).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "tns"));
    assert_eq!(tensors.count(), 4);

    // Shrink the generated plan so the test stays quick.
    let plan_path = suite.join("plan.toml");
    let plan =
        fs::read_to_string(&plan_path).unwrap().replace("value = 1e-9", "value = 1e-6\n\n[budget]\nsweeps = 300");
    fs::write(&plan_path, plan).unwrap();

    let runs = dir.path().join("runs");
    let msg = exec(&["bench", "--config", s(&plan_path), "--output", s(&runs), "--parallelism", "2"]);
    assert!(msg.contains("8 runs"), "{msg}");
    let traces: Vec<_> = fs::read_dir(&runs)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "trace"))
        .collect();
    assert_eq!(traces.len(), 4 * 2);
    let sums = fs::read_to_string(runs.join("checksums.txt")).unwrap();
    assert_eq!(sums.lines().count(), 8);

    let msg = exec(&["profile", "--traces", s(&runs), "--tau-points", "20"]);
    assert!(msg.contains("4 problems, 2 solvers"), "{msg}");
    let csv = fs::read_to_string(runs.join("profile.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 20 + 1);
    assert!(csv.lines().last().unwrap().starts_with("inf"));
    assert!(runs.join("profile.svg").exists());

    let one = &traces[0];
    let stem = dir.path().join("curve");
    exec(&["curve", "--trace", s(one), "--out", s(&stem)]);
    let file = TraceFile::read(one).unwrap();
    let dat = fs::read_to_string(stem.with_extension("dat")).unwrap();
    let rows: Vec<&str> = dat.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), file.trace.records.len());
    let svg = fs::read_to_string(stem.with_extension("svg")).unwrap();
    assert_eq!(svg.matches(r#"class="restart""#).count(), file.trace.n_restarts());
}

#[test]
fn bad_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert!(execute(&cli(&["bench", "--config", s(&missing)])).is_err());
    assert!(execute(&cli(&["profile", "--traces", s(dir.path()), "--metric", "bogus"])).is_err());
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "output_dir = \"x\"\nunknown_key = 1\n").unwrap();
    assert!(execute(&cli(&["bench", "--config", s(&bad)])).is_err());
}
