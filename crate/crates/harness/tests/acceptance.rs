//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use cpnest::accel::{eta_advance, NesterovSequence, RestartKind, RestartRule, RunTrace, SolverConfig, SolverState};
use cpnest::problems::{derive_seed, make_synthetic, standard_suite, SyntheticSpec};
use cpnest::tensor::{hadamard_grams, mode_khatri_rao, mttkrp, unfold};
use cpnest::{CpProblem, DenseTensor, FlatIterate, Matrix};
use cpnest_harness::plan::{ExperimentPlan, ProblemRef, TolPolicy};
use cpnest_harness::profile::{default_grid, tau_profile, CostTable, FailureHandling, Metric};
use cpnest_harness::runner::{run_plan, RunOutcome};
use cpnest_harness::tracefile::work_checksum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng as Rng8;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String, started: Instant) {
        if !ok {
            self.failures += 1;
        }
        println!(
            "{} criterion {id}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
}

fn rel(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    let d: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum();
    d.sqrt() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

fn random_tensor(rng: &mut Rng8, shape: &[usize]) -> DenseTensor<f64> {
    DenseTensor::from_fn(shape.to_vec(), |_| rng.random_range(-1.0..1.0)).unwrap()
}

fn criterion_1(r: &mut Report) {
    let t0 = Instant::now();
    let mut rng = Rng8::seed_from_u64(1);
    let (mut worst_m, mut worst_h) = (0.0f64, 0.0f64);
    for case in 0..20 {
        let order = if case % 2 == 0 { 3 } else { 4 };
        let shape: Vec<usize> =
            if case == 19 { vec![8; 4] } else { (0..order).map(|_| rng.random_range(2..=8)).collect() };
        let rank = rng.random_range(1..=5);
        let t = random_tensor(&mut rng, &shape);
        let factors: Vec<Matrix<f64>> =
            shape.iter().map(|&e| Matrix::from_fn(e, rank, |_, _| rng.random_range(-1.0..1.0))).collect();
        for mode in 0..order {
            let kr = mode_khatri_rao(&factors, mode).unwrap();
            let slow = unfold(&t, mode).unwrap().matmul(&kr).unwrap();
            worst_m = worst_m.max(rel(&mttkrp(&t, &factors, mode).unwrap(), &slow));
            let gram = kr.transpose().matmul(&kr).unwrap();
            worst_h = worst_h.max(rel(&hadamard_grams(&factors, Some(mode)).unwrap(), &gram));
        }
    }
    let ok = worst_m <= 1e-12 && worst_h <= 1e-10 && t0.elapsed().as_secs_f64() < 10.0;
    r.line("1 (kernel oracles)", ok, format!("max rel. error mttkrp {worst_m:.2e}, hadamard {worst_h:.2e}"), t0);
}

fn criterion_2(r: &mut Report) {
    let t0 = Instant::now();
    let mut rng = Rng8::seed_from_u64(2);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let p = CpProblem::new(random_tensor(&mut rng, &[4, 3, 2]), 2).unwrap();
        let x = FlatIterate((0..p.n_vars()).map(|_| rng.random_range(-1.0..1.0)).collect());
        let g = p.evaluate(&x).unwrap().grad;
        let fd = FlatIterate(
            (0..x.len())
                .map(|i| {
                    let (mut up, mut dn) = (x.clone(), x.clone());
                    up.0[i] += h;
                    dn.0[i] -= h;
                    (p.objective(&up).unwrap() - p.objective(&dn).unwrap()) / (2.0 * h)
                })
                .collect(),
        );
        worst = worst.max(g.sub(&fd).norm() / g.norm());
    }
    let ok = worst < 1e-5 && t0.elapsed().as_secs_f64() < 5.0;
    r.line("2 (gradient vs central differences)", ok, format!("max relative error {worst:.2e}"), t0);
}

fn criterion_3(r: &mut Report) {
    let t0 = Instant::now();
    let mut rng = Rng8::seed_from_u64(3);
    let mut violations = 0;
    for _ in 0..10 {
        let shape: Vec<usize> = (0..3).map(|_| rng.random_range(3..=10)).collect();
        let p = CpProblem::new(random_tensor(&mut rng, &shape), rng.random_range(1..=4)).unwrap();
        let mut x = FlatIterate((0..p.n_vars()).map(|_| rng.random_range(0.0..1.0)).collect());
        let mut f = p.objective(&x).unwrap();
        for _ in 0..100 {
            x = p.als_sweep(&x).unwrap();
            let next = p.objective(&x).unwrap();
            if next > f * (1.0 + 1e-12) {
                violations += 1;
            }
            f = next;
        }
    }
    let ok = violations == 0 && t0.elapsed().as_secs_f64() < 30.0;
    r.line("3 (ALS monotonicity)", ok, format!("{violations} increases over 10 x 100 sweeps"), t0);
}

fn criterion_4(r: &mut Report) {
    let t0 = Instant::now();
    let cfg = SolverConfig::als().with_tol(1e-9).with_budget(10_000.0);
    let mut solved = 0;
    let mut detail = Vec::new();
    for seed in 0..10 {
        let inst = make_synthetic(&SyntheticSpec::new(20, 0.5, 3, 0.0, 0.0, derive_seed(4, 0, seed))).unwrap();
        let p = CpProblem::new(inst.tensor, 3).unwrap();
        let out = cpnest::solve(&p, &inst.x0, &cfg).unwrap();
        let sweeps = out.trace.last().unwrap().n_als_sweeps;
        if out.trace.converged() && sweeps <= 2000 {
            solved += 1;
        }
        detail.push(format!("{sweeps}{}", if out.trace.converged() { "" } else { "*" }));
    }
    let ok = solved >= 8 && t0.elapsed().as_secs_f64() < 120.0;
    r.line(
        "4 (exact recovery)",
        ok,
        format!("{solved}/10 seeds within 2000 sweeps (sweeps: {})", detail.join(" ")),
        t0,
    );
}

const COLLINEAR_SOLVERS: [&str; 4] = ["ALS", "Nesterov-ALS", "Nesterov-ALS-RF-SG", "Nesterov-ALS-LS"];

fn collinear_plan(out: &Path) -> ExperimentPlan {
    let problems = (0..10)
        .map(|i| {
            ProblemRef::synthetic(
                format!("collinear-{i:02}"),
                SyntheticSpec::new(50, 0.9, 3, 1.0, 1.0, derive_seed(2024, 0, i)),
            )
        })
        .collect();
    let solvers = COLLINEAR_SOLVERS
        .iter()
        .map(|s| (s.to_string(), s.parse::<SolverConfig>().unwrap().with_tol(1e-9).with_budget(5000.0)))
        .collect();
    ExperimentPlan {
        problems,
        solvers,
        tol: TolPolicy::Absolute(1e-9),
        repetitions: 1,
        parallelism: 0,
        output_dir: out.to_path_buf(),
    }
}

fn by_solver(outcomes: &[RunOutcome]) -> BTreeMap<String, BTreeMap<String, RunTrace>> {
    let mut m: BTreeMap<String, BTreeMap<String, RunTrace>> = BTreeMap::new();
    for o in outcomes {
        m.entry(o.solver.clone()).or_default().insert(o.problem.clone(), o.file.trace.clone());
    }
    m
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_5(r: &mut Report, outcomes: &[RunOutcome], t0: Instant) {
    let runs = by_solver(outcomes);
    let solved = |s: &str| runs[s].values().filter(|t| t.converged()).count();
    let (als, direct, rfsg, ls) =
        (solved("ALS"), solved("Nesterov-ALS"), solved("Nesterov-ALS-RF-SG"), solved("Nesterov-ALS-LS"));
    let costs =
        |s: &str| -> BTreeMap<&String, f64> { runs[s].iter().map(|(p, t)| (p, t.total_sweep_equivalents())).collect() };
    let summary = COLLINEAR_SOLVERS
        .iter()
        .map(|s| {
            let c: Vec<f64> =
                runs[*s].values().filter(|t| t.converged()).map(|t| t.total_sweep_equivalents()).collect();
            format!("{s} {}/10 median {:.0}", c.len(), median(c))
        })
        .collect::<Vec<_>>()
        .join("; ");
    println!("      criterion 5 runs: {summary}");

    r.line(
        "5a (direct Nesterov-ALS solves fewer seeds than ALS)",
        direct < als,
        format!("direct {direct}/10, ALS {als}/10"),
        t0,
    );

    let (c_als, c_rf) = (costs("ALS"), costs("Nesterov-ALS-RF-SG"));
    let common: Vec<&String> = runs["ALS"]
        .iter()
        .filter(|(p, t)| t.converged() && runs["Nesterov-ALS-RF-SG"][*p].converged())
        .map(|(p, _)| p)
        .collect();
    let cheaper = common.iter().filter(|p| c_rf[*p] < c_als[*p]).count();
    let med_als = median(common.iter().map(|p| c_als[*p]).collect());
    let med_rf = median(common.iter().map(|p| c_rf[*p]).collect());
    let ok_b = rfsg >= als && med_rf < med_als && cheaper >= 7;
    r.line(
        "5b (RF-SG at least as robust and cheaper than ALS)",
        ok_b,
        format!("RF-SG {rfsg}/10 vs ALS {als}/10; median {med_rf:.0} vs {med_als:.0}; cheaper on {cheaper}/10"),
        t0,
    );

    let missed = runs["ALS"].iter().filter(|(p, t)| t.converged() && !runs["Nesterov-ALS-LS"][*p].converged()).count();
    r.line(
        "5c (LS converges wherever ALS does)",
        missed == 0,
        format!("LS {ls}/10; {missed} seeds solved by ALS but not LS"),
        t0,
    );
    let ok_time = t0.elapsed().as_secs_f64() < 1800.0;
    r.line("5 (runtime)", ok_time, "under 30 minutes".into(), t0);
}

fn criterion_6(r: &mut Report, outcomes: &[RunOutcome]) {
    let t0 = Instant::now();
    let (mut restarts, mut adjacent, mut nonzero_beta, mut no_decrease) = (0, 0, 0, 0);
    for o in outcomes {
        let recs = &o.file.trace.records;
        for (i, rec) in recs.iter().enumerate() {
            if !rec.restarted {
                continue;
            }
            restarts += 1;
            if i > 0 && recs[i - 1].restarted {
                adjacent += 1;
            }
            if rec.beta_used != 0.0 {
                nonzero_beta += 1;
            }
            if let Some(next) = recs.get(i + 1) {
                if next.f > rec.f {
                    no_decrease += 1;
                }
            }
        }
    }
    let ok = restarts > 0 && adjacent == 0 && nonzero_beta == 0 && no_decrease == 0;
    r.line(
        "6 (restart invariants on criterion-5 traces)",
        ok,
        format!("{restarts} restarts; adjacent {adjacent}, nonzero beta {nonzero_beta}, no decrease after forced ALS {no_decrease}"),
        t0,
    );
}

fn criterion_7(r: &mut Report) {
    let t0 = Instant::now();
    let rule = RestartRule::new(RestartKind::Function).scheduled();
    let mut s = SolverState::<f64>::new(FlatIterate(vec![0.0]), FlatIterate(vec![0.0]), 2);
    let mut seq = vec![eta_advance(&rule, &mut s, true)];
    seq.extend((0..6).map(|_| eta_advance(&rule, &mut s, false)));
    let want = [1.25, 1.23, 1.21, 1.19, 1.17, 1.15, 1.15];
    let ok = seq.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12);
    r.line("7 (eta schedule)", ok, format!("{seq:?}"), t0);
}

fn criterion_8(r: &mut Report) {
    let t0 = Instant::now();
    let mut seq = NesterovSequence::<f64>::new();
    let l1 = seq.lambda(1);
    let l2 = seq.lambda(2);
    let b3 = seq.beta(3);
    let ok = l1 == 1.0 && (l2 - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15 && (b3 - 0.2817).abs() <= 1e-4;
    r.line("8 (Nesterov recurrence)", ok, format!("lambda_1 = {l1}, lambda_2 = {l2:.6}, beta_3 = {b3:.6}"), t0);
}

fn criterion_9(r: &mut Report, outcomes: &[RunOutcome]) {
    let t0 = Instant::now();
    // p1: ratios A 1, B 2, C 4; p2: A 2, B 1, C unsolved; p3: A unsolved, B 2, C 1; p4: A 1, B 1, C 10
    let table = CostTable {
        problems: (1..=4).map(|i| format!("p{i}")).collect(),
        solvers: vec!["A".into(), "B".into(), "C".into()],
        costs: vec![
            vec![Some(10.0), Some(20.0), Some(40.0)],
            vec![Some(30.0), Some(15.0), None],
            vec![None, Some(50.0), Some(25.0)],
            vec![Some(8.0), Some(8.0), Some(80.0)],
        ],
    };
    let hand = tau_profile(&table, &[1.0, 2.0, 4.0, 16.0], FailureHandling::CountAsUnsolved).unwrap();
    let want = vec![vec![0.5, 0.75, 0.75, 0.75], vec![0.5, 1.0, 1.0, 1.0], vec![0.25, 0.25, 0.5, 0.75]];
    let hand_ok = hand.fractions == want && hand.solve_rates == vec![0.75, 1.0, 0.75];

    let files: Vec<_> = outcomes.iter().map(|o| o.file.clone()).collect();
    let mono = CostTable::from_traces(&files, Metric::SweepEquivalents)
        .and_then(|t| tau_profile(&t, &default_grid(), FailureHandling::CountAsUnsolved))
        .and_then(|p| p.check().map(|_| p));
    let detail = match &mono {
        Ok(p) => format!(
            "hand table {}; criterion-5 profile monotone, tau=1 fractions {:?}",
            if hand_ok { "exact" } else { "MISMATCH" },
            p.fractions.iter().map(|c| c[0]).collect::<Vec<_>>()
        ),
        Err(e) => format!("criterion-5 profile invalid: {e}"),
    };
    r.line("9 (tau-profile correctness)", hand_ok && mono.is_ok(), detail, t0);
}

fn criterion_10(r: &mut Report) {
    let t0 = Instant::now();
    let suite = standard_suite(10, 2024);
    let rows = [
        (20, 0.9, 3, 0.0, 0.0),
        (20, 0.9, 5, 1.0, 1.0),
        (50, 0.9, 3, 0.0, 0.0),
        (50, 0.9, 5, 1.0, 1.0),
        (100, 0.9, 3, 0.0, 0.0),
        (100, 0.9, 5, 1.0, 1.0),
    ];
    let ok = suite.len() == 60 && suite.iter().enumerate().all(|(i, s)| (s.s, s.c, s.rank, s.l1, s.l2) == rows[i / 10]);
    r.line("10 (standard suite rows)", ok, format!("{} specs in 6 classes", suite.len()), t0);
}

fn criterion_11(r: &mut Report, first: &[RunOutcome]) {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let again = run_plan(&collinear_plan(dir.path())).unwrap();
    let key = |o: &RunOutcome| (o.problem.clone(), o.solver.clone());
    let a: BTreeMap<_, _> = first.iter().map(|o| (key(o), work_checksum(&o.file.trace))).collect();
    let b: BTreeMap<_, _> = again.iter().map(|o| (key(o), work_checksum(&o.file.trace))).collect();
    let same = a.iter().filter(|(k, v)| b.get(*k) == Some(*v)).count();
    // the files on disk must give the same checksums as the in-memory traces
    let reread = first.iter().all(|o| {
        cpnest_harness::TraceFile::read(&o.path).is_ok_and(|f| work_checksum(&f.trace) == work_checksum(&o.file.trace))
    });
    r.line(
        "11 (determinism)",
        same == a.len() && a.len() == b.len() && reread,
        format!(
            "{same}/{} trace checksums identical on rerun; on-disk traces {}",
            a.len(),
            if reread { "match" } else { "DIFFER" }
        ),
        t0,
    );
}

fn main() {
    let mut r = Report { failures: 0 };
    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);

    let t5 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let outcomes = run_plan(&collinear_plan(dir.path())).unwrap();
    criterion_5(&mut r, &outcomes, t5);
    criterion_6(&mut r, &outcomes);
    criterion_7(&mut r);
    criterion_8(&mut r);
    criterion_9(&mut r, &outcomes);
    criterion_10(&mut r);
    criterion_11(&mut r, &outcomes);

    println!("acceptance: {} failing", r.failures);
    if r.failures > 0 {
        std::process::exit(1);
    }
}
