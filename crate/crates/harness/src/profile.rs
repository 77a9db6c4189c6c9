//! Performance profiles: for each solver, the fraction of problems it solved within a
//! factor `τ` of the cheapest converged solver on that problem.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{HarnessError, Result};
use crate::tracefile::TraceFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    WallTime,
    SweepEquivalents,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::WallTime => "wall time [s]",
            Metric::SweepEquivalents => "sweep-equivalents",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" | "wall" | "wall_time" => Ok(Metric::WallTime),
            "work" | "sweeps" | "sweep_equivalents" => Ok(Metric::SweepEquivalents),
            other => Err(HarnessError::Usage(format!("unknown metric {other:?} (use work or time)"))),
        }
    }
}

/// What to do with problems no solver converged on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureHandling {
    /// Keep them in the denominator; every solver counts as failing them.
    CountAsUnsolved,
    /// Drop them from the denominator.
    Exclude,
}

/// Cost of each solver on each problem; `None` when the solver did not converge.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    pub problems: Vec<String>,
    pub solvers: Vec<String>,
    /// `costs[p][s]`
    pub costs: Vec<Vec<Option<f64>>>,
}

impl CostTable {
    /// Groups traces by the `problem` header and the `solver` header (or the trace's
    /// solver name). Repetitions of the same pair keep the smallest converged cost.
    pub fn from_traces(traces: &[TraceFile], metric: Metric) -> Result<Self> {
        if traces.is_empty() {
            return Err(HarnessError::Profile("no traces to profile".into()));
        }
        let mut cells: BTreeMap<(String, String), Option<f64>> = BTreeMap::new();
        let mut solvers = BTreeSet::new();
        for t in traces {
            let solver = t.get("solver").unwrap_or(&t.trace.solver).to_string();
            let problem = t.problem().to_string();
            solvers.insert(solver.clone());
            let cost = t.trace.converged().then(|| match metric {
                Metric::WallTime => t.trace.total_seconds(),
                Metric::SweepEquivalents => t.trace.total_sweep_equivalents(),
            });
            let cell = cells.entry((problem, solver)).or_insert(None);
            if let Some(c) = cost {
                *cell = Some(cell.map_or(c, |old: f64| old.min(c)));
            }
        }
        let solvers: Vec<String> = solvers.into_iter().collect();
        let problems: Vec<String> = cells.keys().map(|(p, _)| p.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let costs = problems
            .iter()
            .map(|p| solvers.iter().map(|s| cells.get(&(p.clone(), s.clone())).copied().flatten()).collect())
            .collect();
        Ok(Self { problems, solvers, costs })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauProfile {
    pub taus: Vec<f64>,
    pub solvers: Vec<String>,
    /// `fractions[s][t]`
    pub fractions: Vec<Vec<f64>>,
    /// Fraction of counted problems each solver converged on (the `τ → ∞` limit).
    pub solve_rates: Vec<f64>,
    pub n_problems: usize,
    pub failure: FailureHandling,
}

/// `n` points from 1 to `tau_max`, evenly spaced in `log τ`.
pub fn geometric_grid(tau_max: f64, n: usize) -> Vec<f64> {
    assert!(tau_max >= 1.0 && n >= 2);
    let step = tau_max.ln() / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| (step * i as f64).exp()).collect();
    g[0] = 1.0;
    g[n - 1] = tau_max;
    g
}

pub fn default_grid() -> Vec<f64> {
    geometric_grid(16.0, 200)
}

pub fn tau_profile(table: &CostTable, taus: &[f64], failure: FailureHandling) -> Result<TauProfile> {
    if table.problems.is_empty() || table.solvers.is_empty() {
        return Err(HarnessError::Profile("empty cost table".into()));
    }
    if taus.is_empty() || taus[0] < 1.0 || taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::Profile("tau grid must be increasing and start at >= 1".into()));
    }
    let ns = table.solvers.len();
    // ratio of each solver to the best converged cost, per counted problem
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); ns];
    let mut n_problems = 0;
    for row in &table.costs {
        let best = row.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        if !best.is_finite() && failure == FailureHandling::Exclude {
            continue;
        }
        n_problems += 1;
        for (s, c) in row.iter().enumerate() {
            let r = match c {
                Some(c) if best > 0.0 => c / best,
                Some(_) => 1.0,
                None => f64::INFINITY,
            };
            ratios[s].push(r);
        }
    }
    if n_problems == 0 {
        return Err(HarnessError::Profile("no problem was solved by any solver".into()));
    }
    let denom = n_problems as f64;
    let fractions: Vec<Vec<f64>> = ratios
        .iter()
        .map(|rs| taus.iter().map(|&t| rs.iter().filter(|&&r| r <= t).count() as f64 / denom).collect())
        .collect();
    let solve_rates: Vec<f64> =
        ratios.iter().map(|rs| rs.iter().filter(|r| r.is_finite()).count() as f64 / denom).collect();
    let profile =
        TauProfile { taus: taus.to_vec(), solvers: table.solvers.clone(), fractions, solve_rates, n_problems, failure };
    profile.check()?;
    Ok(profile)
}

impl TauProfile {
    /// Each curve is non-decreasing, within `[0, 1]`, and bounded by its solve rate.
    pub fn check(&self) -> Result<()> {
        for (s, curve) in self.fractions.iter().enumerate() {
            let rate = self.solve_rates[s];
            if curve.windows(2).any(|w| w[1] < w[0]) {
                return Err(HarnessError::Profile(format!("profile of {} decreases", self.solvers[s])));
            }
            if curve.iter().any(|&f| !(0.0..=1.0).contains(&f) || f > rate) {
                return Err(HarnessError::Profile(format!("profile of {} exceeds its solve rate", self.solvers[s])));
            }
        }
        Ok(())
    }

    /// Columns `tau`, then one per solver. A final `inf` row holds the solve rates.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau");
        for name in &self.solvers {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for (t, &tau) in self.taus.iter().enumerate() {
            write!(s, "{tau:?}").unwrap();
            for curve in &self.fractions {
                write!(s, ",{:?}", curve[t]).unwrap();
            }
            s.push('\n');
        }
        s.push_str("inf");
        for r in &self.solve_rates {
            write!(s, ",{r:?}").unwrap();
        }
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(costs: Vec<Vec<Option<f64>>>) -> CostTable {
        CostTable {
            problems: (0..costs.len()).map(|i| format!("p{i}")).collect(),
            solvers: (0..costs[0].len()).map(|i| format!("s{i}")).collect(),
            costs,
        }
    }

    #[test]
    fn two_solvers_one_problem() {
        let p = tau_profile(&table(vec![vec![Some(10.0), Some(20.0)]]), &[1.0, 2.0], FailureHandling::CountAsUnsolved)
            .unwrap();
        assert_eq!(p.fractions, vec![vec![1.0, 1.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn single_solver_profile_is_its_solve_rate() {
        let t = table(vec![vec![Some(3.0)], vec![None], vec![Some(1.0)], vec![Some(9.0)]]);
        let p = tau_profile(&t, &default_grid(), FailureHandling::CountAsUnsolved).unwrap();
        assert!(p.fractions[0].iter().all(|&f| f == 0.75));
        let p = tau_profile(&t, &default_grid(), FailureHandling::Exclude).unwrap();
        assert!(p.fractions[0].iter().all(|&f| f == 1.0));
    }

    #[test]
    fn grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 200);
        assert_eq!((g[0], g[199]), (1.0, 16.0));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = table(vec![vec![Some(1.0)]]);
        assert!(tau_profile(&t, &[0.5, 1.0], FailureHandling::Exclude).is_err());
        assert!(tau_profile(&t, &[1.0, 1.0], FailureHandling::Exclude).is_err());
        let t = table(vec![vec![None]]);
        assert!(tau_profile(&t, &[1.0], FailureHandling::Exclude).is_err());
        assert!(CostTable::from_traces(&[], Metric::SweepEquivalents).is_err());
    }
}
