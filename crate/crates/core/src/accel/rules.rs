//! Momentum weights, restart tests, the `η` schedule and the stopping test.

use super::config::{EtaMode, MomentumRule, RestartKind, RestartRule};
use super::state::SolverState;
use crate::scalar::Scalar;

/// `β_k` for the current iteration. `SN` is driven by the restart-local index `state.i`.
pub fn momentum_weight<T: Scalar>(rule: &MomentumRule, state: &mut SolverState<T>) -> T {
    match *rule {
        MomentumRule::Nesterov => state.lambda.beta(state.i.max(1)),
        MomentumRule::GradientRatio { skip_duplicates } => {
            let prev = if skip_duplicates { state.last_distinct() } else { state.lookback(1) };
            match prev {
                Some(p) if p.grad_norm > T::zero() => state.current.grad_norm / p.grad_norm,
                _ => T::zero(),
            }
        }
        MomentumRule::Constant(c) => T::lit(c),
    }
}

/// Whether iteration `k` must be discarded. Never fires right after a zero-momentum step,
/// nor while the history is shorter than the delay requires.
pub fn restart_check<T: Scalar>(rule: &RestartRule, state: &SolverState<T>) -> bool {
    if rule.kind == RestartKind::None || state.beta_prev == T::zero() {
        return false;
    }
    let d = rule.delay;
    let eta = state.eta;
    let cur = &state.current;
    match rule.kind {
        RestartKind::None => false,
        RestartKind::Function => state.lookback(d).is_some_and(|old| cur.f > eta * old.f),
        RestartKind::Gradient => state.lookback(d).is_some_and(|old| cur.grad_norm > eta * old.grad_norm),
        RestartKind::Speed => {
            state.history_len() > d && state.lookback(d).is_some_and(|old| cur.delta_x_norm < eta * old.delta_x_norm)
        }
    }
}

/// `η` after a restart (`eta0`) or after one more ordinary step (reduced by the
/// decrement, floored at `eta_min`). Updates `state.eta` and returns it.
pub fn eta_advance<T: Scalar>(rule: &RestartRule, state: &mut SolverState<T>, just_restarted: bool) -> T {
    state.eta = match rule.eta_mode {
        EtaMode::FixedOne => T::one(),
        EtaMode::Scheduled => {
            if just_restarted {
                state.eta_steps = 0;
            } else {
                state.eta_steps += 1;
            }
            scheduled_eta(rule, state.eta_steps)
        }
    };
    state.eta
}

/// `η` used `steps` ordinary iterations after the schedule was reset.
pub fn scheduled_eta<T: Scalar>(rule: &RestartRule, steps: usize) -> T {
    let v = rule.eta0 - steps as f64 * rule.eta_decrement;
    T::lit(v.max(rule.eta_min))
}

/// `η` before any restart has happened.
pub fn initial_eta<T: Scalar>(rule: &RestartRule) -> T {
    match rule.eta_mode {
        EtaMode::FixedOne => T::one(),
        EtaMode::Scheduled => T::lit(rule.eta0),
    }
}

/// `‖∇f‖ / n_X ≤ tol`
pub fn terminated<T: Scalar>(grad_norm: T, tol: T, n_vars: usize) -> bool {
    grad_norm / T::lit(n_vars as f64) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::state::IterateStats;
    use crate::kruskal::FlatIterate;

    fn stats(f: f64, g: f64, dx: f64) -> IterateStats<f64> {
        IterateStats { f, grad_norm: g, delta_x_norm: dx, duplicate: false }
    }

    fn state_with(history: &[IterateStats<f64>], current: IterateStats<f64>) -> SolverState<f64> {
        let x = FlatIterate(vec![0.0; 1]);
        let mut s = SolverState::new(x.clone(), x, 4);
        for h in history {
            s.push_history(*h);
        }
        s.current = current;
        s.beta_prev = 0.5;
        s
    }

    #[test]
    fn nesterov_weights() {
        let x = FlatIterate(vec![0.0; 1]);
        let mut s = SolverState::<f64>::new(x.clone(), x, 2);
        s.i = 1;
        assert_eq!(momentum_weight(&MomentumRule::SN, &mut s), -1.0);
        s.i = 2;
        assert_eq!(momentum_weight(&MomentumRule::SN, &mut s), 0.0);
        s.i = 3;
        let l2 = (1.0 + 5f64.sqrt()) / 2.0;
        let l3 = (1.0 + (1.0 + 4.0 * l2 * l2).sqrt()) / 2.0;
        let b = momentum_weight(&MomentumRule::SN, &mut s);
        assert!((b - (l2 - 1.0) / l3).abs() < 1e-15);
        assert!((b - 0.2817).abs() < 1e-4);
    }

    #[test]
    fn gradient_ratio_weight() {
        let mut s = state_with(&[stats(1.0, 2.0, 0.0)], stats(1.0, 0.5, 0.0));
        assert_eq!(momentum_weight(&MomentumRule::SG, &mut s), 0.25);
        let mut s = state_with(&[stats(1.0, 0.0, 0.0)], stats(1.0, 0.5, 0.0));
        assert_eq!(momentum_weight(&MomentumRule::SG, &mut s), 0.0);
        assert_eq!(momentum_weight(&MomentumRule::S1, &mut s), 1.0);
    }

    #[test]
    fn gradient_ratio_can_skip_duplicates() {
        let mut dup = stats(1.0, 4.0, 0.0);
        dup.duplicate = true;
        let mut s = state_with(&[stats(1.0, 2.0, 0.0), dup], stats(1.0, 1.0, 0.0));
        assert_eq!(momentum_weight(&MomentumRule::SG, &mut s), 0.25);
        let rule = MomentumRule::GradientRatio { skip_duplicates: true };
        assert_eq!(momentum_weight(&rule, &mut s), 0.5);
    }

    #[test]
    fn function_restart() {
        let rule = RestartRule::new(RestartKind::Function);
        assert!(!restart_check(&rule, &state_with(&[stats(10.0, 0.0, 0.0)], stats(9.0, 0.0, 0.0))));
        assert!(restart_check(&rule, &state_with(&[stats(9.0, 0.0, 0.0)], stats(10.0, 0.0, 0.0))));
    }

    #[test]
    fn no_restart_after_zero_momentum_step() {
        let mut s = state_with(&[stats(9.0, 1.0, 1.0)], stats(10.0, 5.0, 0.1));
        s.beta_prev = 0.0;
        for kind in [RestartKind::Function, RestartKind::Gradient, RestartKind::Speed] {
            assert!(!restart_check(&RestartRule::new(kind), &s));
        }
    }

    #[test]
    fn speed_and_gradient_restart() {
        let rx = RestartRule::new(RestartKind::Speed);
        let s = state_with(&[stats(0.0, 0.0, 0.0), stats(0.0, 0.0, 1.0)], stats(0.0, 0.0, 0.5));
        assert!(restart_check(&rx, &s));
        let s = state_with(&[stats(0.0, 0.0, 0.0), stats(0.0, 0.0, 1.0)], stats(0.0, 0.0, 1.5));
        assert!(!restart_check(&rx, &s));
        let rg = RestartRule::new(RestartKind::Gradient);
        assert!(restart_check(&rg, &state_with(&[stats(0.0, 1.0, 0.0)], stats(0.0, 1.5, 0.0))));
    }

    #[test]
    fn delay_needs_enough_history() {
        let rule = RestartRule::new(RestartKind::Function).with_delay(3);
        let s = state_with(&[stats(1.0, 0.0, 0.0), stats(1.0, 0.0, 0.0)], stats(5.0, 0.0, 0.0));
        assert!(!restart_check(&rule, &s));
        let s = state_with(&[stats(1.0, 0.0, 0.0), stats(7.0, 0.0, 0.0), stats(7.0, 0.0, 0.0)], stats(5.0, 0.0, 0.0));
        assert!(restart_check(&rule, &s));
    }

    #[test]
    fn eta_schedule_after_restart() {
        let rule = RestartRule::new(RestartKind::Function).scheduled();
        let x = FlatIterate(vec![0.0; 1]);
        let mut s = SolverState::<f64>::new(x.clone(), x, 2);
        let mut seq = vec![eta_advance(&rule, &mut s, true)];
        for _ in 0..7 {
            seq.push(eta_advance(&rule, &mut s, false));
        }
        let expect = [1.25, 1.23, 1.21, 1.19, 1.17, 1.15, 1.15, 1.15];
        for (a, b) in seq.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{seq:?}");
        }
        let fixed = RestartRule::new(RestartKind::Function);
        assert_eq!(eta_advance(&fixed, &mut s, true), 1.0);
        assert_eq!(eta_advance(&fixed, &mut s, false), 1.0);
        let flat = RestartRule { eta0: 1.2, eta_min: 1.2, ..rule };
        for restarted in [true, false, false] {
            assert_eq!(eta_advance(&flat, &mut s, restarted), 1.2);
        }
    }

    #[test]
    fn termination_arithmetic() {
        assert!(terminated(4.5e-7, 1e-9, 450));
        assert!(!terminated(4.6e-7, 1e-9, 450));
        assert!(terminated(0.0, 0.0, 10));
        assert!(!terminated(1e-300, 0.0, 10));
    }
}
