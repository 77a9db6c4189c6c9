use std::collections::VecDeque;

use crate::kruskal::FlatIterate;
use crate::scalar::Scalar;

/// Statistics of one recorded iterate, as they appear in the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateStats<T> {
    pub f: T,
    pub grad_norm: T,
    /// `‖x_k − x_{k−1}‖`
    pub delta_x_norm: T,
    /// The iterate is a copy of its predecessor after a restart.
    pub duplicate: bool,
}

/// Nesterov's `λ` sequence, `λ_0 = 0`, `λ_i = (1 + √(1 + 4λ_{i−1}²)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NesterovSequence<T> {
    index: usize,
    lambda_prev: T,
    lambda: T,
}

impl<T: Scalar> Default for NesterovSequence<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> NesterovSequence<T> {
    pub fn new() -> Self {
        // λ_{-1} is never read: β is only formed for i ≥ 1.
        Self { index: 0, lambda_prev: T::zero(), lambda: T::zero() }
    }

    /// `λ_i`, advancing (or restarting) the recurrence as needed.
    pub fn lambda(&mut self, i: usize) -> T {
        if i < self.index {
            *self = Self::new();
        }
        while self.index < i {
            let next = (T::one() + (T::one() + T::lit(4.0) * self.lambda * self.lambda).sqrt()) / T::lit(2.0);
            self.lambda_prev = self.lambda;
            self.lambda = next;
            self.index += 1;
        }
        self.lambda
    }

    /// `β_i = (λ_{i−1} − 1) / λ_i` for `i ≥ 1`.
    pub fn beta(&mut self, i: usize) -> T {
        assert!(i >= 1, "the Nesterov weight is defined for i >= 1");
        let lam = self.lambda(i);
        (self.lambda_prev - T::one()) / lam
    }
}

/// Mutable state of the Nesterov-ALS iteration.
#[derive(Debug, Clone)]
pub struct SolverState<T> {
    pub x_curr: FlatIterate<T>,
    pub x_prev: FlatIterate<T>,
    /// Global iteration index.
    pub k: usize,
    /// Iterations since the last restart.
    pub i: usize,
    pub beta_prev: T,
    /// `η` used by the restart test of the current iteration.
    pub eta: T,
    /// Iterations since the `η` schedule was last reset.
    pub eta_steps: usize,
    /// Statistics of `x_k`, not yet pushed to the history.
    pub current: IterateStats<T>,
    pub lambda: NesterovSequence<T>,
    history: VecDeque<IterateStats<T>>,
    depth: usize,
}

impl<T: Scalar> SolverState<T> {
    /// `depth` is the number of past records to keep (at least `d + 1`).
    pub fn new(x_prev: FlatIterate<T>, x_curr: FlatIterate<T>, depth: usize) -> Self {
        let zero_stats = IterateStats { f: T::zero(), grad_norm: T::zero(), delta_x_norm: T::zero(), duplicate: false };
        Self {
            x_curr,
            x_prev,
            k: 1,
            i: 1,
            beta_prev: T::zero(),
            eta: T::one(),
            eta_steps: 0,
            current: zero_stats,
            lambda: NesterovSequence::new(),
            history: VecDeque::with_capacity(depth.max(1)),
            depth: depth.max(1),
        }
    }

    /// Appends a record to the bounded history (most recent last).
    pub fn push_history(&mut self, stats: IterateStats<T>) {
        if self.history.len() == self.depth {
            self.history.pop_front();
        }
        self.history.push_back(stats);
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// The record `back` iterations before the current one (`back = 1` is `x_{k−1}`).
    pub fn lookback(&self, back: usize) -> Option<&IterateStats<T>> {
        if back == 0 || back > self.history.len() {
            return None;
        }
        self.history.get(self.history.len() - back)
    }

    /// Most recent record that is not a restart duplicate.
    pub fn last_distinct(&self) -> Option<&IterateStats<T>> {
        self.history.iter().rev().find(|s| !s.duplicate)
    }
}
