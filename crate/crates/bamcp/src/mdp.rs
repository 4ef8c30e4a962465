//! Core MDP/BAMDP vocabulary: states, actions, histories, transition counts,
//! discounting.
//!
//! The planner operates on an augmented state `<s, h>` where `h` is the
//! history of real transitions observed so far. Histories are stored as flat
//! arrays; search-tree nodes never copy them (a node's history is implied by
//! its path from the root).

use std::collections::BTreeMap;

/// Opaque state index, stable within one environment instance.
///
/// Finite domains number their states densely from 0. Unbounded domains
/// (the infinite grid) intern coordinates through a table owned by the
/// environment; interning is injective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Action index in `[0, |A|)` for the owning environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u16);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// History `h_t = s_1 a_1 s_2 a_2 ... s_t`: the ordered transitions executed
/// in the real environment, plus the current state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    /// `(state, action)` pairs in execution order. The successor of
    /// `steps[i]` is `steps[i + 1].0`, or `current` for the last entry.
    steps: Vec<(StateId, ActionId)>,
    current: StateId,
}

impl History {
    pub fn new(start: StateId) -> Self {
        Self { steps: Vec::new(), current: start }
    }

    /// Record one executed transition: the action taken from the current
    /// state and the successor it produced.
    pub fn record(&mut self, action: ActionId, successor: StateId) {
        self.steps.push((self.current, action));
        self.current = successor;
    }

    pub fn current(&self) -> StateId {
        self.current
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Iterate `(s, a, s')` triples in execution order.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, ActionId, StateId)> + '_ {
        self.steps.iter().enumerate().map(move |(i, &(s, a))| {
            let succ = self.steps.get(i + 1).map(|&(s2, _)| s2).unwrap_or(self.current);
            (s, a, succ)
        })
    }
}

/// Unordered transition counts: the sufficient statistic of a history for
/// conjugate belief models.
///
/// Rows are keyed by `(state, action)`; within a row, successor counts are
/// kept in a sorted map so that iteration order (and hence any sampling that
/// consumes the row) is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    rows: BTreeMap<(StateId, ActionId), CountRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountRow {
    total: u64,
    by_successor: BTreeMap<StateId, u64>,
}

impl CountRow {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, successor: StateId) -> u64 {
        self.by_successor.get(&successor).copied().unwrap_or(0)
    }

    /// Observed successors with their counts, in ascending state order.
    pub fn successors(&self) -> impl Iterator<Item = (StateId, u64)> + '_ {
        self.by_successor.iter().map(|(&s, &n)| (s, n))
    }

    pub fn distinct(&self) -> usize {
        self.by_successor.len()
    }
}

impl TransitionCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, s: StateId, a: ActionId, successor: StateId) {
        let row = self.rows.entry((s, a)).or_default();
        row.total += 1;
        *row.by_successor.entry(successor).or_insert(0) += 1;
    }

    pub fn row(&self, s: StateId, a: ActionId) -> Option<&CountRow> {
        self.rows.get(&(s, a))
    }

    pub fn count(&self, s: StateId, a: ActionId, successor: StateId) -> u64 {
        self.row(s, a).map(|r| r.count(successor)).unwrap_or(0)
    }

    pub fn row_total(&self, s: StateId, a: ActionId) -> u64 {
        self.row(s, a).map(|r| r.total()).unwrap_or(0)
    }

    /// Total number of recorded transitions.
    pub fn total(&self) -> u64 {
        self.rows.values().map(|r| r.total).sum()
    }

    /// Merge another count table into this one.
    pub fn merge(&mut self, other: &TransitionCounts) {
        for (&(s, a), row) in &other.rows {
            for (&succ, &n) in &row.by_successor {
                let dst = self.rows.entry((s, a)).or_default();
                dst.total += n;
                *dst.by_successor.entry(succ).or_insert(0) += n;
            }
        }
    }
}

/// Tally each `(s, a, s')` triple of a history once per occurrence.
pub fn counts_from_history(history: &History) -> TransitionCounts {
    let mut counts = TransitionCounts::new();
    for (s, a, succ) in history.transitions() {
        counts.add(s, a, succ);
    }
    counts
}

/// Known reward function over `(s, a, s')` triples, dense over a finite
/// space. Only the dynamics are uncertain in this formulation; rewards are
/// part of the problem statement.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
    rmax: f64,
}

impl RewardTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions * num_states],
            rmax: 0.0,
        }
    }

    pub fn set(&mut self, s: StateId, a: ActionId, successor: StateId, reward: f64) {
        let idx = self.index(s, a, successor);
        self.values[idx] = reward;
        self.rmax = self.rmax.max(reward.abs());
    }

    #[inline]
    pub fn get(&self, s: StateId, a: ActionId, successor: StateId) -> f64 {
        self.values[self.index(s, a, successor)]
    }

    #[inline]
    fn index(&self, s: StateId, a: ActionId, successor: StateId) -> usize {
        debug_assert!(s.index() < self.num_states && successor.index() < self.num_states);
        debug_assert!(a.index() < self.num_actions);
        (s.index() * self.num_actions + a.index()) * self.num_states + successor.index()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Largest absolute reward entered so far.
    pub fn rmax(&self) -> f64 {
        self.rmax
    }
}

/// Discounting parameters: `gamma`, the reward bound `rmax`, and the
/// numerical precision `epsilon` that truncates simulated returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountSpec {
    pub gamma: f64,
    pub rmax: f64,
    pub epsilon: f64,
}

/// Default numerical precision: depth ~90 at `gamma = 0.95`, `rmax = 1`,
/// comfortably deeper than any benchmark's solution length.
pub const DEFAULT_EPSILON: f64 = 0.01;

impl DiscountSpec {
    pub fn new(gamma: f64, rmax: f64, epsilon: f64) -> Self {
        assert!((0.0..1.0).contains(&gamma), "gamma must lie in [0, 1)");
        assert!(rmax > 0.0, "rmax must be positive");
        assert!(epsilon > 0.0 && epsilon < rmax, "epsilon must lie in (0, rmax)");
        Self { gamma, rmax, epsilon }
    }

    pub fn with_default_epsilon(gamma: f64, rmax: f64) -> Self {
        Self::new(gamma, rmax, DEFAULT_EPSILON)
    }
}

/// Discounted return `sum_k gamma^k r_k`.
///
/// Evaluated backwards (Horner form), so the recursion
/// `R = r_0 + gamma * R_tail` holds exactly in floating point.
pub fn discounted_return(rewards: &[f64], spec: &DiscountSpec) -> f64 {
    rewards
        .iter()
        .rev()
        .fold(0.0, |tail, &r| r + spec.gamma * tail)
}

/// Smallest depth `d` with `gamma^d * rmax < epsilon`: the horizon beyond
/// which simulated rewards fall below the numerical precision.
pub fn max_depth(spec: &DiscountSpec) -> u32 {
    if spec.epsilon >= spec.rmax {
        return 0;
    }
    if spec.gamma == 0.0 {
        return 1;
    }
    // Closed-form guess, then nudge to satisfy the defining inequalities
    // exactly despite rounding.
    let guess = ((spec.epsilon / spec.rmax).ln() / spec.gamma.ln()).ceil();
    let mut d = guess.max(1.0) as u32;
    while d > 1 && spec.gamma.powi(d as i32 - 1) * spec.rmax < spec.epsilon {
        d -= 1;
    }
    while spec.gamma.powi(d as i32) * spec.rmax >= spec.epsilon {
        d += 1;
    }
    d
}
