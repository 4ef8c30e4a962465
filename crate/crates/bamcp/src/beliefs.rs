//! Priors and posteriors over transition dynamics, with exact predictive
//! distributions and eager or lazy model sampling.
//!
//! The predictive distribution is the closed-form integral
//! `P(s'|s,a,h) = ∫ P(s,a,s') P(P|h) dP` for each conjugate family. Model
//! sampling draws one concrete transition model per search simulation
//! (root sampling); the lazy path materializes only the rows a simulation
//! actually visits.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mdp::{ActionId, StateId, TransitionCounts};
use crate::sampling::{beta_draw, dirichlet_cdf, sample_cdf, sample_weights};

/// Bandit state encoding used by [`BeliefModel::BetaBernoulliArms`]: pulls
/// start anywhere, a stochastic arm lands in `BANDIT_WIN` on success and
/// `BANDIT_LOSE` on failure, a known arm returns to `BANDIT_START`.
pub const BANDIT_START: StateId = StateId(0);
pub const BANDIT_WIN: StateId = StateId(1);
pub const BANDIT_LOSE: StateId = StateId(2);
/// Number of states in the bandit encoding.
pub const BANDIT_STATES: usize = 3;

/// Per-arm prior for Bernoulli bandits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmPrior {
    /// Arm with a known, deterministic payout.
    Known(f64),
    /// Bernoulli arm with success probability distributed Beta(alpha, beta).
    Beta { alpha: f64, beta: f64 },
}

/// Prior/posterior over transition dynamics.
///
/// Hyperparameters must be strictly positive. The grid prior has no
/// closed-form predictive; it is sampled through the Markov chain in the
/// [`crate::grid`] module.
#[derive(Debug, Clone, PartialEq)]
pub enum BeliefModel {
    /// Independent symmetric Dirichlet rows over a finite state space.
    SymmetricDirichlet { alpha: f64, num_states: usize },
    /// Sparse Dirichlet-multinomial: observed successors carry mass
    /// `n + alpha`, unobserved successors share `new_state_mass` uniformly.
    SparseDirichlet { alpha: f64, new_state_mass: f64, num_states: usize },
    /// Independent Beta-Bernoulli arms over the bandit state encoding.
    BetaBernoulliArms { arms: Vec<ArmPrior> },
    /// Per-column Beta(alpha1, beta1) and per-row Beta(alpha2, beta2)
    /// latents of the infinite 2D grid.
    StructuredGridPrior { alpha1: f64, beta1: f64, alpha2: f64, beta2: f64 },
}

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("state {state} or action {action} lies outside the belief's domain")]
    DomainMismatch { state: u32, action: u16 },
    #[error("{0} has no finite state space; draw models lazily instead")]
    InfiniteStateSpace(&'static str),
    #[error("operation requires a {expected} belief")]
    WrongVariant { expected: &'static str },
}

impl BeliefModel {
    pub fn symmetric_dirichlet(alpha: f64, num_states: usize) -> Self {
        assert!(alpha > 0.0, "Dirichlet alpha must be positive");
        assert!(num_states > 0);
        BeliefModel::SymmetricDirichlet { alpha, num_states }
    }

    pub fn sparse_dirichlet(alpha: f64, new_state_mass: f64, num_states: usize) -> Self {
        assert!(alpha > 0.0 && new_state_mass > 0.0);
        assert!(num_states > 0);
        BeliefModel::SparseDirichlet { alpha, new_state_mass, num_states }
    }

    pub fn bandit_arms(arms: Vec<ArmPrior>) -> Self {
        assert!(!arms.is_empty());
        for arm in &arms {
            if let ArmPrior::Beta { alpha, beta } = arm {
                assert!(*alpha > 0.0 && *beta > 0.0, "Beta hyperparameters must be positive");
            }
        }
        BeliefModel::BetaBernoulliArms { arms }
    }

    pub fn structured_grid(alpha1: f64, beta1: f64, alpha2: f64, beta2: f64) -> Self {
        assert!(alpha1 > 0.0 && beta1 > 0.0 && alpha2 > 0.0 && beta2 > 0.0);
        BeliefModel::StructuredGridPrior { alpha1, beta1, alpha2, beta2 }
    }

    /// Size of the finite state space, if there is one.
    pub fn num_states(&self) -> Option<usize> {
        match self {
            BeliefModel::SymmetricDirichlet { num_states, .. }
            | BeliefModel::SparseDirichlet { num_states, .. } => Some(*num_states),
            BeliefModel::BetaBernoulliArms { .. } => Some(BANDIT_STATES),
            BeliefModel::StructuredGridPrior { .. } => None,
        }
    }

    fn variant_name(&self) -> &'static str {
        match self {
            BeliefModel::SymmetricDirichlet { .. } => "SymmetricDirichlet",
            BeliefModel::SparseDirichlet { .. } => "SparseDirichlet",
            BeliefModel::BetaBernoulliArms { .. } => "BetaBernoulliArms",
            BeliefModel::StructuredGridPrior { .. } => "StructuredGridPrior",
        }
    }
}

/// Posterior mean of a Beta(alpha, beta) arm: `alpha / (alpha + beta)`.
pub fn beta_predictive(alpha: f64, beta: f64) -> f64 {
    debug_assert!(alpha > 0.0 && beta > 0.0);
    alpha / (alpha + beta)
}

/// Counts seen through an optional simulation-local overlay. BA-UCT keeps
/// its within-simulation pseudo-counts separate from the real history.
#[derive(Clone, Copy)]
pub(crate) struct CountsView<'a> {
    base: &'a TransitionCounts,
    extra: Option<&'a TransitionCounts>,
}

impl<'a> CountsView<'a> {
    pub(crate) fn new(base: &'a TransitionCounts, extra: Option<&'a TransitionCounts>) -> Self {
        Self { base, extra }
    }

    fn count(&self, s: StateId, a: ActionId, succ: StateId) -> u64 {
        self.base.count(s, a, succ) + self.extra.map_or(0, |e| e.count(s, a, succ))
    }

    fn row_total(&self, s: StateId, a: ActionId) -> u64 {
        self.base.row_total(s, a) + self.extra.map_or(0, |e| e.row_total(s, a))
    }

    /// Merged `(successor, count)` pairs in ascending state order.
    fn observed(&self, s: StateId, a: ActionId) -> Vec<(StateId, u64)> {
        let mut merged: Vec<(StateId, u64)> = self
            .base
            .row(s, a)
            .map(|r| r.successors().collect())
            .unwrap_or_default();
        if let Some(extra) = self.extra {
            if let Some(row) = extra.row(s, a) {
                for (succ, n) in row.successors() {
                    match merged.binary_search_by_key(&succ, |&(id, _)| id) {
                        Ok(i) => merged[i].1 += n,
                        Err(i) => merged.insert(i, (succ, n)),
                    }
                }
            }
        }
        merged
    }
}

fn check_domain(num_states: usize, s: StateId, a: ActionId, num_actions: Option<usize>) -> Result<(), BeliefError> {
    let action_bad = num_actions.is_some_and(|n| a.index() >= n);
    if s.index() >= num_states || action_bad {
        return Err(BeliefError::DomainMismatch { state: s.0, action: a.0 });
    }
    Ok(())
}

/// Closed-form Dirichlet-multinomial predictive:
/// `P(s' | s, a) = (n_{s,a,s'} + alpha) / (n_{s,a,.} + |S| * alpha)`.
pub fn dirichlet_predictive(
    prior: &BeliefModel,
    counts: &TransitionCounts,
    s: StateId,
    a: ActionId,
) -> Result<Vec<f64>, BeliefError> {
    let BeliefModel::SymmetricDirichlet { alpha, num_states } = prior else {
        return Err(BeliefError::WrongVariant { expected: "SymmetricDirichlet" });
    };
    check_domain(*num_states, s, a, None)?;
    Ok(dirichlet_predictive_view(*alpha, *num_states, CountsView::new(counts, None), s, a))
}

fn dirichlet_predictive_view(
    alpha: f64,
    num_states: usize,
    view: CountsView<'_>,
    s: StateId,
    a: ActionId,
) -> Vec<f64> {
    let denom = view.row_total(s, a) as f64 + num_states as f64 * alpha;
    let mut probs = vec![alpha / denom; num_states];
    for (succ, n) in view.observed(s, a) {
        probs[succ.index()] = (n as f64 + alpha) / denom;
    }
    probs
}

/// Sparse Dirichlet-multinomial predictive: observed successors carry mass
/// proportional to `n + alpha`; unobserved successors split a total mass
/// proportional to `new_state_mass` uniformly.
pub fn sparse_predictive(
    prior: &BeliefModel,
    counts: &TransitionCounts,
    s: StateId,
    a: ActionId,
) -> Result<Vec<f64>, BeliefError> {
    let BeliefModel::SparseDirichlet { alpha, new_state_mass, num_states } = prior else {
        return Err(BeliefError::WrongVariant { expected: "SparseDirichlet" });
    };
    check_domain(*num_states, s, a, None)?;
    Ok(sparse_predictive_view(*alpha, *new_state_mass, *num_states, CountsView::new(counts, None), s, a))
}

fn sparse_predictive_view(
    alpha: f64,
    new_state_mass: f64,
    num_states: usize,
    view: CountsView<'_>,
    s: StateId,
    a: ActionId,
) -> Vec<f64> {
    let observed = view.observed(s, a);
    let observed_mass: f64 = observed.iter().map(|&(_, n)| n as f64 + alpha).sum();
    let fresh = num_states - observed.len();
    let denom = if fresh > 0 { observed_mass + new_state_mass } else { observed_mass };
    let base = if fresh > 0 { new_state_mass / denom / fresh as f64 } else { 0.0 };
    let mut probs = vec![base; num_states];
    for (succ, n) in observed {
        probs[succ.index()] = (n as f64 + alpha) / denom;
    }
    probs
}

/// Successes/failures of one arm, aggregated over every source state.
fn arm_tallies(view: CountsView<'_>, arm: ActionId) -> (u64, u64) {
    let mut wins = 0;
    let mut losses = 0;
    for s in [BANDIT_START, BANDIT_WIN, BANDIT_LOSE] {
        wins += view.count(s, arm, BANDIT_WIN);
        losses += view.count(s, arm, BANDIT_LOSE);
    }
    (wins, losses)
}

/// Predictive successor distribution for any finite-space belief variant.
pub fn predictive(
    belief: &BeliefModel,
    counts: &TransitionCounts,
    s: StateId,
    a: ActionId,
) -> Result<Vec<f64>, BeliefError> {
    predictive_view(belief, CountsView::new(counts, None), s, a)
}

pub(crate) fn predictive_view(
    belief: &BeliefModel,
    view: CountsView<'_>,
    s: StateId,
    a: ActionId,
) -> Result<Vec<f64>, BeliefError> {
    match belief {
        BeliefModel::SymmetricDirichlet { alpha, num_states } => {
            check_domain(*num_states, s, a, None)?;
            Ok(dirichlet_predictive_view(*alpha, *num_states, view, s, a))
        }
        BeliefModel::SparseDirichlet { alpha, new_state_mass, num_states } => {
            check_domain(*num_states, s, a, None)?;
            Ok(sparse_predictive_view(*alpha, *new_state_mass, *num_states, view, s, a))
        }
        BeliefModel::BetaBernoulliArms { arms } => {
            check_domain(BANDIT_STATES, s, a, Some(arms.len()))?;
            let mut probs = vec![0.0; BANDIT_STATES];
            match arms[a.index()] {
                ArmPrior::Known(_) => probs[BANDIT_START.index()] = 1.0,
                ArmPrior::Beta { alpha, beta } => {
                    let (wins, losses) = arm_tallies(view, a);
                    let p = beta_predictive(alpha + wins as f64, beta + losses as f64);
                    probs[BANDIT_WIN.index()] = p;
                    probs[BANDIT_LOSE.index()] = 1.0 - p;
                }
            }
            Ok(probs)
        }
        BeliefModel::StructuredGridPrior { .. } => {
            Err(BeliefError::InfiniteStateSpace("StructuredGridPrior"))
        }
    }
}

/// One materialized transition row of a sampled model.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RowSample {
    /// Dense cumulative distribution over all states.
    Dense(Vec<f64>),
    /// Sparse draw: cumulative mass over the observed successors, with the
    /// remainder shared uniformly by the unobserved states.
    Stick { observed: Vec<(StateId, f64)>, unobserved: usize },
    /// Bernoulli success probability of one bandit arm.
    ArmP(f64),
    /// Deterministic successor (known bandit arm).
    Fixed(StateId),
}

impl RowSample {
    fn sample<R: Rng + ?Sized>(&self, num_states: usize, rng: &mut R) -> StateId {
        match self {
            RowSample::Dense(cdf) => StateId(sample_cdf(rng, cdf) as u32),
            RowSample::Stick { observed, unobserved } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(succ, p) in observed {
                    acc += p;
                    if u < acc {
                        return succ;
                    }
                }
                debug_assert!(*unobserved > 0);
                // Uniform over the states absent from `observed` (which is
                // sorted): skip past every observed id at or below the pick.
                let mut pick = rng.random_range(0..*unobserved) as u32;
                for &(succ, _) in observed {
                    if succ.0 <= pick {
                        pick += 1;
                    } else {
                        break;
                    }
                }
                debug_assert!((pick as usize) < num_states);
                StateId(pick)
            }
            RowSample::ArmP(p) => {
                if rng.random::<f64>() < *p {
                    BANDIT_WIN
                } else {
                    BANDIT_LOSE
                }
            }
            RowSample::Fixed(s) => *s,
        }
    }

    /// Probability vector over all states (test and audit support).
    pub(crate) fn dense_probs(&self, num_states: usize) -> Vec<f64> {
        match self {
            RowSample::Dense(cdf) => {
                let mut prev = 0.0;
                cdf.iter()
                    .map(|&c| {
                        let p = c - prev;
                        prev = c;
                        p
                    })
                    .collect()
            }
            RowSample::Stick { observed, unobserved } => {
                let total_obs: f64 = observed.iter().map(|&(_, p)| p).sum();
                let fill = if *unobserved > 0 { (1.0 - total_obs) / *unobserved as f64 } else { 0.0 };
                let mut probs = vec![fill; num_states];
                for &(succ, p) in observed {
                    probs[succ.index()] = p;
                }
                probs
            }
            RowSample::ArmP(p) => {
                let mut probs = vec![0.0; num_states];
                probs[BANDIT_WIN.index()] = *p;
                probs[BANDIT_LOSE.index()] = 1.0 - *p;
                probs
            }
            RowSample::Fixed(s) => {
                let mut probs = vec![0.0; num_states];
                probs[s.index()] = 1.0;
                probs
            }
        }
    }
}

/// One transition model drawn at the root of a search simulation.
///
/// Rows are materialized on first use and never resampled within the same
/// simulation (write-once per key). The model owns its random stream so a
/// simulation's draws are insulated from the caller's.
#[derive(Debug, Clone)]
pub struct SampledModel {
    rows: Vec<Option<RowSample>>,
    num_states: usize,
    num_actions: usize,
    /// Bandit rows are keyed by arm alone: the arm's success probability
    /// does not depend on the state the pull was made from.
    per_action_rows: bool,
    rng: ChaCha8Rng,
}

impl SampledModel {
    fn empty(belief: &BeliefModel, num_actions: usize, seed_source: &mut dyn RngCore) -> Result<Self, BeliefError> {
        let num_states = belief
            .num_states()
            .ok_or(BeliefError::InfiniteStateSpace(belief.variant_name()))?;
        let per_action_rows = matches!(belief, BeliefModel::BetaBernoulliArms { .. });
        let slots = if per_action_rows { num_actions } else { num_states * num_actions };
        Ok(Self {
            rows: vec![None; slots],
            num_states,
            num_actions,
            per_action_rows,
            rng: ChaCha8Rng::seed_from_u64(seed_source.next_u64()),
        })
    }

    fn slot(&self, s: StateId, a: ActionId) -> usize {
        if self.per_action_rows {
            a.index()
        } else {
            s.index() * self.num_actions + a.index()
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Whether the row for `(s, a)` has been materialized.
    pub fn row_materialized(&self, s: StateId, a: ActionId) -> bool {
        self.rows[self.slot(s, a)].is_some()
    }

    /// Probabilities of the materialized row, if any.
    pub fn row_probs(&self, s: StateId, a: ActionId) -> Option<Vec<f64>> {
        self.rows[self.slot(s, a)].as_ref().map(|r| r.dense_probs(self.num_states))
    }
}

fn draw_row(
    belief: &BeliefModel,
    view: CountsView<'_>,
    s: StateId,
    a: ActionId,
    rng: &mut ChaCha8Rng,
) -> Result<RowSample, BeliefError> {
    match belief {
        BeliefModel::SymmetricDirichlet { alpha, num_states } => {
            check_domain(*num_states, s, a, None)?;
            let observed = view.observed(s, a);
            let mut lookup = observed.iter().peekable();
            let params = (0..*num_states).map(|i| {
                let mut n = 0u64;
                if let Some(&&(succ, count)) = lookup.peek() {
                    if succ.index() == i {
                        n = count;
                        lookup.next();
                    }
                }
                *alpha + n as f64
            });
            Ok(RowSample::Dense(dirichlet_cdf(rng, params)))
        }
        BeliefModel::SparseDirichlet { alpha, new_state_mass, num_states } => {
            check_domain(*num_states, s, a, None)?;
            let observed = view.observed(s, a);
            let fresh = num_states - observed.len();
            if fresh == 0 {
                let params = observed.iter().map(|&(_, n)| *alpha + n as f64);
                let cdf = dirichlet_cdf(rng, params);
                let mut prev = 0.0;
                let probs = observed
                    .iter()
                    .zip(cdf)
                    .map(|(&(succ, _), c)| {
                        let p = c - prev;
                        prev = c;
                        (succ, p)
                    })
                    .collect();
                return Ok(RowSample::Stick { observed: probs, unobserved: 0 });
            }
            if observed.is_empty() {
                // All mass sits in the fresh bucket: uniform over the space.
                return Ok(RowSample::Stick { observed: Vec::new(), unobserved: fresh });
            }
            let params = observed
                .iter()
                .map(|&(_, n)| *alpha + n as f64)
                .chain(std::iter::once(*new_state_mass));
            let cdf = dirichlet_cdf(rng, params);
            let mut prev = 0.0;
            let probs: Vec<(StateId, f64)> = observed
                .iter()
                .zip(&cdf)
                .map(|(&(succ, _), &c)| {
                    let p = c - prev;
                    prev = c;
                    (succ, p)
                })
                .collect();
            Ok(RowSample::Stick { observed: probs, unobserved: fresh })
        }
        BeliefModel::BetaBernoulliArms { arms } => {
            check_domain(BANDIT_STATES, s, a, Some(arms.len()))?;
            match arms[a.index()] {
                ArmPrior::Known(_) => Ok(RowSample::Fixed(BANDIT_START)),
                ArmPrior::Beta { alpha, beta } => {
                    let (wins, losses) = arm_tallies(view, a);
                    Ok(RowSample::ArmP(beta_draw(rng, alpha + wins as f64, beta + losses as f64)))
                }
            }
        }
        BeliefModel::StructuredGridPrior { .. } => {
            Err(BeliefError::InfiniteStateSpace("StructuredGridPrior"))
        }
    }
}

/// Draw a complete transition model: every `(s, a)` row is materialized
/// up front from the posterior. Fails for beliefs without a finite space.
pub fn sample_model_eager(
    posterior: &BeliefModel,
    counts: &TransitionCounts,
    num_actions: usize,
    rng: &mut dyn RngCore,
) -> Result<SampledModel, BeliefError> {
    let mut model = SampledModel::empty(posterior, num_actions, rng)?;
    let view = CountsView::new(counts, None);
    let slots = model.rows.len();
    for slot in 0..slots {
        let (s, a) = if model.per_action_rows {
            (BANDIT_START, ActionId(slot as u16))
        } else {
            (StateId((slot / num_actions) as u32), ActionId((slot % num_actions) as u16))
        };
        let mut row = draw_row(posterior, view, s, a, &mut model.rng)?;
        // An eager model is a full sample of the dynamics: expand sparse
        // rows to dense tables over the whole state space.
        if let RowSample::Stick { .. } = row {
            let probs = row.dense_probs(model.num_states);
            let mut acc = 0.0;
            let cdf = probs
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect::<Vec<_>>();
            row = RowSample::Dense(cdf);
        }
        model.rows[slot] = Some(row);
    }
    Ok(model)
}

/// Start a lazily-materialized model: rows are drawn on first visit by
/// [`lazy_sample_transition`].
pub fn sample_model_lazy(
    posterior: &BeliefModel,
    num_actions: usize,
    rng: &mut dyn RngCore,
) -> Result<SampledModel, BeliefError> {
    SampledModel::empty(posterior, num_actions, rng)
}

/// Sample a successor from the model's row for `(s, a)`, materializing the
/// row from the posterior on first visit. Subsequent visits within the same
/// simulation reuse the cached draw.
pub fn lazy_sample_transition(
    model: &mut SampledModel,
    posterior: &BeliefModel,
    counts: &TransitionCounts,
    s: StateId,
    a: ActionId,
) -> Result<StateId, BeliefError> {
    let slot = model.slot(s, a);
    if model.rows[slot].is_none() {
        let row = draw_row(posterior, CountsView::new(counts, None), s, a, &mut model.rng)?;
        model.rows[slot] = Some(row);
    }
    let num_states = model.num_states;
    let row = model.rows[slot].as_ref().expect("row just materialized");
    Ok(row.sample(num_states, &mut model.rng))
}

/// Collapsed posterior-predictive successor draw conditioned on the node's
/// full history: the BA-UCT baseline samples this at every tree node.
pub fn ba_uct_node_sample(
    belief: &BeliefModel,
    node_counts: &TransitionCounts,
    s: StateId,
    a: ActionId,
    rng: &mut dyn RngCore,
) -> Result<StateId, BeliefError> {
    let probs = predictive(belief, node_counts, s, a)?;
    Ok(StateId(sample_weights(rng, &probs) as u32))
}

pub(crate) fn sample_predictive_view(
    belief: &BeliefModel,
    view: CountsView<'_>,
    s: StateId,
    a: ActionId,
    rng: &mut dyn RngCore,
) -> Result<StateId, BeliefError> {
    let probs = predictive_view(belief, view, s, a)?;
    Ok(StateId(sample_weights(rng, &probs) as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn s(i: u32) -> StateId {
        StateId(i)
    }

    fn a(i: u16) -> ActionId {
        ActionId(i)
    }

    #[test]
    fn dirichlet_predictive_uniform_without_counts() {
        let prior = BeliefModel::symmetric_dirichlet(1.0 / 9.0, 9);
        let probs = dirichlet_predictive(&prior, &TransitionCounts::new(), s(0), a(0)).unwrap();
        for p in probs {
            assert!((p - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_predictive_single_observation() {
        // One observed (s, a) -> s3 with alpha = 1/9 gives (1 + 1/9) / 2 = 5/9.
        let prior = BeliefModel::symmetric_dirichlet(1.0 / 9.0, 9);
        let mut counts = TransitionCounts::new();
        counts.add(s(0), a(0), s(3));
        let probs = dirichlet_predictive(&prior, &counts, s(0), a(0)).unwrap();
        assert!((probs[3] - 5.0 / 9.0).abs() < 1e-12);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_predictive_matches_sampling_oracle() {
        // Monte-Carlo estimate of the posterior-mean row, checked against
        // the closed form.
        let prior = BeliefModel::symmetric_dirichlet(1.0 / 9.0, 9);
        let mut counts = TransitionCounts::new();
        counts.add(s(0), a(0), s(3));
        let exact = dirichlet_predictive(&prior, &counts, s(0), a(0)).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 100_000;
        let mut mean = vec![0.0; 9];
        for _ in 0..trials {
            let params = (0..9).map(|i| 1.0 / 9.0 + if i == 3 { 1.0 } else { 0.0 });
            let cdf = dirichlet_cdf(&mut rng, params);
            let mut prev = 0.0;
            for (i, c) in cdf.iter().enumerate() {
                mean[i] += (c - prev) / trials as f64;
                prev = *c;
            }
        }
        for (m, e) in mean.iter().zip(&exact) {
            assert!((m - e).abs() < 5e-3, "estimate {m} vs exact {e}");
        }
    }

    #[test]
    fn dirichlet_predictive_rejects_foreign_states() {
        let prior = BeliefModel::symmetric_dirichlet(0.5, 4);
        let err = dirichlet_predictive(&prior, &TransitionCounts::new(), s(4), a(0)).unwrap_err();
        assert!(matches!(err, BeliefError::DomainMismatch { .. }));
    }

    #[test]
    fn sparse_predictive_uniform_without_observations() {
        let prior = BeliefModel::sparse_dirichlet(1.0, 1.0, 25);
        let probs = sparse_predictive(&prior, &TransitionCounts::new(), s(0), a(0)).unwrap();
        for p in probs {
            assert!((p - 1.0 / 25.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_predictive_concentrates_on_observed() {
        // counts {s7: 3}: P(s7) = (3 + 1) / (3 + 1 + 1) = 4/5, the remaining
        // fifth split over the 24 unobserved states.
        let prior = BeliefModel::sparse_dirichlet(1.0, 1.0, 25);
        let mut counts = TransitionCounts::new();
        for _ in 0..3 {
            counts.add(s(0), a(0), s(7));
        }
        let probs = sparse_predictive(&prior, &counts, s(0), a(0)).unwrap();
        assert!((probs[7] - 0.8).abs() < 1e-12);
        for (i, p) in probs.iter().enumerate() {
            if i != 7 {
                assert!((p - 0.2 / 24.0).abs() < 1e-12);
            }
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sparse_predictive_limit_is_point_mass() {
        let prior = BeliefModel::sparse_dirichlet(1.0, 1.0, 25);
        let mut counts = TransitionCounts::new();
        for _ in 0..1_000_000 {
            counts.add(s(0), a(0), s(7));
        }
        let probs = sparse_predictive(&prior, &counts, s(0), a(0)).unwrap();
        assert!((probs[7] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn beta_predictive_values() {
        assert_eq!(beta_predictive(1.0, 1.0), 0.5);
        assert!((beta_predictive(2.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((beta_predictive(17.0, 19.0) - 17.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn eager_model_concentrates_under_heavy_counts() {
        let prior = BeliefModel::symmetric_dirichlet(1.0 / 9.0, 9);
        let mut counts = TransitionCounts::new();
        for _ in 0..1_000_000 {
            counts.add(s(0), a(0), s(4));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let model = sample_model_eager(&prior, &counts, 2, &mut rng).unwrap();
            let probs = model.row_probs(s(0), a(0)).unwrap();
            assert!(probs[4] >= 0.99 && probs[4] <= 1.0, "p = {}", probs[4]);
        }
    }

    #[test]
    fn eager_model_rows_normalized() {
        let prior = BeliefModel::sparse_dirichlet(1.0, 1.0, 6);
        let mut counts = TransitionCounts::new();
        counts.add(s(1), a(0), s(2));
        counts.add(s(1), a(0), s(3));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = sample_model_eager(&prior, &counts, 2, &mut rng).unwrap();
        for state in 0..6 {
            for action in 0..2 {
                let probs = model.row_probs(s(state), a(action)).unwrap();
                assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(probs.iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_models() {
        let prior = BeliefModel::symmetric_dirichlet(0.5, 5);
        let mut counts = TransitionCounts::new();
        counts.add(s(0), a(1), s(2));
        let mut rng1 = ChaCha8Rng::seed_from_u64(77);
        let mut rng2 = ChaCha8Rng::seed_from_u64(77);
        let m1 = sample_model_eager(&prior, &counts, 2, &mut rng1).unwrap();
        let m2 = sample_model_eager(&prior, &counts, 2, &mut rng2).unwrap();
        for state in 0..5 {
            for action in 0..2 {
                assert_eq!(m1.row_probs(s(state), a(action)), m2.row_probs(s(state), a(action)));
            }
        }
    }

    #[test]
    fn eager_rejects_infinite_spaces() {
        let prior = BeliefModel::structured_grid(1.0, 2.0, 2.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = sample_model_eager(&prior, &TransitionCounts::new(), 4, &mut rng).unwrap_err();
        assert!(matches!(err, BeliefError::InfiniteStateSpace(_)));
    }

    #[test]
    fn lazy_rows_are_write_once() {
        let prior = BeliefModel::symmetric_dirichlet(1.0, 4);
        let counts = TransitionCounts::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model = sample_model_lazy(&prior, 2, &mut rng).unwrap();
        assert!(!model.row_materialized(s(0), a(0)));
        lazy_sample_transition(&mut model, &prior, &counts, s(0), a(0)).unwrap();
        let first = model.row_probs(s(0), a(0)).unwrap();
        for _ in 0..10 {
            lazy_sample_transition(&mut model, &prior, &counts, s(0), a(0)).unwrap();
        }
        assert_eq!(model.row_probs(s(0), a(0)).unwrap(), first);
    }

    #[test]
    fn lazy_marginal_matches_predictive() {
        // Over many fresh models, the first draw at (s, a) is distributed
        // like the closed-form predictive.
        let prior = BeliefModel::symmetric_dirichlet(1.0 / 3.0, 3);
        let mut counts = TransitionCounts::new();
        counts.add(s(0), a(0), s(1));
        counts.add(s(0), a(0), s(1));
        counts.add(s(0), a(0), s(2));
        let exact = dirichlet_predictive(&prior, &counts, s(0), a(0)).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let trials = 100_000;
        let mut freq = [0.0f64; 3];
        for _ in 0..trials {
            let mut model = sample_model_lazy(&prior, 1, &mut rng).unwrap();
            let succ = lazy_sample_transition(&mut model, &prior, &counts, s(0), a(0)).unwrap();
            freq[succ.index()] += 1.0 / trials as f64;
        }
        let tv: f64 = freq.iter().zip(&exact).map(|(f, e)| (f - e).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.02, "total variation {tv}");
    }

    #[test]
    fn lazy_and_eager_joint_laws_agree() {
        // Joint distribution of the first 3 transitions on a 3-state MDP,
        // lazy vs eager, two-sample chi-square on the 27 joint outcomes.
        // Critical value: chi2(0.999, df=26) = 54.05.
        let prior = BeliefModel::symmetric_dirichlet(0.5, 3);
        let mut counts = TransitionCounts::new();
        counts.add(s(0), a(0), s(1));
        counts.add(s(1), a(0), s(2));
        counts.add(s(2), a(0), s(2));

        let trials = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut lazy_hits = [0u64; 27];
        let mut eager_hits = [0u64; 27];
        for _ in 0..trials {
            let mut model = sample_model_lazy(&prior, 1, &mut rng).unwrap();
            let mut cell = 0usize;
            let mut cur = s(0);
            for _ in 0..3 {
                cur = lazy_sample_transition(&mut model, &prior, &counts, cur, a(0)).unwrap();
                cell = cell * 3 + cur.index();
            }
            lazy_hits[cell] += 1;
        }
        for _ in 0..trials {
            let mut model = sample_model_eager(&prior, &counts, 1, &mut rng).unwrap();
            let mut cell = 0usize;
            let mut cur = s(0);
            for _ in 0..3 {
                cur = lazy_sample_transition(&mut model, &prior, &counts, cur, a(0)).unwrap();
                cell = cell * 3 + cur.index();
            }
            eager_hits[cell] += 1;
        }

        let mut stat = 0.0;
        for i in 0..27 {
            let pooled = (lazy_hits[i] + eager_hits[i]) as f64 / 2.0;
            if pooled > 0.0 {
                stat += (lazy_hits[i] as f64 - pooled).powi(2) / pooled;
                stat += (eager_hits[i] as f64 - pooled).powi(2) / pooled;
            }
        }
        assert!(stat < 54.05, "chi-square statistic {stat}");
    }

    #[test]
    fn posterior_consistency_under_merge() {
        // Predictive after counts c then c' equals predictive after c + c',
        // exactly: the predictive depends on the counts alone.
        let prior = BeliefModel::sparse_dirichlet(1.0, 1.0, 8);
        let mut c1 = TransitionCounts::new();
        c1.add(s(0), a(0), s(3));
        c1.add(s(0), a(0), s(5));
        let mut c2 = TransitionCounts::new();
        c2.add(s(0), a(0), s(3));

        let mut sequential = c1.clone();
        sequential.merge(&c2);
        let mut merged = TransitionCounts::new();
        merged.merge(&c2);
        merged.merge(&c1);

        let p1 = sparse_predictive(&prior, &sequential, s(0), a(0)).unwrap();
        let p2 = sparse_predictive(&prior, &merged, s(0), a(0)).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn arm_predictive_uses_pooled_tallies() {
        let belief = BeliefModel::bandit_arms(vec![
            ArmPrior::Known(0.5),
            ArmPrior::Beta { alpha: 1.0, beta: 1.0 },
        ]);
        let mut counts = TransitionCounts::new();
        // Wins recorded from two different source states pool together.
        counts.add(BANDIT_START, a(1), BANDIT_WIN);
        counts.add(BANDIT_WIN, a(1), BANDIT_WIN);
        counts.add(BANDIT_WIN, a(1), BANDIT_LOSE);
        let probs = predictive(&belief, &counts, BANDIT_START, a(1)).unwrap();
        // Posterior Beta(1 + 2, 1 + 1): mean 3/5.
        assert!((probs[BANDIT_WIN.index()] - 0.6).abs() < 1e-12);
        assert!((probs[BANDIT_LOSE.index()] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ba_uct_sample_is_uniform_under_symmetric_prior() {
        let prior = BeliefModel::symmetric_dirichlet(1.0, 4);
        let counts = TransitionCounts::new();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut freq = [0u32; 4];
        for _ in 0..40_000 {
            let succ = ba_uct_node_sample(&prior, &counts, s(0), a(0), &mut rng).unwrap();
            freq[succ.index()] += 1;
        }
        for f in freq {
            assert!((f as f64 / 40_000.0 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn ba_uct_marginal_matches_predictive() {
        let prior = BeliefModel::symmetric_dirichlet(1.0 / 4.0, 4);
        let mut counts = TransitionCounts::new();
        counts.add(s(0), a(0), s(2));
        counts.add(s(0), a(0), s(2));
        counts.add(s(0), a(0), s(1));
        let exact = dirichlet_predictive(&prior, &counts, s(0), a(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(87);
        let trials = 100_000;
        let mut freq = [0.0f64; 4];
        for _ in 0..trials {
            let succ = ba_uct_node_sample(&prior, &counts, s(0), a(0), &mut rng).unwrap();
            freq[succ.index()] += 1.0 / trials as f64;
        }
        let tv: f64 = freq.iter().zip(&exact).map(|(f, e)| (f - e).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.02, "total variation {tv}");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arbitrary_counts(num_states: u32) -> impl Strategy<Value = TransitionCounts> {
            prop::collection::vec((0..num_states, 0..2u16, 0..num_states, 1..20u64), 0..12).prop_map(
                move |entries| {
                    let mut counts = TransitionCounts::new();
                    for (src, act, succ, n) in entries {
                        for _ in 0..n {
                            counts.add(StateId(src), ActionId(act), StateId(succ));
                        }
                    }
                    counts
                },
            )
        }

        proptest! {
            #[test]
            fn predictives_are_normalized_distributions(
                counts in arbitrary_counts(9),
                alpha in 1e-3f64..5.0,
                mass in 1e-3f64..5.0,
                src in 0..9u32,
                act in 0..2u16,
            ) {
                let beliefs = [
                    BeliefModel::symmetric_dirichlet(alpha, 9),
                    BeliefModel::sparse_dirichlet(alpha, mass, 9),
                ];
                for belief in beliefs {
                    let probs = predictive(&belief, &counts, StateId(src), ActionId(act)).unwrap();
                    prop_assert!(probs.iter().all(|&p| p >= 0.0));
                    prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }

            #[test]
            fn counts_total_matches_history_length(
                walk in prop::collection::vec((0..2u16, 0..5u32), 0..40)
            ) {
                let mut h = crate::mdp::History::new(StateId(0));
                for (act, succ) in &walk {
                    h.record(ActionId(*act), StateId(*succ));
                }
                let counts = crate::mdp::counts_from_history(&h);
                prop_assert_eq!(counts.total(), walk.len() as u64);
            }
        }
    }
}
