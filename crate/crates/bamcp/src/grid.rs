//! Posterior inference for the infinite 2D grid: a Metropolis-Hastings
//! chain over the per-column parameters `p_i` and per-row parameters `q_j`,
//! plus lazily materialized grid samples for the planner.
//!
//! Cell `(i, j)` pays reward 1 with probability `p_i * q_j`. Observing
//! rewards couples rows and columns non-conjugately, so the posterior is
//! sampled: each proposal refreshes the parameters of one observed
//! row/column pair from data-informed Beta distributions, and all
//! parameters not linked to observations are drawn from the prior on
//! demand (they cancel from the acceptance ratio).

use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use crate::sampling::beta_draw;

/// Beta hyperparameters of the structured grid prior: columns carry
/// `p_i ~ Beta(alpha1, beta1)`, rows carry `q_j ~ Beta(alpha2, beta2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPrior {
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

impl GridPrior {
    pub fn new(alpha1: f64, beta1: f64, alpha2: f64, beta2: f64) -> Self {
        assert!(
            alpha1 > 0.0 && beta1 > 0.0 && alpha2 > 0.0 && beta2 > 0.0,
            "Beta hyperparameters must be positive"
        );
        Self { alpha1, beta1, alpha2, beta2 }
    }

    /// Swap the row and column hyperparameters (the misspecified-prior
    /// benchmark variant).
    pub fn swapped(self) -> Self {
        Self { alpha1: self.alpha2, beta1: self.beta2, alpha2: self.alpha1, beta2: self.beta1 }
    }
}

/// Observed reward values keyed by cell `(column i, row j)`, one entry per
/// visited cell. Sorted storage keeps every data-dependent draw
/// deterministic under a fixed seed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GridObservations {
    entries: BTreeMap<(i64, i64), u8>,
}

impl GridObservations {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record the reward seen on first visit; later visits are ignored.
    pub fn record(&mut self, col: i64, row: i64, reward: u8) {
        debug_assert!(reward <= 1);
        self.entries.entry((col, row)).or_insert(reward);
    }

    pub fn get(&self, col: i64, row: i64) -> Option<u8> {
        self.entries.get(&(col, row)).copied()
    }

    pub fn contains(&self, col: i64, row: i64) -> bool {
        self.entries.contains_key(&(col, row))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), u8)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }
}

/// Current parameters of the chain: one entry per row/column linked to an
/// observation, all inside the open interval (0, 1).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridChainState {
    p: BTreeMap<i64, f64>,
    q: BTreeMap<i64, f64>,
}

impl GridChainState {
    pub fn p(&self, col: i64) -> Option<f64> {
        self.p.get(&col).copied()
    }

    pub fn q(&self, row: i64) -> Option<f64> {
        self.q.get(&row).copied()
    }
}

/// Effective proposal counts are capped so heavily observed rows/columns do
/// not collapse the proposal onto a point.
pub const PROPOSAL_COUNT_CAP: f64 = 50.0;

const PARAM_FLOOR: f64 = 1e-12;

fn clamp_param(x: f64) -> f64 {
    x.clamp(PARAM_FLOOR, 1.0 - PARAM_FLOOR)
}

/// One Metropolis-Hastings proposal: fresh parameters for the column and
/// row of a uniformly chosen observed cell, with the Beta exponents that
/// defined the proposal densities.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub col: i64,
    pub row: i64,
    pub p_new: f64,
    pub q_new: f64,
    /// Reward/failure exponents of the column proposal (failures damped by
    /// the row prior's mean failure rate, then capped).
    pub m1: f64,
    pub n1: f64,
    /// Reward/failure exponents of the row proposal.
    pub m2: f64,
    pub n2: f64,
}

/// Data-informed exponents for cell `(col, row)`: sums of observed rewards
/// and damped failures along the column and the row.
fn proposal_exponents(obs: &GridObservations, prior: &GridPrior, col: i64, row: i64) -> (f64, f64, f64, f64) {
    let mut col_rewards = 0.0;
    let mut col_failures = 0.0;
    let mut row_rewards = 0.0;
    let mut row_failures = 0.0;
    for ((i, j), r) in obs.iter() {
        if i == col {
            col_rewards += r as f64;
            col_failures += 1.0 - r as f64;
        }
        if j == row {
            row_rewards += r as f64;
            row_failures += 1.0 - r as f64;
        }
    }
    // Failures on a column may stem from a weak row parameter (and vice
    // versa): damp them by the other factor's prior mean failure rate.
    let col_damp = 1.0 - prior.beta2 / (2.0 * (prior.alpha2 + prior.beta2));
    let row_damp = 1.0 - prior.beta1 / (2.0 * (prior.alpha1 + prior.beta1));
    let m1 = col_rewards.min(PROPOSAL_COUNT_CAP);
    let n1 = (col_damp * col_failures).min(PROPOSAL_COUNT_CAP);
    let m2 = row_rewards.min(PROPOSAL_COUNT_CAP);
    let n2 = (row_damp * row_failures).min(PROPOSAL_COUNT_CAP);
    (m1, n1, m2, n2)
}

/// Draw a proposal: pick an observed cell uniformly, then refresh its
/// column and row parameters from Beta(prior + damped counts). Parameters
/// of other linked rows/columns are carried over unchanged.
pub fn mh_propose(
    state: &GridChainState,
    obs: &GridObservations,
    prior: &GridPrior,
    rng: &mut dyn RngCore,
) -> Proposal {
    assert!(!obs.is_empty(), "proposals need at least one observation");
    let _ = state;
    let pick = rng.random_range(0..obs.len());
    let ((col, row), _) = obs.iter().nth(pick).expect("index within observation count");
    let (m1, n1, m2, n2) = proposal_exponents(obs, prior, col, row);
    let p_new = clamp_param(beta_draw(rng, prior.alpha1 + m1, prior.beta1 + n1));
    let q_new = clamp_param(beta_draw(rng, prior.alpha2 + m2, prior.beta2 + n2));
    Proposal { col, row, p_new, q_new, m1, n1, m2, n2 }
}

/// The raw ratio `A'`: prior x proposal x likelihood, restricted to the
/// cells sharing the proposal's column or row. Computed in log space.
pub fn acceptance_ratio(
    state: &GridChainState,
    proposal: &Proposal,
    obs: &GridObservations,
    _prior: &GridPrior,
) -> f64 {
    let p_cur = state.p(proposal.col).expect("column parameter linked before proposing");
    let q_cur = state.q(proposal.row).expect("row parameter linked before proposing");
    let p_new = proposal.p_new;
    let q_new = proposal.q_new;

    // Prior and proposal terms collapse to current^(m,n) / proposed^(m,n).
    let mut log_ratio = proposal.m1 * (p_cur.ln() - p_new.ln())
        + proposal.n1 * ((1.0 - p_cur).ln() - (1.0 - p_new).ln())
        + proposal.m2 * (q_cur.ln() - q_new.ln())
        + proposal.n2 * ((1.0 - q_cur).ln() - (1.0 - q_new).ln());

    // Likelihood ratio over the affected cells only.
    for ((i, j), r) in obs.iter() {
        if i != proposal.col && j != proposal.row {
            continue;
        }
        let p_old_i = state.p(i).expect("linked column parameter");
        let q_old_j = state.q(j).expect("linked row parameter");
        let p_prop = if i == proposal.col { p_new } else { p_old_i };
        let q_prop = if j == proposal.row { q_new } else { q_old_j };
        let (old, new) = (p_old_i * q_old_j, p_prop * q_prop);
        if r == 1 {
            log_ratio += new.ln() - old.ln();
        } else {
            log_ratio += (1.0 - new).ln() - (1.0 - old).ln();
        }
    }
    log_ratio.exp()
}

/// Acceptance probability `A = min(1, A')`.
pub fn mh_acceptance(
    state: &GridChainState,
    proposal: &Proposal,
    obs: &GridObservations,
    prior: &GridPrior,
) -> f64 {
    acceptance_ratio(state, proposal, obs, prior).min(1.0)
}

fn apply_proposal(state: &GridChainState, proposal: &Proposal) -> GridChainState {
    let mut next = state.clone();
    next.p.insert(proposal.col, proposal.p_new);
    next.q.insert(proposal.row, proposal.q_new);
    next
}

/// One chain step: propose, accept with probability `A`, otherwise keep the
/// last accepted state unchanged.
pub fn mh_step(
    state: &GridChainState,
    obs: &GridObservations,
    prior: &GridPrior,
    rng: &mut dyn RngCore,
) -> GridChainState {
    if obs.is_empty() {
        // Nothing is linked to data; every parameter is a lazy prior draw.
        return state.clone();
    }
    let proposal = mh_propose(state, obs, prior, rng);
    let a = mh_acceptance(state, &proposal, obs, prior);
    if rng.random::<f64>() < a {
        apply_proposal(state, &proposal)
    } else {
        state.clone()
    }
}

/// Persistent chain, warm-started across environment steps. Fresh
/// observations link their row/column parameters with prior draws; the
/// caller advances the chain a burn length before taking samples.
#[derive(Debug, Clone)]
pub struct GridChain {
    state: GridChainState,
    prior: GridPrior,
    accepted: u64,
    proposed: u64,
}

impl GridChain {
    pub fn new(prior: GridPrior) -> Self {
        Self { state: GridChainState::default(), prior, accepted: 0, proposed: 0 }
    }

    pub fn state(&self) -> &GridChainState {
        &self.state
    }

    pub fn prior(&self) -> &GridPrior {
        &self.prior
    }

    /// Fraction of proposals accepted so far.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return 1.0;
        }
        self.accepted as f64 / self.proposed as f64
    }

    /// Draw prior parameters for rows/columns that gained observations
    /// since the last call.
    pub fn link_observations(&mut self, obs: &GridObservations, rng: &mut dyn RngCore) {
        for ((col, row), _) in obs.iter() {
            if !self.state.p.contains_key(&col) {
                let draw = clamp_param(beta_draw(rng, self.prior.alpha1, self.prior.beta1));
                self.state.p.insert(col, draw);
            }
            if !self.state.q.contains_key(&row) {
                let draw = clamp_param(beta_draw(rng, self.prior.alpha2, self.prior.beta2));
                self.state.q.insert(row, draw);
            }
        }
    }

    /// Advance the chain `steps` proposals.
    pub fn advance(&mut self, obs: &GridObservations, steps: u32, rng: &mut dyn RngCore) {
        if obs.is_empty() {
            return;
        }
        for _ in 0..steps {
            let proposal = mh_propose(&self.state, obs, &self.prior, rng);
            let a = mh_acceptance(&self.state, &proposal, obs, &self.prior);
            self.proposed += 1;
            if rng.random::<f64>() < a {
                self.state = apply_proposal(&self.state, &proposal);
                self.accepted += 1;
            }
        }
    }
}

/// One sampled grid: a snapshot of the chain parameters plus lazily
/// materialized parameters and cell rewards. Observed cells keep their
/// recorded values; everything else is drawn at most once per sample.
#[derive(Debug, Clone)]
pub struct GridSample {
    p: BTreeMap<i64, f64>,
    q: BTreeMap<i64, f64>,
    cells: BTreeMap<(i64, i64), u8>,
    prior: GridPrior,
}

impl GridSample {
    pub fn from_chain(state: &GridChainState, obs: &GridObservations, prior: GridPrior) -> Self {
        let cells = obs.iter().collect();
        Self { p: state.p.clone(), q: state.q.clone(), cells, prior }
    }

    /// Sample with explicitly pinned parameters (tests).
    pub fn with_params(p: BTreeMap<i64, f64>, q: BTreeMap<i64, f64>, prior: GridPrior) -> Self {
        Self { p, q, cells: BTreeMap::new(), prior }
    }

    pub fn cell_materialized(&self, col: i64, row: i64) -> bool {
        self.cells.contains_key(&(col, row))
    }

    pub fn param_p(&self, col: i64) -> Option<f64> {
        self.p.get(&col).copied()
    }

    pub fn param_q(&self, row: i64) -> Option<f64> {
        self.q.get(&row).copied()
    }
}

/// Reward value of cell `(col, row)` under this sample: the observation if
/// recorded, otherwise a Bernoulli(p_i * q_j) draw cached within the
/// sample, materializing missing parameters from the prior.
pub fn lazy_grid_cell(sample: &mut GridSample, col: i64, row: i64, rng: &mut dyn RngCore) -> u8 {
    if let Some(&r) = sample.cells.get(&(col, row)) {
        return r;
    }
    let prior = sample.prior;
    let p = *sample
        .p
        .entry(col)
        .or_insert_with(|| clamp_param(beta_draw(rng, prior.alpha1, prior.beta1)));
    let q = *sample
        .q
        .entry(row)
        .or_insert_with(|| clamp_param(beta_draw(rng, prior.alpha2, prior.beta2)));
    let reward = (rng.random::<f64>() < p * q) as u8;
    sample.cells.insert((col, row), reward);
    reward
}
