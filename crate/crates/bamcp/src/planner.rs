//! Monte-Carlo tree search over the Bayes-adaptive MDP.
//!
//! Each search simulation draws one transition model from the current
//! posterior at the root (eagerly or lazily) and follows the UCT policy
//! through the tree with that model, so beliefs never need updating inside
//! the tree. The BA-UCT baseline instead samples every in-tree successor
//! from the posterior predictive conditioned on the node's history.
//!
//! Trees are keyed by `<s, h>` implicitly: a node's history is the root
//! history plus its path, so children are stored per (action, successor).
//! The tree is discarded after every real environment step.

use std::collections::HashMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::beliefs::{
    lazy_sample_transition, sample_model_eager, sample_model_lazy, sample_predictive_view,
    BeliefModel, CountsView, SampledModel,
};
use crate::mdp::{max_depth, ActionId, DiscountSpec, RewardTable, StateId, TransitionCounts};

/// Search algorithm variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Root sampling: one model per simulation, drawn at the root.
    Bamcp,
    /// Vanilla UCT on the BAMDP: posterior-predictive sampling at every
    /// node, with collapsed pseudo-counts along the simulated path.
    BaUct,
}

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    /// UCT exploration constant `c`.
    pub exploration_c: f64,
    pub num_simulations: u32,
    pub discount: DiscountSpec,
    /// Epsilon of the epsilon-greedy rollout policy.
    pub rollout_epsilon: f64,
    /// Draw transition rows on demand instead of materializing whole models.
    pub lazy_sampling: bool,
    pub mode: SearchMode,
    /// Record every return backed through each edge (test support; costs
    /// memory proportional to the number of simulations).
    pub audit_returns: bool,
}

impl PlannerConfig {
    /// Defaults used throughout the benchmarks: `c = 3`, epsilon-greedy 0.5,
    /// lazy root sampling.
    pub fn new(num_simulations: u32, discount: DiscountSpec) -> Self {
        Self {
            exploration_c: 3.0,
            num_simulations,
            discount,
            rollout_epsilon: 0.5,
            lazy_sampling: true,
            mode: SearchMode::Bamcp,
            audit_returns: false,
        }
    }

    fn validate(&self) -> Result<(), PlannerError> {
        if self.num_simulations == 0 {
            return Err(PlannerError::ZeroSimulations);
        }
        if !(self.exploration_c.is_finite() && self.exploration_c >= 0.0) {
            return Err(PlannerError::InvalidConfig("exploration_c must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.rollout_epsilon) {
            return Err(PlannerError::InvalidConfig("rollout_epsilon must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("search needs at least one simulation to produce an estimate")]
    ZeroSimulations,
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("root state {0} lies outside the model's state space")]
    RootOutOfRange(u32),
}

/// Epsilon-greedy rollout policy over a model-free Q table learned from
/// real transitions only.
///
/// The table is dense over interned states and defaults to zero for pairs
/// never updated, so fresh states fall back to uniform action choice.
#[derive(Debug, Clone)]
pub struct RolloutPolicy {
    q: Vec<f64>,
    num_actions: usize,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl RolloutPolicy {
    pub fn new(num_actions: usize, epsilon: f64) -> Self {
        assert!(num_actions > 0);
        assert!((0.0..=1.0).contains(&epsilon));
        Self { q: Vec::new(), num_actions, epsilon, learning_rate: 0.1 }
    }

    pub fn with_learning_rate(mut self, eta: f64) -> Self {
        assert!(eta > 0.0 && eta <= 1.0);
        self.learning_rate = eta;
        self
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn q_value(&self, s: StateId, a: ActionId) -> f64 {
        self.q.get(s.index() * self.num_actions + a.index()).copied().unwrap_or(0.0)
    }

    fn grow_to(&mut self, s: StateId) {
        let needed = (s.index() + 1) * self.num_actions;
        if self.q.len() < needed {
            self.q.resize(needed, 0.0);
        }
    }

    fn max_q(&self, s: StateId) -> f64 {
        (0..self.num_actions)
            .map(|a| self.q_value(s, ActionId(a as u16)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One Q-learning update from a real transition:
    /// `Q(s,a) += eta * (r + gamma * max_b Q(s',b) - Q(s,a))`.
    pub fn update(&mut self, s: StateId, a: ActionId, reward: f64, successor: StateId, gamma: f64) {
        self.grow_to(s);
        let target = reward + gamma * self.max_q(successor);
        let idx = s.index() * self.num_actions + a.index();
        self.q[idx] += self.learning_rate * (target - self.q[idx]);
    }
}

/// Action choice of the rollout policy: uniform with probability epsilon,
/// otherwise greedy in the learned Q table with uniform tie-breaking.
pub fn rollout_action<R: Rng + ?Sized>(policy: &RolloutPolicy, s: StateId, rng: &mut R) -> ActionId {
    let n = policy.num_actions;
    if policy.epsilon > 0.0 && rng.random::<f64>() < policy.epsilon {
        return ActionId(rng.random_range(0..n) as u16);
    }
    let mut best = 0usize;
    let mut best_q = policy.q_value(s, ActionId(0));
    let mut ties = 1u32;
    for a in 1..n {
        let q = policy.q_value(s, ActionId(a as u16));
        if q > best_q {
            best = a;
            best_q = q;
            ties = 1;
        } else if q == best_q {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                best = a;
            }
        }
    }
    ActionId(best as u16)
}

/// A transition model a simulation can step through. Implementations own
/// whatever randomness they need, so repeated steps are a pure function of
/// the model's internal stream.
pub trait SimModel {
    fn num_actions(&self) -> usize;
    /// Sample a successor and return it with the (known) reward of the
    /// transition taken.
    fn step(&mut self, s: StateId, a: ActionId) -> (StateId, f64);
}

/// Per-simulation model factory: BAMCP draws one model from the posterior
/// at the root of every simulation.
pub trait ModelSource {
    type Model: SimModel;
    fn draw_model(&mut self, rng: &mut dyn RngCore) -> Self::Model;
    fn num_actions(&self) -> usize;
}

/// Action edge statistics: visit count, running-mean value, and children
/// keyed by sampled successor.
#[derive(Debug, Clone, Default)]
pub struct Edge {
    visits: u64,
    q: f64,
    children: HashMap<StateId, SearchNode>,
    returns_log: Option<Vec<f64>>,
}

impl Edge {
    pub fn visits(&self) -> u64 {
        self.visits
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn children(&self) -> impl Iterator<Item = (StateId, &SearchNode)> {
        self.children.iter().map(|(&s, n)| (s, n))
    }

    /// Returns backed through this edge, if auditing was enabled.
    pub fn returns_log(&self) -> Option<&[f64]> {
        self.returns_log.as_deref()
    }

    /// Monte-Carlo backup: increment the visit count, then move the value
    /// estimate by `(R - Q) / N` so `q` stays the mean of backed returns.
    pub fn record_return(&mut self, ret: f64) {
        self.visits += 1;
        self.q += (ret - self.q) / self.visits as f64;
        if let Some(log) = self.returns_log.as_mut() {
            log.push(ret);
        }
    }
}

/// State node `<s, h>` with per-action edges.
#[derive(Debug, Clone)]
pub struct SearchNode {
    visits: u64,
    edges: Vec<Edge>,
}

impl SearchNode {
    fn new(num_actions: usize, audit: bool) -> Self {
        let mut edges = Vec::with_capacity(num_actions);
        for _ in 0..num_actions {
            edges.push(Edge {
                returns_log: audit.then(Vec::new),
                ..Edge::default()
            });
        }
        Self { visits: 0, edges }
    }

    pub fn visits(&self) -> u64 {
        self.visits
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, a: ActionId) -> &Edge {
        &self.edges[a.index()]
    }

    /// Visit every node of the subtree with its depth (this node is 0).
    pub fn for_each_node(&self, f: &mut impl FnMut(u32, &SearchNode)) {
        fn walk(node: &SearchNode, depth: u32, f: &mut impl FnMut(u32, &SearchNode)) {
            f(depth, node);
            for edge in &node.edges {
                for child in edge.children.values() {
                    walk(child, depth + 1, f);
                }
            }
        }
        walk(self, 0, f);
    }
}

/// UCT action selection: `argmax_a Q + c * sqrt(log N(node) / N(node, a))`,
/// uniform among ties. Edges never visited carry an infinite bonus and are
/// chosen first (uniformly among themselves).
pub fn ucb_select<R: Rng + ?Sized>(node: &SearchNode, c: f64, rng: &mut R) -> ActionId {
    let mut zero_count = 0u32;
    let mut pick = 0usize;
    for (i, edge) in node.edges.iter().enumerate() {
        if edge.visits == 0 {
            zero_count += 1;
            if rng.random_range(0..zero_count) == 0 {
                pick = i;
            }
        }
    }
    if zero_count > 0 {
        return ActionId(pick as u16);
    }

    let log_n = (node.visits.max(1) as f64).ln();
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    let mut ties = 0u32;
    for (i, edge) in node.edges.iter().enumerate() {
        let score = edge.q + c * (log_n / edge.visits as f64).sqrt();
        if score > best_score {
            best = i;
            best_score = score;
            ties = 1;
        } else if score == best_score {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                best = i;
            }
        }
    }
    ActionId(best as u16)
}

/// One search tree rooted at the current `<s, h>`. The root is expanded at
/// construction so a value estimate is defined from the first simulation on.
pub struct SearchTree {
    root: SearchNode,
    root_state: StateId,
    num_actions: usize,
    gamma: f64,
    exploration_c: f64,
    depth_limit: u32,
    audit: bool,
}

impl SearchTree {
    pub fn new(root_state: StateId, num_actions: usize, config: &PlannerConfig) -> Self {
        Self {
            root: SearchNode::new(num_actions, config.audit_returns),
            root_state,
            num_actions,
            gamma: config.discount.gamma,
            exploration_c: config.exploration_c,
            depth_limit: max_depth(&config.discount),
            audit: config.audit_returns,
        }
    }

    pub fn root(&self) -> &SearchNode {
        &self.root
    }

    pub fn depth_limit(&self) -> u32 {
        self.depth_limit
    }

    /// `V(root) = max_a Q(root, a)`.
    pub fn root_value(&self) -> f64 {
        self.root.edges.iter().map(Edge::q).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Run one simulation from the root with the given model and return its
    /// sampled discounted return.
    pub fn simulate<M: SimModel, R: Rng + ?Sized>(
        &mut self,
        model: &mut M,
        rollout: &RolloutPolicy,
        rng: &mut R,
    ) -> f64 {
        debug_assert_eq!(model.num_actions(), self.num_actions);
        let ctx = SimCtx {
            gamma: self.gamma,
            c: self.exploration_c,
            depth_limit: self.depth_limit,
            audit: self.audit,
            num_actions: self.num_actions,
        };
        simulate_node(&mut self.root, self.root_state, model, 0, &ctx, rollout, rng)
    }

    /// Greedy action at the root with uniform tie-breaking.
    pub fn best_action<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionId {
        let mut best = 0usize;
        let mut best_q = self.root.edges[0].q;
        let mut ties = 1u32;
        for (i, edge) in self.root.edges.iter().enumerate().skip(1) {
            if edge.q > best_q {
                best = i;
                best_q = edge.q;
                ties = 1;
            } else if edge.q == best_q {
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    best = i;
                }
            }
        }
        ActionId(best as u16)
    }
}

struct SimCtx {
    gamma: f64,
    c: f64,
    depth_limit: u32,
    audit: bool,
    num_actions: usize,
}

fn simulate_node<M: SimModel, R: Rng + ?Sized>(
    node: &mut SearchNode,
    state: StateId,
    model: &mut M,
    depth: u32,
    ctx: &SimCtx,
    rollout: &RolloutPolicy,
    rng: &mut R,
) -> f64 {
    if depth >= ctx.depth_limit {
        return 0.0;
    }

    if node.visits == 0 {
        // First visit: expand (edges start zeroed), take one rollout-policy
        // action, and estimate the leaf value by rolling out. The rollout
        // continues at the expansion depth, as in the simulate/rollout
        // recursion split.
        let action = rollout_action(rollout, state, rng);
        let (successor, reward) = model.step(state, action);
        let tail = rollout_return(successor, model, depth, ctx, rollout, rng);
        let ret = reward + ctx.gamma * tail;
        node.visits = 1;
        let edge = &mut node.edges[action.index()];
        edge.visits = 1;
        edge.q = ret;
        if let Some(log) = edge.returns_log.as_mut() {
            log.push(ret);
        }
        return ret;
    }

    let action = ucb_select(node, ctx.c, rng);
    let (successor, reward) = model.step(state, action);
    let audit = ctx.audit;
    let num_actions = ctx.num_actions;
    let child = node.edges[action.index()]
        .children
        .entry(successor)
        .or_insert_with(|| SearchNode::new(num_actions, audit));
    let ret = reward + ctx.gamma * simulate_node(child, successor, model, depth + 1, ctx, rollout, rng);
    node.visits += 1;
    node.edges[action.index()].record_return(ret);
    ret
}

fn rollout_return<M: SimModel, R: Rng + ?Sized>(
    state: StateId,
    model: &mut M,
    depth: u32,
    ctx: &SimCtx,
    rollout: &RolloutPolicy,
    rng: &mut R,
) -> f64 {
    let mut cur = state;
    let mut ret = 0.0;
    let mut discount = 1.0;
    let mut d = depth;
    while d < ctx.depth_limit {
        let action = rollout_action(rollout, cur, rng);
        let (succ, reward) = model.step(cur, action);
        ret += discount * reward;
        discount *= ctx.gamma;
        cur = succ;
        d += 1;
    }
    ret
}

/// Result of a search: the chosen action plus the full tree for inspection.
pub struct SearchResult {
    pub action: ActionId,
    pub tree: SearchTree,
}

/// Run a full search: `num_simulations` simulations, each against a model
/// drawn fresh from `source`, then the greedy root action.
pub fn run_search<S: ModelSource, R: Rng>(
    root_state: StateId,
    source: &mut S,
    config: &PlannerConfig,
    rollout: &RolloutPolicy,
    rng: &mut R,
) -> Result<SearchResult, PlannerError> {
    config.validate()?;
    let mut tree = SearchTree::new(root_state, source.num_actions(), config);
    for _ in 0..config.num_simulations {
        let mut model = source.draw_model(rng);
        tree.simulate(&mut model, rollout, rng);
    }
    let action = tree.best_action(rng);
    Ok(SearchResult { action, tree })
}

/// Model adapter for the conjugate beliefs: successors come from the
/// sampled rows, rewards from the known table.
pub struct ConjugateModel<'a> {
    model: SampledModel,
    belief: &'a BeliefModel,
    counts: &'a TransitionCounts,
    rewards: &'a RewardTable,
}

impl SimModel for ConjugateModel<'_> {
    fn num_actions(&self) -> usize {
        self.rewards.num_actions()
    }

    fn step(&mut self, s: StateId, a: ActionId) -> (StateId, f64) {
        let successor = lazy_sample_transition(&mut self.model, self.belief, self.counts, s, a)
            .expect("simulation state within the belief's domain");
        (successor, self.rewards.get(s, a, successor))
    }
}

/// Root-sampling source over a conjugate belief.
pub struct ConjugateSource<'a> {
    pub belief: &'a BeliefModel,
    pub counts: &'a TransitionCounts,
    pub rewards: &'a RewardTable,
    pub lazy: bool,
}

impl<'a> ModelSource for ConjugateSource<'a> {
    type Model = ConjugateModel<'a>;

    fn draw_model(&mut self, rng: &mut dyn RngCore) -> Self::Model {
        let model = if self.lazy {
            sample_model_lazy(self.belief, self.rewards.num_actions(), rng)
        } else {
            sample_model_eager(self.belief, self.counts, self.rewards.num_actions(), rng)
        }
        .expect("belief admits finite sampled models");
        ConjugateModel { model, belief: self.belief, counts: self.counts, rewards: self.rewards }
    }

    fn num_actions(&self) -> usize {
        self.rewards.num_actions()
    }
}

/// BA-UCT "model": collapsed posterior-predictive sampling with
/// simulation-local pseudo-counts. Each in-tree (and rollout) step samples
/// the successor from the predictive conditioned on the real history plus
/// the transitions already simulated this simulation, which is exactly the
/// node-wise posterior sampling of the baseline.
pub struct BaUctModel<'a> {
    belief: &'a BeliefModel,
    counts: &'a TransitionCounts,
    rewards: &'a RewardTable,
    sim_counts: TransitionCounts,
    rng: ChaCha8Rng,
}

impl SimModel for BaUctModel<'_> {
    fn num_actions(&self) -> usize {
        self.rewards.num_actions()
    }

    fn step(&mut self, s: StateId, a: ActionId) -> (StateId, f64) {
        let view = CountsView::new(self.counts, Some(&self.sim_counts));
        let successor = sample_predictive_view(self.belief, view, s, a, &mut self.rng)
            .expect("simulation state within the belief's domain");
        self.sim_counts.add(s, a, successor);
        (successor, self.rewards.get(s, a, successor))
    }
}

/// Source for the BA-UCT baseline. No model is drawn at the root; the
/// per-simulation state is just the empty pseudo-count overlay.
pub struct BaUctSource<'a> {
    pub belief: &'a BeliefModel,
    pub counts: &'a TransitionCounts,
    pub rewards: &'a RewardTable,
}

impl<'a> ModelSource for BaUctSource<'a> {
    type Model = BaUctModel<'a>;

    fn draw_model(&mut self, rng: &mut dyn RngCore) -> Self::Model {
        BaUctModel {
            belief: self.belief,
            counts: self.counts,
            rewards: self.rewards,
            sim_counts: TransitionCounts::new(),
            rng: ChaCha8Rng::seed_from_u64(rng.next_u64()),
        }
    }

    fn num_actions(&self) -> usize {
        self.rewards.num_actions()
    }
}

/// Plan one action from the root belief state. Dispatches on the configured
/// mode; this is the entry point the experiment harness uses for every
/// conjugate-belief domain.
pub fn search<R: Rng>(
    root_state: StateId,
    belief: &BeliefModel,
    counts: &TransitionCounts,
    rewards: &RewardTable,
    config: &PlannerConfig,
    rollout: &RolloutPolicy,
    rng: &mut R,
) -> Result<SearchResult, PlannerError> {
    if let Some(n) = belief.num_states() {
        if root_state.index() >= n {
            return Err(PlannerError::RootOutOfRange(root_state.0));
        }
    }
    match config.mode {
        SearchMode::Bamcp => {
            let mut source = ConjugateSource {
                belief,
                counts,
                rewards,
                lazy: config.lazy_sampling,
            };
            run_search(root_state, &mut source, config, rollout, rng)
        }
        SearchMode::BaUct => {
            let mut source = BaUctSource { belief, counts, rewards };
            run_search(root_state, &mut source, config, rollout, rng)
        }
    }
}
