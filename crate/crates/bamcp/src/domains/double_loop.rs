//! The two-loop domain: a 9-state deterministic MDP with a shared state 0.
//!
//! Action 0 from state 0 enters the right loop 0->1->2->3->4->0, paying 1
//! on re-entering 0; action 1 enters the left loop 0->5->6->7->8->0, paying
//! 2 on re-entering 0. Inside the right loop both actions advance, so the
//! smaller reward comes for free; inside the left loop only action 1
//! advances (action 0 stays put), which is what makes the better loop
//! harder to complete: greedy learners settle on the right loop.
//!
//! The transition table can also be loaded from an override file, one line
//! per transition: `state action -> state reward`.

use rand::RngCore;

use crate::mdp::{ActionId, RewardTable, StateId};

use super::{DomainError, Environment};

pub const NUM_STATES: usize = 9;
pub const NUM_ACTIONS: usize = 2;

/// Deterministic tabular MDP: one `(successor, reward)` entry per `(s, a)`.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    table: Vec<(StateId, f64)>,
    num_states: usize,
    num_actions: usize,
    start: StateId,
    rmax: f64,
}

impl TabularEnv {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        start: StateId,
        entries: &[(u32, u16, u32, f64)],
    ) -> Self {
        let mut table = vec![(StateId(0), 0.0); num_states * num_actions];
        let mut rmax = 0.0f64;
        for &(s, a, succ, r) in entries {
            assert!((s as usize) < num_states && (succ as usize) < num_states);
            assert!((a as usize) < num_actions);
            table[s as usize * num_actions + a as usize] = (StateId(succ), r);
            rmax = rmax.max(r.abs());
        }
        Self { table, num_states, num_actions, start, rmax: rmax.max(f64::MIN_POSITIVE) }
    }

    pub fn transition(&self, s: StateId, a: ActionId) -> (StateId, f64) {
        self.table[s.index() * self.num_actions + a.index()]
    }

    /// Known reward function over transitions.
    pub fn reward_table(&self) -> RewardTable {
        let mut rewards = RewardTable::zeros(self.num_states, self.num_actions);
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let (succ, r) = self.table[s * self.num_actions + a];
                if r != 0.0 {
                    rewards.set(StateId(s as u32), ActionId(a as u16), succ, r);
                }
            }
        }
        rewards
    }
}

impl Environment for TabularEnv {
    fn num_states(&self) -> Option<usize> {
        Some(self.num_states)
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> StateId {
        self.start
    }

    fn step(&mut self, s: StateId, a: ActionId, _rng: &mut dyn RngCore) -> (StateId, f64) {
        self.transition(s, a)
    }

    fn rmax(&self) -> f64 {
        self.rmax
    }
}

/// The standard two-loop instance.
pub fn double_loop() -> TabularEnv {
    let entries: Vec<(u32, u16, u32, f64)> = vec![
        // Shared state: action 0 enters the right loop, action 1 the left.
        (0, 0, 1, 0.0),
        (0, 1, 5, 0.0),
        // Right loop: both actions advance; reward 1 on closing the loop.
        (1, 0, 2, 0.0),
        (1, 1, 2, 0.0),
        (2, 0, 3, 0.0),
        (2, 1, 3, 0.0),
        (3, 0, 4, 0.0),
        (3, 1, 4, 0.0),
        (4, 0, 0, 1.0),
        (4, 1, 0, 1.0),
        // Left loop: action 1 advances (reward 2 on closing), action 0
        // stalls in place.
        (5, 1, 6, 0.0),
        (5, 0, 5, 0.0),
        (6, 1, 7, 0.0),
        (6, 0, 6, 0.0),
        (7, 1, 8, 0.0),
        (7, 0, 7, 0.0),
        (8, 1, 0, 2.0),
        (8, 0, 8, 0.0),
    ];
    TabularEnv::new(NUM_STATES, NUM_ACTIONS, StateId(0), &entries)
}

/// Parse a deterministic-MDP override file: one `state action -> state
/// reward` line per transition (either `->` or a Unicode arrow), `#`
/// comments and blank lines ignored. State 0 is the reset state.
pub fn parse_override(text: &str) -> Result<TabularEnv, DomainError> {
    let mut entries: Vec<(u32, u16, u32, f64)> = Vec::new();
    let mut max_state = 0u32;
    let mut max_action = 0u16;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (lhs, rhs) = line
            .split_once("->")
            .or_else(|| line.split_once('\u{2192}'))
            .ok_or_else(|| DomainError::OverrideParse {
                line: line_no,
                msg: "expected 'state action -> state reward'".into(),
            })?;
        let parse_err = |msg: &str| DomainError::OverrideParse { line: line_no, msg: msg.into() };
        let mut lhs_parts = lhs.split_whitespace();
        let s: u32 = lhs_parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("bad source state"))?;
        let a: u16 = lhs_parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("bad action"))?;
        if lhs_parts.next().is_some() {
            return Err(parse_err("too many tokens before the arrow"));
        }
        let mut rhs_parts = rhs.split_whitespace();
        let succ: u32 = rhs_parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("bad successor state"))?;
        let r: f64 = rhs_parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("bad reward"))?;
        if !r.is_finite() {
            return Err(parse_err("reward must be finite"));
        }
        if rhs_parts.next().is_some() {
            return Err(parse_err("too many tokens after the arrow"));
        }
        max_state = max_state.max(s).max(succ);
        max_action = max_action.max(a);
        entries.push((s, a, succ, r));
    }
    if entries.is_empty() {
        return Err(DomainError::OverrideParse { line: 0, msg: "no transitions".into() });
    }
    if max_state >= 4096 || max_action >= 16 {
        return Err(DomainError::OverrideParse {
            line: 0,
            msg: format!("table too large: {} states, {} actions", max_state + 1, max_action + 1),
        });
    }
    let num_states = max_state as usize + 1;
    let num_actions = max_action as usize + 1;
    // Unlisted (s, a) pairs self-loop with no reward.
    let mut full: Vec<(u32, u16, u32, f64)> = (0..num_states)
        .flat_map(|s| (0..num_actions).map(move |a| (s as u32, a as u16, s as u32, 0.0)))
        .collect();
    for (s, a, succ, r) in entries {
        full[s as usize * num_actions + a as usize] = (s, a, succ, r);
    }
    Ok(TabularEnv::new(num_states, num_actions, StateId(0), &full))
}
