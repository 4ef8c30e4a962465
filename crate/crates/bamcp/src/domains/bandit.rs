//! Bernoulli bandits in the transition-uncertainty formulation: pulling a
//! stochastic arm moves to a WIN or LOSE state (reward 1 or 0), a known arm
//! returns to the start state with its fixed payout, so all uncertainty
//! lives in the transition kernel and rewards stay known.

use rand::{Rng, RngCore};

use crate::beliefs::{ArmPrior, BANDIT_LOSE, BANDIT_START, BANDIT_STATES, BANDIT_WIN};
use crate::mdp::{ActionId, RewardTable, StateId};

use super::Environment;

/// Ground truth of one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmTruth {
    Known(f64),
    Bernoulli(f64),
}

#[derive(Debug, Clone)]
pub struct BanditEnv {
    arms: Vec<ArmTruth>,
    rmax: f64,
}

impl BanditEnv {
    pub fn new(arms: Vec<ArmTruth>) -> Self {
        assert!(!arms.is_empty());
        let rmax = arms
            .iter()
            .map(|arm| match arm {
                ArmTruth::Known(r) => r.abs(),
                ArmTruth::Bernoulli(_) => 1.0,
            })
            .fold(0.0f64, f64::max);
        Self { arms, rmax }
    }

    /// Sample the true success probabilities from the agent's prior.
    pub fn sample_from_prior(arms: &[ArmPrior], rng: &mut dyn RngCore) -> Self {
        let truths = arms
            .iter()
            .map(|arm| match *arm {
                ArmPrior::Known(r) => ArmTruth::Known(r),
                ArmPrior::Beta { alpha, beta } => {
                    ArmTruth::Bernoulli(crate::sampling::beta_draw(rng, alpha, beta))
                }
            })
            .collect();
        Self::new(truths)
    }

    /// Known reward function of the encoding: stochastic arms pay 1 on
    /// landing in WIN, known arms pay their payout on returning to START.
    pub fn reward_table(&self) -> RewardTable {
        let mut rewards = RewardTable::zeros(BANDIT_STATES, self.arms.len());
        for (i, arm) in self.arms.iter().enumerate() {
            for s in 0..BANDIT_STATES {
                match arm {
                    ArmTruth::Known(r) => {
                        rewards.set(StateId(s as u32), ActionId(i as u16), BANDIT_START, *r)
                    }
                    ArmTruth::Bernoulli(_) => {
                        rewards.set(StateId(s as u32), ActionId(i as u16), BANDIT_WIN, 1.0)
                    }
                }
            }
        }
        rewards
    }
}

/// Reward table implied by the arm priors alone (no ground truth needed);
/// identical to [`BanditEnv::reward_table`] for matching arm kinds.
pub fn reward_table_for_arms(arms: &[ArmPrior]) -> RewardTable {
    let mut rewards = RewardTable::zeros(BANDIT_STATES, arms.len());
    for (i, arm) in arms.iter().enumerate() {
        for s in 0..BANDIT_STATES {
            match arm {
                ArmPrior::Known(r) => {
                    rewards.set(StateId(s as u32), ActionId(i as u16), BANDIT_START, *r)
                }
                ArmPrior::Beta { .. } => {
                    rewards.set(StateId(s as u32), ActionId(i as u16), BANDIT_WIN, 1.0)
                }
            }
        }
    }
    rewards
}

impl Environment for BanditEnv {
    fn num_states(&self) -> Option<usize> {
        Some(BANDIT_STATES)
    }

    fn num_actions(&self) -> usize {
        self.arms.len()
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> StateId {
        BANDIT_START
    }

    fn step(&mut self, _s: StateId, a: ActionId, rng: &mut dyn RngCore) -> (StateId, f64) {
        match self.arms[a.index()] {
            ArmTruth::Known(r) => (BANDIT_START, r),
            ArmTruth::Bernoulli(p) => {
                if rng.random::<f64>() < p {
                    (BANDIT_WIN, 1.0)
                } else {
                    (BANDIT_LOSE, 0.0)
                }
            }
        }
    }

    fn rmax(&self) -> f64 {
        self.rmax
    }
}
