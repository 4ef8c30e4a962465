//! Square grid worlds (Grid5, Grid10): no reward anywhere except a goal
//! cell opposite the reset cell. Moves succeed with probability `slip`
//! (otherwise the agent stays put), walls are the outer border, and
//! reaching the goal pays 1 and teleports back to the reset cell, so the
//! goal is never occupied.

use rand::{Rng, RngCore};

use crate::mdp::{ActionId, RewardTable, StateId};

use super::Environment;

pub const NUM_ACTIONS: usize = 4;

/// Default success probability of a move; the remaining mass stays put.
pub const DEFAULT_SLIP_SUCCESS: f64 = 0.8;

#[derive(Debug, Clone)]
pub struct GridWorld {
    side: usize,
    success: f64,
    start: StateId,
    goal: StateId,
}

impl GridWorld {
    pub fn new(side: usize, success: f64) -> Self {
        assert!(side >= 2);
        assert!(success > 0.0 && success <= 1.0);
        Self {
            side,
            success,
            start: StateId(0),
            goal: StateId((side * side - 1) as u32),
        }
    }

    pub fn grid5() -> Self {
        Self::new(5, DEFAULT_SLIP_SUCCESS)
    }

    pub fn grid10() -> Self {
        Self::new(10, DEFAULT_SLIP_SUCCESS)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn goal(&self) -> StateId {
        self.goal
    }

    fn cell(&self, s: StateId) -> (usize, usize) {
        (s.index() / self.side, s.index() % self.side)
    }

    /// Cell the move aims at; staying put when the border blocks it.
    fn intended(&self, s: StateId, a: ActionId) -> StateId {
        let (r, c) = self.cell(s);
        let (nr, nc) = match a.index() {
            0 => (r.wrapping_sub(1), c), // north
            1 => (r + 1, c),             // south
            2 => (r, c.wrapping_sub(1)), // west
            3 => (r, c + 1),             // east
            _ => panic!("grid worlds have 4 actions"),
        };
        if nr >= self.side || nc >= self.side {
            s
        } else {
            StateId((nr * self.side + nc) as u32)
        }
    }

    /// Known reward function: 1 exactly on move outcomes that land on the
    /// goal (which teleports home). The goal itself is never occupied, so
    /// its rows stay zero.
    pub fn reward_table(&self) -> RewardTable {
        let n = self.side * self.side;
        let mut rewards = RewardTable::zeros(n, NUM_ACTIONS);
        for s in 0..n {
            if StateId(s as u32) == self.goal {
                continue;
            }
            for a in 0..NUM_ACTIONS {
                let intended = self.intended(StateId(s as u32), ActionId(a as u16));
                if intended == self.goal {
                    rewards.set(StateId(s as u32), ActionId(a as u16), self.start, 1.0);
                }
            }
        }
        rewards
    }
}

impl Environment for GridWorld {
    fn num_states(&self) -> Option<usize> {
        Some(self.side * self.side)
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> StateId {
        self.start
    }

    fn step(&mut self, s: StateId, a: ActionId, rng: &mut dyn RngCore) -> (StateId, f64) {
        let intended = self.intended(s, a);
        if intended == s {
            return (s, 0.0);
        }
        if rng.random::<f64>() < self.success {
            if intended == self.goal {
                (self.start, 1.0)
            } else {
                (intended, 0.0)
            }
        } else {
            (s, 0.0)
        }
    }

    fn rmax(&self) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn goal_pays_and_teleports() {
        let mut env = GridWorld::new(5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // One cell west of the goal, moving east.
        let s = StateId(23);
        let (succ, r) = env.step(s, ActionId(3), &mut rng);
        assert_eq!(succ, StateId(0));
        assert_eq!(r, 1.0);
    }

    #[test]
    fn border_blocks_movement() {
        let mut env = GridWorld::grid5();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            // North from the top-left corner is a no-op.
            assert_eq!(env.step(StateId(0), ActionId(0), &mut rng), (StateId(0), 0.0));
        }
    }

    #[test]
    fn slip_frequency_matches_configuration() {
        let mut env = GridWorld::grid5();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 100_000;
        let mut moved = 0u32;
        for _ in 0..trials {
            let (succ, _) = env.step(StateId(0), ActionId(3), &mut rng);
            if succ != StateId(0) {
                moved += 1;
            }
        }
        let freq = moved as f64 / trials as f64;
        assert!((freq - DEFAULT_SLIP_SUCCESS).abs() < 0.01, "success frequency {freq}");
    }

    #[test]
    fn reward_table_only_marks_goal_entries() {
        let env = GridWorld::grid5();
        let rewards = env.reward_table();
        // Moving east from (4, 3) lands on the goal and teleports home.
        assert_eq!(rewards.get(StateId(23), ActionId(3), StateId(0)), 1.0);
        assert_eq!(rewards.get(StateId(23), ActionId(3), StateId(23)), 0.0);
        assert_eq!(rewards.get(StateId(12), ActionId(0), StateId(7)), 0.0);
        // Exactly two approaches reach the goal on a square grid.
        let n = 25;
        let mut paying = 0;
        for s in 0..n {
            for a in 0..4 {
                if rewards.get(StateId(s as u32), ActionId(a as u16), StateId(0)) > 0.0 {
                    paying += 1;
                }
            }
        }
        assert_eq!(paying, 2);
    }
}
