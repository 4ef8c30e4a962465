//! Benchmark environments with known rewards and unknown dynamics, paired
//! with their default priors.

use rand::RngCore;

use crate::beliefs::{ArmPrior, BeliefModel};
use crate::grid::GridPrior;
use crate::mdp::{ActionId, StateId};

pub mod bandit;
pub mod double_loop;
pub mod grid_world;
pub mod infinite_grid;
pub mod maze;

pub use bandit::BanditEnv;
pub use double_loop::{double_loop, parse_override, TabularEnv};
pub use grid_world::GridWorld;
pub use infinite_grid::InfiniteGridEnv;
pub use maze::{load_maze, MazeEnv};

use thiserror::Error;

/// True environment dynamics: the ground truth experiments are scored
/// against. Rewards are bounded by `rmax`; stepping from a valid state
/// yields a valid state.
pub trait Environment {
    /// Number of states, or `None` for unbounded spaces.
    fn num_states(&self) -> Option<usize>;
    fn num_actions(&self) -> usize;
    /// Start (or restart) an episode and return the initial state.
    fn reset(&mut self, rng: &mut dyn RngCore) -> StateId;
    /// Sample the true dynamics from `(s, a)`.
    fn step(&mut self, s: StateId, a: ActionId, rng: &mut dyn RngCore) -> (StateId, f64);
    fn rmax(&self) -> f64;
}

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("maze has no reset cell 'S'")]
    MissingStart,
    #[error("maze has no reward cell 'G'")]
    MissingGoal,
    #[error("maze must have exactly one '{0}' cell")]
    DuplicateCell(char),
    #[error("maze carries {0} flags; at most 3 are supported")]
    TooManyFlags(usize),
    #[error("unexpected character {ch:?} at line {line}, column {col}")]
    UnknownChar { ch: char, line: usize, col: usize },
    #[error("maze rows must all have the same width")]
    RaggedGrid,
    #[error("maze is empty")]
    EmptyGrid,
    #[error("override line {line}: {msg}")]
    OverrideParse { line: usize, msg: String },
    #[error("invalid action {action} for this domain")]
    InvalidAction { action: u16 },
    #[error("invalid state {state} for this domain")]
    InvalidState { state: u32 },
}

/// Domain tags understood by [`make_prior`].
#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    DoubleLoop,
    Grid5,
    Grid10,
    /// Maze priors scale with the augmented state count of the loaded file.
    Maze { num_states: usize },
    Bandit { arms: Vec<ArmPrior> },
    InfiniteGrid { prior: GridPrior, swap_prior: bool },
}

/// Default prior for each benchmark domain: symmetric Dirichlet with
/// `alpha = 1/|S|` for the loop, sparse Dirichlet for grids and maze,
/// independent Beta arms for bandits, and the structured row/column prior
/// for the infinite grid.
pub fn make_prior(kind: &DomainKind) -> BeliefModel {
    match kind {
        DomainKind::DoubleLoop => {
            BeliefModel::symmetric_dirichlet(1.0 / double_loop::NUM_STATES as f64, double_loop::NUM_STATES)
        }
        DomainKind::Grid5 => BeliefModel::sparse_dirichlet(1.0, 1.0, 25),
        DomainKind::Grid10 => BeliefModel::sparse_dirichlet(1.0, 1.0, 100),
        DomainKind::Maze { num_states } => BeliefModel::sparse_dirichlet(1.0, 1.0, *num_states),
        DomainKind::Bandit { arms } => BeliefModel::bandit_arms(arms.clone()),
        DomainKind::InfiniteGrid { prior, swap_prior } => {
            let p = if *swap_prior { prior.swapped() } else { *prior };
            BeliefModel::structured_grid(p.alpha1, p.beta1, p.alpha2, p.beta2)
        }
    }
}

/// Default grid prior of the infinite-grid benchmark.
pub fn default_grid_prior() -> GridPrior {
    GridPrior::new(1.0, 2.0, 2.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::BANDIT_STATES;

    #[test]
    fn double_loop_prior_is_one_over_states() {
        let prior = make_prior(&DomainKind::DoubleLoop);
        match prior {
            BeliefModel::SymmetricDirichlet { alpha, num_states } => {
                assert_eq!(num_states, 9);
                assert!((alpha - 1.0 / 9.0).abs() < 1e-15);
            }
            _ => panic!("wrong prior family"),
        }
    }

    #[test]
    fn infinite_grid_prior_defaults_and_swap() {
        let kind = DomainKind::InfiniteGrid { prior: default_grid_prior(), swap_prior: false };
        match make_prior(&kind) {
            BeliefModel::StructuredGridPrior { alpha1, beta1, alpha2, beta2 } => {
                assert_eq!((alpha1, beta1, alpha2, beta2), (1.0, 2.0, 2.0, 1.0));
            }
            _ => panic!("wrong prior family"),
        }
        let kind = DomainKind::InfiniteGrid { prior: default_grid_prior(), swap_prior: true };
        match make_prior(&kind) {
            BeliefModel::StructuredGridPrior { alpha1, beta1, alpha2, beta2 } => {
                assert_eq!((alpha1, beta1, alpha2, beta2), (2.0, 1.0, 1.0, 2.0));
            }
            _ => panic!("wrong prior family"),
        }
    }

    #[test]
    fn bandit_prior_wraps_arms() {
        let arms = vec![ArmPrior::Known(0.5), ArmPrior::Beta { alpha: 1.0, beta: 7.0 }];
        let prior = make_prior(&DomainKind::Bandit { arms: arms.clone() });
        assert_eq!(prior.num_states(), Some(BANDIT_STATES));
        match prior {
            BeliefModel::BetaBernoulliArms { arms: got } => assert_eq!(got, arms),
            _ => panic!("wrong prior family"),
        }
    }
}
