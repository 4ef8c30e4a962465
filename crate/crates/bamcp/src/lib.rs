//! Bayes-adaptive Monte-Carlo planning.
//!
//! The library plans in MDPs with unknown dynamics by searching the
//! Bayes-adaptive state space `<s, h>`: each simulation draws one
//! transition model from the current posterior at the root of the search
//! tree (lazily materializing only the rows it visits) and runs UCT with
//! it, so the correct successor distribution arises at every node without
//! belief updates inside the tree. A BA-UCT baseline with node-wise
//! posterior sampling, conjugate belief families, a Gittins-index
//! Bayes-optimality oracle, Metropolis-Hastings inference for a structured
//! infinite-grid prior, and the benchmark domains round out the crate.

pub mod beliefs;
pub mod domains;
pub mod gittins;
pub mod grid;
pub mod mdp;
pub mod planner;
mod sampling;

pub use beliefs::{BeliefModel, SampledModel};
pub use mdp::{ActionId, DiscountSpec, History, RewardTable, StateId, TransitionCounts};
pub use planner::{PlannerConfig, RolloutPolicy, SearchMode, SearchResult};
