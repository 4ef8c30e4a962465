//! Seeded experiment execution: one agent/environment loop per run, with
//! per-step records ordered deterministically by (run, step).

use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use bamcp::beliefs::{ArmPrior, BeliefModel};
use bamcp::domains::{
    bandit, double_loop, load_maze, make_prior, parse_override, BanditEnv, DomainError, DomainKind,
    Environment, GridWorld, InfiniteGridEnv, MazeEnv, TabularEnv,
};
use bamcp::domains::infinite_grid::GridModelSource;
use bamcp::grid::{GridChain, GridObservations, GridPrior};
use bamcp::mdp::{DiscountSpec, History, RewardTable, TransitionCounts};
use bamcp::planner::{self, PlannerConfig, PlannerError, RolloutPolicy, SearchMode};

use crate::config::{AlgoKind, DomainSpec, ExperimentConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("experiment produced no records")]
    EmptyResult,
}

/// One (run, step) record.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub run: u32,
    pub step: u32,
    pub reward: f64,
    /// Prefix sum of rewards within the run.
    pub cum_reward: f64,
    /// Prefix sum of gamma^step-discounted rewards within the run.
    pub cum_disc_reward: f64,
    /// Wall-clock planning time of this step's search call only.
    pub plan_ms: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<StepRecord>,
    pub gamma: f64,
    pub runs: u32,
    pub steps: u32,
}

impl ExperimentResult {
    /// Final cumulative undiscounted reward of each run.
    pub fn run_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.runs as usize];
        for r in &self.records {
            totals[r.run as usize] = r.cum_reward;
        }
        totals
    }

    /// Final cumulative discounted reward of each run.
    pub fn run_discounted_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.runs as usize];
        for r in &self.records {
            totals[r.run as usize] = r.cum_disc_reward;
        }
        totals
    }

    /// Mean planning time per step across all records.
    pub fn mean_plan_ms(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.plan_ms).sum::<f64>() / self.records.len() as f64
    }
}

/// Mean and 95% normal-approximation half-width of per-run total rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub half_width: f64,
}

/// Summarize per-run undiscounted totals: mean plus `1.96 * sd / sqrt(n)`
/// (zero half-width for a single run).
pub fn summarize(result: &ExperimentResult) -> Result<Summary, ExperimentError> {
    if result.records.is_empty() {
        return Err(ExperimentError::EmptyResult);
    }
    let totals = result.run_totals();
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    if totals.len() == 1 {
        return Ok(Summary { mean, half_width: 0.0 });
    }
    let var = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(Summary { mean, half_width: 1.96 * var.sqrt() / n.sqrt() })
}

/// Everything loaded once per experiment and shared read-only by the runs.
enum Prepared {
    Conjugate { template: ConjugateTemplate, belief: BeliefModel, rewards: RewardTable },
    Grid { truth: GridPrior, agent: GridPrior },
}

#[derive(Clone)]
enum ConjugateTemplate {
    Tabular(TabularEnv),
    GridWorld(GridWorld),
    Maze(MazeEnv),
    /// Ground truth sampled per run from the prior arms.
    Bandit(Vec<ArmPrior>),
}

fn read_file(path: &Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn prepare(config: &ExperimentConfig) -> Result<Prepared, ExperimentError> {
    Ok(match &config.domain {
        DomainSpec::DoubleLoop { override_path } => {
            let env = match override_path {
                Some(path) => parse_override(&read_file(path)?)?,
                None => double_loop(),
            };
            let belief = match override_path {
                None => make_prior(&DomainKind::DoubleLoop),
                Some(_) => {
                    let n = env.num_states().expect("tabular environments are finite");
                    BeliefModel::symmetric_dirichlet(1.0 / n as f64, n)
                }
            };
            let rewards = env.reward_table();
            Prepared::Conjugate { template: ConjugateTemplate::Tabular(env), belief, rewards }
        }
        DomainSpec::Grid5 => {
            let env = GridWorld::grid5();
            Prepared::Conjugate {
                belief: make_prior(&DomainKind::Grid5),
                rewards: env.reward_table(),
                template: ConjugateTemplate::GridWorld(env),
            }
        }
        DomainSpec::Grid10 => {
            let env = GridWorld::grid10();
            Prepared::Conjugate {
                belief: make_prior(&DomainKind::Grid10),
                rewards: env.reward_table(),
                template: ConjugateTemplate::GridWorld(env),
            }
        }
        DomainSpec::Maze { path } => {
            let env = load_maze(&read_file(path)?)?;
            let num_states = env.num_states().expect("mazes are finite");
            Prepared::Conjugate {
                belief: make_prior(&DomainKind::Maze { num_states }),
                rewards: env.reward_table(),
                template: ConjugateTemplate::Maze(env),
            }
        }
        DomainSpec::Bandit { arms } => Prepared::Conjugate {
            belief: make_prior(&DomainKind::Bandit { arms: arms.clone() }),
            rewards: bandit::reward_table_for_arms(arms),
            template: ConjugateTemplate::Bandit(arms.clone()),
        },
        DomainSpec::InfiniteGrid { prior, swap_prior } => Prepared::Grid {
            truth: *prior,
            agent: if *swap_prior { prior.swapped() } else { *prior },
        },
    })
}

fn planner_config(config: &ExperimentConfig, rmax: f64) -> PlannerConfig {
    PlannerConfig {
        exploration_c: config.exploration_c,
        num_simulations: config.sims,
        discount: DiscountSpec::new(config.gamma, rmax.max(config.precision * 2.0), config.precision),
        rollout_epsilon: config.rollout_epsilon,
        lazy_sampling: config.lazy_sampling,
        mode: match config.algo {
            AlgoKind::Bamcp => SearchMode::Bamcp,
            AlgoKind::BaUct => SearchMode::BaUct,
        },
        audit_returns: false,
    }
}

struct RunRecorder {
    records: Vec<StepRecord>,
    cum: f64,
    cum_disc: f64,
    discount: f64,
    gamma: f64,
    run: u32,
    seed: u64,
}

impl RunRecorder {
    fn new(run: u32, seed: u64, gamma: f64, steps: u32) -> Self {
        Self {
            records: Vec::with_capacity(steps as usize),
            cum: 0.0,
            cum_disc: 0.0,
            discount: 1.0,
            gamma,
            run,
            seed,
        }
    }

    fn push(&mut self, step: u32, reward: f64, plan_ms: f64) {
        self.cum += reward;
        self.cum_disc += self.discount * reward;
        self.discount *= self.gamma;
        self.records.push(StepRecord {
            run: self.run,
            step,
            reward,
            cum_reward: self.cum,
            cum_disc_reward: self.cum_disc,
            plan_ms,
            seed: self.seed,
        });
    }
}

fn run_conjugate(
    config: &ExperimentConfig,
    template: &ConjugateTemplate,
    belief: &BeliefModel,
    rewards: &RewardTable,
    run: u32,
) -> Result<Vec<StepRecord>, ExperimentError> {
    let seed = config.base_seed.wrapping_add(run as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env: Box<dyn Environment> = match template {
        ConjugateTemplate::Tabular(env) => Box::new(env.clone()),
        ConjugateTemplate::GridWorld(env) => Box::new(env.clone()),
        ConjugateTemplate::Maze(env) => Box::new(env.clone()),
        ConjugateTemplate::Bandit(arms) => Box::new(BanditEnv::sample_from_prior(arms, &mut rng)),
    };
    let pcfg = planner_config(config, env.rmax());
    let mut policy =
        RolloutPolicy::new(env.num_actions(), config.rollout_epsilon).with_learning_rate(0.1);

    let mut state = env.reset(&mut rng);
    let mut history = History::new(state);
    let mut counts = TransitionCounts::new();
    let mut recorder = RunRecorder::new(run, seed, config.gamma, config.steps);

    for step in 0..config.steps {
        let started = Instant::now();
        let chosen =
            planner::search(state, belief, &counts, rewards, &pcfg, &policy, &mut rng)?.action;
        let plan_ms = if config.measure_time {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let (successor, reward) = env.step(state, chosen, &mut rng);
        history.record(chosen, successor);
        counts.add(state, chosen, successor);
        if config.rollout_learning {
            policy.update(state, chosen, reward, successor, config.gamma);
        }
        recorder.push(step, reward, plan_ms);
        state = successor;
    }
    debug_assert_eq!(counts.total(), history.len() as u64);
    Ok(recorder.records)
}

fn run_grid(
    config: &ExperimentConfig,
    truth: GridPrior,
    agent: GridPrior,
    run: u32,
) -> Result<Vec<StepRecord>, ExperimentError> {
    let seed = config.base_seed.wrapping_add(run as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = InfiniteGridEnv::sample(truth, rng.next_u64());
    let pcfg = planner_config(config, env.rmax());
    let mut policy =
        RolloutPolicy::new(env.num_actions(), config.rollout_epsilon).with_learning_rate(0.1);

    let mut state = env.reset(&mut rng);
    let mut obs = GridObservations::new();
    let (col, row, value) = env.decode(state);
    obs.record(col, row, value);
    let mut chain = GridChain::new(agent);
    let mut recorder = RunRecorder::new(run, seed, config.gamma, config.steps);

    for step in 0..config.steps {
        let started = Instant::now();
        chain.link_observations(&obs, &mut rng);
        chain.advance(&obs, config.mh_burn, &mut rng);
        let mut source = GridModelSource::new(&mut chain, &obs, env.interner());
        let chosen = planner::run_search(state, &mut source, &pcfg, &policy, &mut rng)?.action;
        let plan_ms = if config.measure_time {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let (successor, reward) = env.step(state, chosen, &mut rng);
        let (col, row, value) = env.decode(successor);
        obs.record(col, row, value);
        if config.rollout_learning {
            policy.update(state, chosen, reward, successor, config.gamma);
        }
        recorder.push(step, reward, plan_ms);
        state = successor;
    }
    Ok(recorder.records)
}

/// Run the full experiment: each run owns its environment, beliefs,
/// planner, and RNG stream (`base_seed + run`), so runs are independent
/// and may execute in parallel; records come back sorted by (run, step).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    config.validate().map_err(ExperimentError::Config)?;
    let prepared = prepare(config)?;

    let run_one = |run: u32| -> Result<Vec<StepRecord>, ExperimentError> {
        match &prepared {
            Prepared::Conjugate { template, belief, rewards } => {
                run_conjugate(config, template, belief, rewards, run)
            }
            Prepared::Grid { truth, agent } => run_grid(config, *truth, *agent, run),
        }
    };

    let per_run: Vec<Vec<StepRecord>> = if config.runs > 1 {
        (0..config.runs)
            .into_par_iter()
            .map(run_one)
            .collect::<Result<_, _>>()?
    } else {
        (0..config.runs).map(run_one).collect::<Result<_, _>>()?
    };

    let records = per_run.into_iter().flatten().collect();
    Ok(ExperimentResult {
        records,
        gamma: config.gamma,
        runs: config.runs,
        steps: config.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_bandit_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_domain(DomainSpec::Bandit {
            arms: vec![ArmPrior::Known(0.5), ArmPrior::Beta { alpha: 1.0, beta: 1.0 }],
        });
        cfg.sims = 32;
        cfg.steps = 4;
        cfg.runs = 2;
        cfg.measure_time = false;
        cfg
    }

    #[test]
    fn single_record_per_step_ordered() {
        let cfg = tiny_bandit_config();
        let result = run_experiment(&cfg).unwrap();
        assert_eq!(result.records.len(), 8);
        let keys: Vec<(u32, u32)> = result.records.iter().map(|r| (r.run, r.step)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn cumulative_columns_are_prefix_sums() {
        let cfg = tiny_bandit_config();
        let result = run_experiment(&cfg).unwrap();
        for run in 0..cfg.runs {
            let mut cum = 0.0;
            let mut disc = 0.0;
            let mut discount = 1.0;
            for r in result.records.iter().filter(|r| r.run == run) {
                cum += r.reward;
                disc += discount * r.reward;
                discount *= cfg.gamma;
                assert_eq!(r.cum_reward, cum);
                assert_eq!(r.cum_disc_reward, disc);
            }
        }
    }

    #[test]
    fn seed_isolation_across_run_counts() {
        let mut cfg = tiny_bandit_config();
        cfg.runs = 3;
        let triple = run_experiment(&cfg).unwrap();
        cfg.runs = 1;
        let single = run_experiment(&cfg).unwrap();
        let first: Vec<_> = triple.records.iter().filter(|r| r.run == 0).cloned().collect();
        assert_eq!(first, single.records);
    }

    #[test]
    fn summarize_examples() {
        let fake = |totals: &[f64]| ExperimentResult {
            records: totals
                .iter()
                .enumerate()
                .map(|(i, &t)| StepRecord {
                    run: i as u32,
                    step: 0,
                    reward: t,
                    cum_reward: t,
                    cum_disc_reward: t,
                    plan_ms: 0.0,
                    seed: i as u64,
                })
                .collect(),
            gamma: 0.95,
            runs: totals.len() as u32,
            steps: 1,
        };
        let s = summarize(&fake(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.half_width - 1.96 / 3f64.sqrt()).abs() < 1e-12);

        let s = summarize(&fake(&[5.0])).unwrap();
        assert_eq!(s, Summary { mean: 5.0, half_width: 0.0 });

        let s = summarize(&fake(&[0.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(s, Summary { mean: 0.0, half_width: 0.0 });

        let empty = ExperimentResult { records: vec![], gamma: 0.95, runs: 0, steps: 0 };
        assert!(matches!(summarize(&empty), Err(ExperimentError::EmptyResult)));
    }

    #[test]
    fn grid_smoke_run() {
        let mut cfg = ExperimentConfig::for_domain(DomainSpec::InfiniteGrid {
            prior: GridPrior::new(1.0, 2.0, 2.0, 1.0),
            swap_prior: false,
        });
        cfg.sims = 24;
        cfg.steps = 6;
        cfg.runs = 1;
        cfg.mh_burn = 5;
        cfg.measure_time = false;
        let result = run_experiment(&cfg).unwrap();
        assert_eq!(result.records.len(), 6);
        assert!(result.run_totals()[0] >= 0.0);
    }

    #[test]
    fn missing_files_surface_with_path() {
        let cfg = ExperimentConfig::for_domain(DomainSpec::Maze {
            path: "/nonexistent/maze.txt".into(),
        });
        match run_experiment(&cfg) {
            Err(ExperimentError::Io { path, .. }) => assert!(path.contains("nonexistent")),
            other => panic!("expected Io error, got {other:?}"),
        }
    }
}
