//! Experiment configuration: domains, planner knobs, and the flat
//! `key = value` config-file format mirroring the CLI flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use bamcp::beliefs::ArmPrior;
use bamcp::grid::GridPrior;

/// Search algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoKind {
    Bamcp,
    BaUct,
}

impl AlgoKind {
    pub fn parse(text: &str) -> Result<Self, String> {
        match text.trim().to_ascii_lowercase().as_str() {
            "bamcp" => Ok(AlgoKind::Bamcp),
            "bauct" | "ba-uct" => Ok(AlgoKind::BaUct),
            other => Err(format!("unknown algorithm {other:?} (expected bamcp or bauct)")),
        }
    }
}

/// Benchmark domain plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    DoubleLoop { override_path: Option<PathBuf> },
    Grid5,
    Grid10,
    Maze { path: PathBuf },
    Bandit { arms: Vec<ArmPrior> },
    InfiniteGrid { prior: GridPrior, swap_prior: bool },
}

impl DomainSpec {
    /// Episode length used in the benchmarks.
    pub fn default_steps(&self) -> u32 {
        match self {
            DomainSpec::DoubleLoop { .. } | DomainSpec::Grid5 => 1000,
            DomainSpec::Grid10 => 2000,
            DomainSpec::Maze { .. } => 20_000,
            DomainSpec::Bandit { .. } => 300,
            DomainSpec::InfiniteGrid { .. } => 200,
        }
    }

    /// Benchmark discount factor: 0.97 on the infinite grid, 0.95 elsewhere.
    pub fn default_gamma(&self) -> f64 {
        match self {
            DomainSpec::InfiniteGrid { .. } => 0.97,
            _ => 0.95,
        }
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub algo: AlgoKind,
    pub sims: u32,
    pub steps: u32,
    pub runs: u32,
    pub base_seed: u64,
    pub gamma: f64,
    pub exploration_c: f64,
    pub rollout_epsilon: f64,
    /// Numerical precision for the simulation depth cutoff.
    pub precision: f64,
    pub lazy_sampling: bool,
    pub rollout_learning: bool,
    /// Chain burn length per environment step (infinite grid only).
    pub mh_burn: u32,
    /// Record wall-clock planning times. Disable for bitwise-reproducible
    /// output files.
    pub measure_time: bool,
}

impl ExperimentConfig {
    /// Benchmark defaults for a domain: `c = 3`, epsilon-greedy 0.5 rollout
    /// policy, lazy sampling and rollout learning on.
    pub fn for_domain(domain: DomainSpec) -> Self {
        let steps = domain.default_steps();
        let gamma = domain.default_gamma();
        Self {
            domain,
            algo: AlgoKind::Bamcp,
            sims: 10_000,
            steps,
            runs: 1,
            base_seed: 1,
            gamma,
            exploration_c: 3.0,
            rollout_epsilon: 0.5,
            precision: bamcp::mdp::DEFAULT_EPSILON,
            lazy_sampling: true,
            rollout_learning: true,
            mh_burn: 50,
            measure_time: true,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.runs < 1 {
            return Err("runs must be >= 1".into());
        }
        if self.steps < 1 {
            return Err("steps must be >= 1".into());
        }
        if self.sims < 1 {
            return Err("sims must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err("gamma must lie in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.rollout_epsilon) {
            return Err("rollout-eps must lie in [0, 1]".into());
        }
        if self.precision <= 0.0 {
            return Err("precision must be positive".into());
        }
        if matches!(self.domain, DomainSpec::InfiniteGrid { .. }) && self.algo == AlgoKind::BaUct {
            return Err("the infinite grid supports only the bamcp algorithm".into());
        }
        Ok(())
    }
}

/// Parse an arm list: comma-separated `det:<reward>` and
/// `beta:<alpha>:<beta>` entries, e.g. `det:0.5,beta:1:7`.
pub fn parse_arms(text: &str) -> Result<Vec<ArmPrior>, String> {
    let mut arms = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let fields: Vec<&str> = part.split(':').collect();
        match fields.as_slice() {
            ["det", r] => {
                let r: f64 = r.parse().map_err(|_| format!("bad reward in {part:?}"))?;
                if !r.is_finite() {
                    return Err(format!("non-finite reward in {part:?}"));
                }
                arms.push(ArmPrior::Known(r));
            }
            ["beta", a, b] => {
                let alpha: f64 = a.parse().map_err(|_| format!("bad alpha in {part:?}"))?;
                let beta: f64 = b.parse().map_err(|_| format!("bad beta in {part:?}"))?;
                if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return Err(format!("Beta parameters must be positive in {part:?}"));
                }
                arms.push(ArmPrior::Beta { alpha, beta });
            }
            _ => return Err(format!("bad arm spec {part:?} (expected det:<r> or beta:<a>:<b>)")),
        }
    }
    if arms.is_empty() {
        return Err("arm list is empty".into());
    }
    if arms.len() > 64 {
        return Err(format!("too many arms: {}", arms.len()));
    }
    Ok(arms)
}

/// Parse the flat config-file format: one `key = value` pair per line,
/// `#` comments, hyphens and underscores in keys interchangeable. Values
/// stay strings; the CLI layer interprets them exactly like its flags.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected 'key = value'", idx + 1))?;
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("line {}: bad key {key:?}", idx + 1));
        }
        let value = value.trim().to_string();
        if value.is_empty() {
            return Err(format!("line {}: empty value for {key}", idx + 1));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(format!("line {}: duplicate key {key}", idx + 1));
        }
    }
    Ok(map)
}

/// Parse an `on`/`off` switch (also accepts true/false/1/0).
pub fn parse_switch(text: &str) -> Result<bool, String> {
    match text.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        other => Err(format!("expected on or off, got {other:?}")),
    }
}
