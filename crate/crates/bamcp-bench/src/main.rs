//! Command-line benchmark driver.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use bamcp::beliefs::ArmPrior;
use bamcp::gittins::{gittins_index, BetaArm};
use bamcp::grid::GridPrior;
use bamcp_bench::config::{parse_arms, parse_config_text, parse_switch, AlgoKind, DomainSpec, ExperimentConfig};
use bamcp_bench::csvio::{format_sig, write_csv};
use bamcp_bench::runner::{run_experiment, summarize};

#[derive(Parser)]
#[command(name = "bamcp-bench", about = "Bayes-adaptive Monte-Carlo planning benchmarks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write per-step records as CSV.
    Run(RunArgs),
    /// Run the same experiment at simulation budgets 10, 100, 1000, 10000.
    Sweep(RunArgs),
    /// Tabulate Gittins indices (and optionally planner agreement) over a
    /// Beta-parameter lattice.
    GittinsEval(GittinsArgs),
    /// Lazy-sampling and rollout-learning on/off matrix on one domain.
    MazeAblate(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Flat key = value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// double-loop | grid5 | grid10 | maze | bandit | infinite-grid
    #[arg(long)]
    domain: Option<String>,
    /// bamcp | bauct
    #[arg(long)]
    algo: Option<String>,
    /// Simulations per search call.
    #[arg(long)]
    sims: Option<u32>,
    #[arg(long)]
    steps: Option<u32>,
    #[arg(long)]
    runs: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// UCT exploration constant.
    #[arg(long = "c")]
    exploration_c: Option<f64>,
    /// Epsilon of the epsilon-greedy rollout policy.
    #[arg(long = "rollout-eps")]
    rollout_eps: Option<f64>,
    /// on | off
    #[arg(long)]
    lazy: Option<String>,
    /// on | off
    #[arg(long = "rollout-learn")]
    rollout_learn: Option<String>,
    /// Maze layout file (maze domain).
    #[arg(long = "maze-file")]
    maze_file: Option<PathBuf>,
    /// Transition-table override file (double-loop domain).
    #[arg(long = "override-file")]
    override_file: Option<PathBuf>,
    /// Bandit arms, e.g. det:0.5,beta:1:7.
    #[arg(long)]
    arms: Option<String>,
    /// Infinite-grid prior parameters.
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    /// Give the agent the row/column-swapped prior.
    #[arg(long = "swap-prior")]
    swap_prior: bool,
    /// Chain burn length per environment step (infinite grid).
    #[arg(long = "mh-burn")]
    mh_burn: Option<u32>,
    /// Write plan_ms as 0 for bitwise-reproducible output.
    #[arg(long = "no-timing")]
    no_timing: bool,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GittinsArgs {
    #[arg(long, default_value_t = 0.95)]
    gamma: f64,
    #[arg(long, default_value_t = 20)]
    alpha_max: u32,
    #[arg(long, default_value_t = 20)]
    beta_max: u32,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Known payout of the reference arm.
    #[arg(long, default_value_t = 0.5)]
    known: f64,
    /// If > 0, also run the planner per cell and report agreement.
    #[arg(long, default_value_t = 0)]
    sims: u32,
    #[arg(long, default_value_t = 50)]
    runs: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Look up a config-file value by flag name (hyphens normalized).
fn file_value<'m>(map: &'m BTreeMap<String, String>, key: &str) -> Option<&'m str> {
    map.get(&key.replace('-', "_")).map(String::as_str)
}

fn parse_from<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| anyhow!("bad value {value:?} for {key}"))
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            parse_config_text(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?
        }
        None => BTreeMap::new(),
    };

    let domain_name = args
        .domain
        .clone()
        .or_else(|| file_value(&file, "domain").map(str::to_string))
        .ok_or_else(|| anyhow!("--domain is required (or a domain key in the config file)"))?;

    let maze_file = args
        .maze_file
        .clone()
        .or_else(|| file_value(&file, "maze-file").map(PathBuf::from));
    let override_file = args
        .override_file
        .clone()
        .or_else(|| file_value(&file, "override-file").map(PathBuf::from));
    let arms_text = args
        .arms
        .clone()
        .or_else(|| file_value(&file, "arms").map(str::to_string));

    let prior_param = |cli: Option<f64>, key: &str, default: f64| -> Result<f64> {
        match (cli, file_value(&file, key)) {
            (Some(v), _) => Ok(v),
            (None, Some(text)) => parse_from(text, key),
            (None, None) => Ok(default),
        }
    };

    let domain = match domain_name.to_ascii_lowercase().as_str() {
        "double-loop" | "loop" => DomainSpec::DoubleLoop { override_path: override_file },
        "grid5" => DomainSpec::Grid5,
        "grid10" => DomainSpec::Grid10,
        "maze" => DomainSpec::Maze {
            path: maze_file.ok_or_else(|| anyhow!("the maze domain needs --maze-file"))?,
        },
        "bandit" => DomainSpec::Bandit {
            arms: parse_arms(
                arms_text.as_deref().unwrap_or("det:0.5,beta:1:1"),
            )
            .map_err(|e| anyhow!(e))?,
        },
        "infinite-grid" | "grid" => {
            let prior = GridPrior::new(
                prior_param(args.alpha1, "alpha1", 1.0)?,
                prior_param(args.beta1, "beta1", 2.0)?,
                prior_param(args.alpha2, "alpha2", 2.0)?,
                prior_param(args.beta2, "beta2", 1.0)?,
            );
            let swap = args.swap_prior
                || file_value(&file, "swap-prior")
                    .map(|v| parse_switch(v).map_err(|e| anyhow!(e)))
                    .transpose()?
                    .unwrap_or(false);
            DomainSpec::InfiniteGrid { prior, swap_prior: swap }
        }
        other => bail!("unknown domain {other:?}"),
    };

    let mut config = ExperimentConfig::for_domain(domain);

    macro_rules! setting {
        ($field:ident, $cli:expr, $key:literal) => {
            if let Some(v) = $cli {
                config.$field = v;
            } else if let Some(text) = file_value(&file, $key) {
                config.$field = parse_from(text, $key)?;
            }
        };
    }
    setting!(sims, args.sims, "sims");
    setting!(steps, args.steps, "steps");
    setting!(runs, args.runs, "runs");
    setting!(base_seed, args.seed, "seed");
    setting!(gamma, args.gamma, "gamma");
    setting!(exploration_c, args.exploration_c, "c");
    setting!(rollout_epsilon, args.rollout_eps, "rollout-eps");
    setting!(mh_burn, args.mh_burn, "mh-burn");

    if let Some(text) = &args.algo {
        config.algo = AlgoKind::parse(text).map_err(|e| anyhow!(e))?;
    } else if let Some(text) = file_value(&file, "algo") {
        config.algo = AlgoKind::parse(text).map_err(|e| anyhow!(e))?;
    }
    if let Some(text) = &args.lazy {
        config.lazy_sampling = parse_switch(text).map_err(|e| anyhow!(e))?;
    } else if let Some(text) = file_value(&file, "lazy") {
        config.lazy_sampling = parse_switch(text).map_err(|e| anyhow!(e))?;
    }
    if let Some(text) = &args.rollout_learn {
        config.rollout_learning = parse_switch(text).map_err(|e| anyhow!(e))?;
    } else if let Some(text) = file_value(&file, "rollout-learn") {
        config.rollout_learning = parse_switch(text).map_err(|e| anyhow!(e))?;
    }
    if args.no_timing
        || file_value(&file, "no-timing")
            .map(parse_switch)
            .transpose()
            .map_err(|e| anyhow!(e))?
            .unwrap_or(false)
    {
        config.measure_time = false;
    }

    config.validate().map_err(|e| anyhow!(e))?;
    Ok(config)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let config = resolve_config(args)?;
    let result = run_experiment(&config)?;
    let summary = summarize(&result)?;
    if let Some(path) = &args.out {
        write_csv(&result.records, path)?;
        println!("wrote {} records to {}", result.records.len(), path.display());
    }
    println!(
        "runs {} steps {} sims {}: total reward {} +/- {} (mean plan {} ms/step)",
        config.runs,
        config.steps,
        config.sims,
        format_sig(summary.mean),
        format_sig(summary.half_width),
        format_sig(result.mean_plan_ms()),
    );
    Ok(())
}

fn cmd_sweep(args: &RunArgs) -> Result<()> {
    let base = resolve_config(args)?;
    let mut lines = vec!["sims,mean,half_width,mean_plan_ms".to_string()];
    for sims in [10u32, 100, 1_000, 10_000] {
        let mut config = base.clone();
        config.sims = sims;
        let result = run_experiment(&config)?;
        let summary = summarize(&result)?;
        println!(
            "sims {:>6}: total reward {} +/- {} ({} ms/step)",
            sims,
            format_sig(summary.mean),
            format_sig(summary.half_width),
            format_sig(result.mean_plan_ms()),
        );
        lines.push(format!(
            "{},{},{},{}",
            sims,
            format_sig(summary.mean),
            format_sig(summary.half_width),
            format_sig(result.mean_plan_ms())
        ));
    }
    if let Some(path) = &args.out {
        std::fs::write(path, lines.join("\n") + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote sweep to {}", path.display());
    }
    Ok(())
}

fn cmd_gittins(args: &GittinsArgs) -> Result<()> {
    let cells: Vec<(u32, u32)> = (1..=args.alpha_max)
        .flat_map(|a| (1..=args.beta_max).map(move |b| (a, b)))
        .collect();
    let rows: Vec<String> = cells
        .par_iter()
        .map(|&(a, b)| -> Result<String> {
            let index = gittins_index(BetaArm::new(a as f64, b as f64), args.gamma, args.tol)?;
            let optimal = if index > args.known { "stochastic" } else { "deterministic" };
            let agreement = if args.sims > 0 {
                let arms = vec![
                    ArmPrior::Known(args.known),
                    ArmPrior::Beta { alpha: a as f64, beta: b as f64 },
                ];
                let mut config = ExperimentConfig::for_domain(DomainSpec::Bandit { arms });
                config.sims = args.sims;
                config.steps = 1;
                config.runs = args.runs;
                config.gamma = args.gamma;
                config.base_seed = args.seed + (a as u64) * 1000 + b as u64;
                config.measure_time = false;
                let result = run_experiment(&config)?;
                // The first step's reward identifies the pulled arm only for
                // deterministic arms; count decisions via per-run rewards.
                let oracle_stochastic = index > args.known;
                let agree = result
                    .records
                    .iter()
                    .filter(|r| r.step == 0)
                    .filter(|r| {
                        let pulled_known = r.reward == args.known;
                        pulled_known != oracle_stochastic
                    })
                    .count();
                format!("{:.3}", agree as f64 / args.runs as f64)
            } else {
                String::new()
            };
            Ok(format!("{a},{b},{},{optimal},{agreement}", format_sig(index)))
        })
        .collect::<Result<_>>()?;

    let mut out = String::from("alpha,beta,index,optimal_arm,planner_agreement\n");
    out.push_str(&rows.join("\n"));
    out.push('\n');
    match &args.out {
        Some(path) => {
            std::fs::write(path, &out).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {} cells to {}", cells.len(), path.display());
        }
        None => print!("{out}"),
    }
    Ok(())
}

fn cmd_maze_ablate(args: &RunArgs) -> Result<()> {
    let base = resolve_config(args)?;
    let mut lines = vec!["lazy,rollout_learn,mean,half_width,mean_plan_ms".to_string()];
    for (lazy, learn) in [(true, true), (true, false), (false, true), (false, false)] {
        let mut config = base.clone();
        config.lazy_sampling = lazy;
        config.rollout_learning = learn;
        let result = run_experiment(&config)?;
        let summary = summarize(&result)?;
        let row = format!(
            "{},{},{},{},{}",
            if lazy { "on" } else { "off" },
            if learn { "on" } else { "off" },
            format_sig(summary.mean),
            format_sig(summary.half_width),
            format_sig(result.mean_plan_ms())
        );
        println!("{row}");
        lines.push(row);
    }
    if let Some(path) = &args.out {
        std::fs::write(path, lines.join("\n") + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote ablation to {}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::GittinsEval(args) => cmd_gittins(args),
        Command::MazeAblate(args) => cmd_maze_ablate(args),
    }
}
