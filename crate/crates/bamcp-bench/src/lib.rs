//! Experiment harness for the `bamcp` planner: seeded agent/environment
//! loops, per-step records, summary statistics, and CSV emission.

pub mod config;
pub mod csvio;
pub mod runner;

pub use config::{parse_arms, parse_config_text, AlgoKind, DomainSpec, ExperimentConfig};
pub use csvio::{format_sig, read_csv, write_csv, CSV_HEADER};
pub use runner::{run_experiment, summarize, ExperimentError, ExperimentResult, StepRecord, Summary};
