//! Agent-based replication of a two-condition crowd-guild field experiment.
//!
//! Synthetic workers with a latent accuracy complete marketplace tasks
//! (some of them gold-standard tasks with known answers) and review each
//! other through the [`guild_core`] engine. In the guild condition ratings
//! drive levels and feedback; in the control condition they are only stored.
//! [`analysis`] then asks whether peer ratings track measured accuracy.

pub mod agent;
pub mod analysis;
pub mod config;
pub mod results;
pub mod run;

pub use agent::{answer_gold, quality_signal, rate_submission, GoldTask, WorkerAgent};
pub use analysis::{analyze, level_distribution, rating_histogram, AnalysisReport, ConditionSummary, Outcome};
pub use config::{ExperimentConfig, MarketParams, RatingModel};
pub use results::{load_results, read_results, save_results, write_results, AgentResult, ExperimentResult};
pub use run::{run_condition, run_experiment, ConditionRun};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] guild_core::EngineError),
    #[error(transparent)]
    Stats(#[from] guild_stats::StatsError),
    #[error("results table: {0}")]
    Table(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
