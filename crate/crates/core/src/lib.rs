//! Reputation engine for crowd guilds.
//!
//! Workers are sampled for double-blind peer review, funded by a per-task tax,
//! and moved between levels by a moving average of the ratings they receive.
//! Every state change is an [`Event`] in an append-only log, so an
//! [`Engine`] can be rebuilt exactly from its log with [`replay`].
//!
//! Module map:
//! - [`leveling`]: rating scale, review window, thresholds, level transitions
//! - [`review`]: submission sampling, funding ledger, reviewer assignment
//! - [`market`]: level-targeted postings, feeds, wage stats, collective rejection
//! - [`event`]: event schema and the line-delimited log
//! - [`engine`]: the materialized state and the command surface

pub mod config;
pub mod engine;
pub mod error;
pub mod event;
pub mod fraction;
pub mod ids;
pub mod leveling;
pub mod market;
pub mod review;

pub use config::EngineConfig;
pub use engine::{replay, Engine, EngineState};
pub use error::{EngineError, Result};
pub use event::{Event, EventBody, EventLog, LogHeader};
pub use fraction::Fraction;
pub use ids::{RequesterId, ReviewId, SubmissionId, TaskId, WorkerId};
pub use leveling::{Level, LevelDelta, LevelThresholds, Rating, ReviewWindow, WorkerReputation};
pub use review::{ConditionMode, FundingLedger, ReviewResponse, ReviewTask, SubmissionRecord};
