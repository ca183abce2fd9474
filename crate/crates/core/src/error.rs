use thiserror::Error;

use crate::ids::{ReviewId, TaskId, WorkerId};
use crate::leveling::Level;

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LevelingError {
    #[error("window average {0} outside the rating scale [1, 4]")]
    AverageOutOfRange(String),
    #[error("invalid leveling thresholds: {0}")]
    InvalidThresholds(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoutingError {
    #[error("no eligible reviewer for review {0}")]
    NoEligibleReviewer(ReviewId),
    #[error("review {review} is assigned to {assigned}, not {submitted_by}")]
    ReviewerMismatch {
        review: ReviewId,
        assigned: WorkerId,
        submitted_by: WorkerId,
    },
    #[error("unknown or already answered review {0}")]
    UnknownReview(ReviewId),
    #[error("review feedback text is required")]
    EmptyFeedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketError {
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("task {0} is not live")]
    TaskNotLive(TaskId),
    #[error("worker {worker} at level {level} cannot reject task targeted at level {target}")]
    WrongLevel {
        worker: WorkerId,
        level: Level,
        target: Level,
    },
    #[error("task {task} is not in the feed of worker {worker}")]
    NotInFeed { task: TaskId, worker: WorkerId },
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("sequence gap: expected {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("timestamp went backwards at sequence {seq}: {ts} < {previous}")]
    TimestampRegression { seq: u64, ts: u64, previous: u64 },
    #[error("malformed event payload at sequence {seq}: {reason}")]
    MalformedPayload { seq: u64, reason: String },
    #[error("line {line}: {reason}")]
    CorruptLine { line: usize, reason: String },
    #[error("missing log header")]
    MissingHeader,
    #[error("unsupported log schema `{schema}` version {version}")]
    UnsupportedSchema { schema: String, version: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Leveling(#[from] LevelingError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("unknown worker {0}")]
    UnknownWorker(WorkerId),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("event {seq} inconsistent with state: {reason}")]
    Divergence { seq: u64, reason: String },
}
