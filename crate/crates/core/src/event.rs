//! Event schema and the append-only, line-delimited log.
//!
//! A log file is UTF-8 JSON lines. The first line is a [`LogHeader`]; each
//! following line is one [`Event`] with a gapless sequence number starting
//! at 1 and a non-decreasing timestamp.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::LogError;
use crate::ids::{RequesterId, ReviewId, TaskId, WorkerId};
use crate::leveling::{Level, Rating};
use crate::market::{TaskPosting, TaskStatus};
use crate::review::{ConditionMode, ReviewTask, SubmissionKind, SubmissionRecord};

pub const LOG_SCHEMA: &str = "crowd-guild-event-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: String,
    pub version: u32,
    pub mode: ConditionMode,
    pub config: EngineConfig,
    /// Guild roster; everybody starts at level 1.
    pub workers: Vec<WorkerId>,
}

impl LogHeader {
    pub fn new(mode: ConditionMode, config: EngineConfig, workers: Vec<WorkerId>) -> Self {
        Self {
            schema: LOG_SCHEMA.to_string(),
            version: LOG_VERSION,
            mode,
            config,
            workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventBody {
    Submission {
        record: SubmissionRecord,
    },
    ReviewIssued {
        task: ReviewTask,
        author: WorkerId,
        reviewer: WorkerId,
    },
    ReviewSubmitted {
        review: ReviewId,
        reviewer: WorkerId,
        rating: Rating,
        predicted_acceptance: bool,
        feedback: String,
    },
    LevelChanged {
        worker: WorkerId,
        from: Level,
        to: Level,
    },
    /// What the author sees: no reviewer field.
    FeedbackDelivered {
        review: ReviewId,
        author: WorkerId,
        rating: Rating,
        predicted_acceptance: bool,
        feedback: String,
    },
    Payout {
        review: ReviewId,
        reviewer: WorkerId,
        amount: u64,
    },
    TaskPosted {
        posting: TaskPosting,
    },
    TaskRejected {
        task: TaskId,
        worker: WorkerId,
    },
    RequesterNotified {
        task: TaskId,
        requester: RequesterId,
        worker_level: Level,
    },
    TaskRemoved {
        task: TaskId,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::Submission { .. } => "submission",
            EventBody::ReviewIssued { .. } => "review-issued",
            EventBody::ReviewSubmitted { .. } => "review-submitted",
            EventBody::LevelChanged { .. } => "level-changed",
            EventBody::FeedbackDelivered { .. } => "feedback-delivered",
            EventBody::Payout { .. } => "payout",
            EventBody::TaskPosted { .. } => "task-posted",
            EventBody::TaskRejected { .. } => "task-rejected",
            EventBody::RequesterNotified { .. } => "requester-notified",
            EventBody::TaskRemoved { .. } => "task-removed",
        }
    }

    /// Checks payload constraints that do not depend on engine state.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            EventBody::Submission { record } => {
                if record.id.0 == 0 {
                    return Err("submission ids start at 1".into());
                }
                match record.kind {
                    SubmissionKind::Work if record.task.is_none() => Err("work submission without a task".into()),
                    SubmissionKind::Review { .. } if record.task.is_some() => {
                        Err("review submission must not reference a task".into())
                    }
                    _ => Ok(()),
                }
            }
            EventBody::ReviewIssued { task, author, reviewer } => {
                if task.payment == 0 {
                    Err("review payment must be positive".into())
                } else if author == reviewer {
                    Err("reviewer is the author".into())
                } else {
                    Ok(())
                }
            }
            EventBody::LevelChanged { from, to, .. } if from == to => Err("level change without a change".into()),
            EventBody::Payout { amount: 0, .. } => Err("zero payout".into()),
            EventBody::TaskPosted { posting } if posting.status != TaskStatus::Live => {
                Err("tasks are posted live".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub ts: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    header: LogHeader,
    events: Vec<Event>,
}

impl EventLog {
    pub fn new(header: LogHeader) -> Self {
        Self {
            header,
            events: Vec::new(),
        }
    }

    pub fn header(&self) -> &LogHeader {
        &self.header
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.events.last().map_or(0, |e| e.seq)
    }

    pub fn last_ts(&self) -> u64 {
        self.events.last().map_or(0, |e| e.ts)
    }

    pub fn append(&mut self, event: Event) -> Result<(), LogError> {
        let expected = self.last_seq() + 1;
        if event.seq != expected {
            return Err(LogError::SequenceGap {
                expected,
                got: event.seq,
            });
        }
        if event.ts < self.last_ts() {
            return Err(LogError::TimestampRegression {
                seq: event.seq,
                ts: event.ts,
                previous: self.last_ts(),
            });
        }
        event
            .body
            .validate()
            .map_err(|reason| LogError::MalformedPayload { seq: event.seq, reason })?;
        self.events.push(event);
        Ok(())
    }

    /// The first `len` events under the same header.
    pub fn prefix(&self, len: usize) -> EventLog {
        EventLog {
            header: self.header.clone(),
            events: self.events[..len.min(self.events.len())].to_vec(),
        }
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), LogError> {
        serde_json::to_writer(&mut out, &self.header).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        for event in &self.events {
            serde_json::to_writer(&mut out, event).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LogError> {
        let file = File::create(path)?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out)?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        Ok(())
    }

    /// Parses a log; errors name the offending 1-based line.
    pub fn read_from<R: BufRead>(input: R) -> Result<EventLog, LogError> {
        let mut lines = input.lines().enumerate();
        let header = loop {
            let Some((index, line)) = lines.next() else {
                return Err(LogError::MissingHeader);
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let header: LogHeader = serde_json::from_str(&line).map_err(|e| LogError::CorruptLine {
                line: index + 1,
                reason: format!("bad header: {e}"),
            })?;
            if header.schema != LOG_SCHEMA || header.version != LOG_VERSION {
                return Err(LogError::UnsupportedSchema {
                    schema: header.schema,
                    version: header.version,
                });
            }
            break header;
        };
        let mut log = EventLog::new(header);
        for (index, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |reason: String| LogError::CorruptLine {
                line: index + 1,
                reason,
            };
            let event: Event = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            log.append(event).map_err(|e| corrupt(e.to_string()))?;
        }
        Ok(log)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EventLog, LogError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
