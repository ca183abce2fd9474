//! The materialized engine state and its command surface.
//!
//! State only changes in [`EngineState::apply`]. Commands on [`Engine`]
//! validate their input, turn it into events and push every event through
//! `apply` before appending it to the log, so [`replay`] of the log rebuilds
//! the same state.
//!
//! Most consequences of an event are deterministic (a payout after a review,
//! a removal after the deciding rejection). `apply` queues those as
//! expectations that the next events in the log must match exactly. The
//! only choices an event cannot derive are the review target and reviewer;
//! for those the queue holds an issuance slot that the next event must fill
//! with a target and reviewer that satisfy the assignment rules.

use std::collections::{BTreeMap, VecDeque};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{EngineError, MarketError, Result, RoutingError};
use crate::event::{Event, EventBody, EventLog, LogHeader};
use crate::ids::{RequesterId, ReviewId, SubmissionId, TaskId, WorkerId};
use crate::leveling::{Level, Rating, ReviewOutcome, WorkerReputation};
use crate::market::{recommend_wage, Market, RejectEffect, TaskPosting, TaskStatus};
use crate::review::{
    eligible_reviewers, ConditionMode, FundingLedger, ReviewKind, ReviewResponse, ReviewTask, ReviewerBand,
    SubmissionKind, SubmissionRecord,
};

/// ChaCha stream used for review draws and reviewer assignment.
pub const ASSIGNMENT_STREAM: u64 = 0x67_7569_6c64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenReview {
    pub task: ReviewTask,
    pub author: WorkerId,
    pub reviewer: WorkerId,
    pub band: ReviewerBand,
    pub answered: bool,
}

/// Feedback as the author receives it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub review: ReviewId,
    pub rating: Rating,
    pub predicted_acceptance: bool,
    pub text: String,
}

/// Ratings received, kept in both conditions for analysis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceivedRatings {
    pub work_sum: u64,
    pub work_count: u64,
    pub meta_sum: u64,
    pub meta_count: u64,
}

impl ReceivedRatings {
    pub fn mean_work_rating(&self) -> Option<f64> {
        (self.work_count > 0).then(|| self.work_sum as f64 / self.work_count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "expect", rename_all = "kebab-case")]
pub enum Expected {
    Exact { body: EventBody },
    Issuance { author: WorkerId },
}

/// Everything the log determines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineState {
    mode: ConditionMode,
    config: EngineConfig,
    reputations: BTreeMap<WorkerId, WorkerReputation>,
    ledger: FundingLedger,
    market: Market,
    open_reviews: BTreeMap<ReviewId, OpenReview>,
    inbox: BTreeMap<WorkerId, Vec<Feedback>>,
    received: BTreeMap<WorkerId, ReceivedRatings>,
    wages_earned: BTreeMap<WorkerId, u64>,
    review_pay: BTreeMap<WorkerId, u64>,
    notices: BTreeMap<RequesterId, u64>,
    escrow: u64,
    paid_out: u64,
    next_submission: u64,
    next_review: u64,
    next_task: u64,
    expected: VecDeque<Expected>,
    last_seq: u64,
    last_ts: u64,
}

/// A review target that can actually be reviewed right now.
struct Viable<'a> {
    record: &'a SubmissionRecord,
    band: ReviewerBand,
    reviewers: Vec<WorkerId>,
}

impl EngineState {
    pub fn new(mode: ConditionMode, config: EngineConfig, workers: &[WorkerId]) -> Result<Self> {
        config.validate()?;
        let reputations = workers
            .iter()
            .map(|&w| (w, WorkerReputation::new(w, config.leveling.window)))
            .collect();
        Ok(Self {
            mode,
            ledger: FundingLedger::new(config.tax_rate, config.review_trigger),
            market: Market::new(config.rejection),
            config,
            reputations,
            open_reviews: BTreeMap::new(),
            inbox: BTreeMap::new(),
            received: BTreeMap::new(),
            wages_earned: BTreeMap::new(),
            review_pay: BTreeMap::new(),
            notices: BTreeMap::new(),
            escrow: 0,
            paid_out: 0,
            next_submission: 1,
            next_review: 1,
            next_task: 1,
            expected: VecDeque::new(),
            last_seq: 0,
            last_ts: 0,
        })
    }

    pub fn mode(&self) -> ConditionMode {
        self.mode
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn workers(&self) -> impl Iterator<Item = WorkerId> + '_ {
        self.reputations.keys().copied()
    }

    pub fn reputation(&self, worker: WorkerId) -> Option<&WorkerReputation> {
        self.reputations.get(&worker)
    }

    pub fn reputations(&self) -> impl Iterator<Item = &WorkerReputation> {
        self.reputations.values()
    }

    pub fn level(&self, worker: WorkerId) -> Result<Level> {
        self.reputations
            .get(&worker)
            .map(|r| r.level())
            .ok_or(EngineError::UnknownWorker(worker))
    }

    /// `(worker, level)` for every member, sorted by id.
    pub fn roster(&self) -> Vec<(WorkerId, Level)> {
        self.reputations.iter().map(|(w, r)| (*w, r.level())).collect()
    }

    pub fn level_population(&self, level: Level) -> u64 {
        self.reputations.values().filter(|r| r.level() == level).count() as u64
    }

    pub fn ledger(&self) -> &FundingLedger {
        &self.ledger
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn open_reviews(&self) -> impl Iterator<Item = &OpenReview> {
        self.open_reviews.values()
    }

    pub fn open_review(&self, review: ReviewId) -> Option<&OpenReview> {
        self.open_reviews.get(&review)
    }

    pub fn inbox(&self, worker: WorkerId) -> &[Feedback] {
        self.inbox.get(&worker).map_or(&[], Vec::as_slice)
    }

    pub fn received(&self, worker: WorkerId) -> ReceivedRatings {
        self.received.get(&worker).copied().unwrap_or_default()
    }

    pub fn wages_earned(&self, worker: WorkerId) -> u64 {
        self.wages_earned.get(&worker).copied().unwrap_or(0)
    }

    pub fn review_pay(&self, worker: WorkerId) -> u64 {
        self.review_pay.get(&worker).copied().unwrap_or(0)
    }

    pub fn notices(&self, requester: RequesterId) -> u64 {
        self.notices.get(&requester).copied().unwrap_or(0)
    }

    /// Review funding handed out but not yet paid to a reviewer.
    pub fn escrow(&self) -> u64 {
        self.escrow
    }

    pub fn paid_out(&self) -> u64 {
        self.paid_out
    }

    pub fn is_settled(&self) -> bool {
        self.expected.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn recommend_wage(&self, level: Level) -> Ratio<u128> {
        recommend_wage(self.market.wages(), level, self.config.fallback_wage_per_hour)
    }

    pub fn feed(&self, worker: WorkerId) -> Result<Vec<&TaskPosting>> {
        Ok(self.market.feed(worker, self.level(worker)?))
    }

    /// Taxes collected equal payouts plus escrow plus accrued balances.
    pub fn ledger_balances(&self) -> bool {
        self.ledger.taxes_collected() == self.paid_out + self.escrow + self.ledger.total_accrued()
            && self.ledger.review_funding() == self.paid_out + self.escrow
    }

    fn divergence(&self, seq: u64, reason: impl Into<String>) -> EngineError {
        EngineError::Divergence {
            seq,
            reason: reason.into(),
        }
    }

    fn viable_targets(&self, author: WorkerId) -> Vec<Viable<'_>> {
        let Some(pool) = self.ledger.due_pool(author) else {
            return Vec::new();
        };
        if self.ledger.accrued(author) == 0 {
            return Vec::new();
        }
        let Ok(level) = self.level(author) else {
            return Vec::new();
        };
        let roster = self.roster();
        pool.iter()
            .filter(|record| !record.opted_out)
            .filter_map(|record| {
                let kind = review_kind(record);
                eligible_reviewers(kind, author, level, &roster).map(|(band, reviewers)| Viable {
                    record,
                    band,
                    reviewers,
                })
            })
            .collect()
    }

    /// Validates `event` against the current state and applies it.
    pub fn apply(&mut self, event: &Event) -> Result<()> {
        let seq = event.seq;
        if seq != self.last_seq + 1 {
            return Err(self.divergence(seq, format!("expected sequence {}", self.last_seq + 1)));
        }
        if event.ts < self.last_ts {
            return Err(self.divergence(seq, "timestamp went backwards"));
        }
        event.body.validate().map_err(|reason| self.divergence(seq, reason))?;

        let fulfils_expectation = !self.expected.is_empty();
        match self.expected.front() {
            Some(Expected::Exact { body }) => {
                if *body != event.body {
                    return Err(self.divergence(seq, format!("expected {} event {:?}", body.kind(), body)));
                }
            }
            Some(Expected::Issuance { author }) => match &event.body {
                EventBody::ReviewIssued { author: issued_for, .. } if issued_for == author => {}
                other => {
                    return Err(self.divergence(
                        seq,
                        format!("expected review issuance for {author}, got {}", other.kind()),
                    ))
                }
            },
            None => {
                let primary = matches!(
                    &event.body,
                    EventBody::Submission { record } if record.kind == SubmissionKind::Work
                ) || matches!(
                    &event.body,
                    EventBody::TaskPosted { .. } | EventBody::TaskRejected { .. } | EventBody::ReviewSubmitted { .. }
                );
                if !primary {
                    return Err(self.divergence(seq, format!("unexpected {} event", event.body.kind())));
                }
            }
        }

        match &event.body {
            EventBody::Submission { record } => self.apply_submission(seq, event.ts, record)?,
            EventBody::ReviewIssued { task, author, reviewer } => {
                self.apply_review_issued(seq, task, *author, *reviewer)?
            }
            EventBody::ReviewSubmitted {
                review,
                reviewer,
                rating,
                predicted_acceptance,
                feedback,
            } => {
                let response = ReviewResponse {
                    reviewer: *reviewer,
                    rating: *rating,
                    predicted_acceptance: *predicted_acceptance,
                    feedback: feedback.clone(),
                };
                self.apply_review_submitted(event.ts, *review, &response)?
            }
            EventBody::LevelChanged { .. } => {}
            EventBody::FeedbackDelivered {
                review,
                author,
                rating,
                predicted_acceptance,
                feedback,
            } => {
                self.inbox.entry(*author).or_default().push(Feedback {
                    review: *review,
                    rating: *rating,
                    predicted_acceptance: *predicted_acceptance,
                    text: feedback.clone(),
                });
            }
            EventBody::Payout {
                review,
                reviewer,
                amount,
            } => {
                self.open_reviews.remove(review);
                self.escrow -= amount;
                self.paid_out += amount;
                *self.review_pay.entry(*reviewer).or_default() += amount;
            }
            EventBody::TaskPosted { posting } => {
                if posting.id.0 != self.next_task {
                    return Err(self.divergence(seq, format!("expected task id t{}", self.next_task)));
                }
                if posting.posted_at != event.ts {
                    return Err(self.divergence(seq, "posting time differs from event time"));
                }
                self.market.post(posting.clone());
                self.next_task += 1;
            }
            EventBody::TaskRejected { task, worker } => self.apply_task_rejected(*task, *worker)?,
            EventBody::RequesterNotified { requester, .. } => {
                *self.notices.entry(*requester).or_default() += 1;
            }
            EventBody::TaskRemoved { task } => self.market.remove(*task)?,
        }

        if fulfils_expectation {
            self.expected.pop_front();
        }
        self.last_seq = seq;
        self.last_ts = event.ts;
        Ok(())
    }

    fn apply_submission(&mut self, seq: u64, ts: u64, record: &SubmissionRecord) -> Result<()> {
        if record.id.0 != self.next_submission {
            return Err(self.divergence(seq, format!("expected submission id s{}", self.next_submission)));
        }
        if record.timestamp != ts {
            return Err(self.divergence(seq, "submission time differs from event time"));
        }
        let level = self.level(record.worker)?;
        if self.ledger.is_due(record.worker) {
            return Err(self.divergence(seq, "submission while a review draw is outstanding"));
        }
        let mut level_work = None;
        if let Some(task) = record.task {
            let posting = self.market.posting(task).ok_or(MarketError::UnknownTask(task))?;
            if !self.market.in_feed(record.worker, level, task) {
                return Err(MarketError::NotInFeed {
                    task,
                    worker: record.worker,
                }
                .into());
            }
            if record.wage != posting.price || record.opted_out != posting.opted_out_of_review {
                return Err(self.divergence(seq, "submission terms differ from the posting"));
            }
            if posting.target_level == level {
                level_work = Some(level);
            }
        }

        self.next_submission += 1;
        if let Some(level) = level_work {
            self.market.record_work(level, record.wage, record.work_seconds);
        }
        if record.kind == SubmissionKind::Work {
            *self.wages_earned.entry(record.worker).or_default() += record.wage;
        }
        if self.ledger.accrue(record).due {
            if self.viable_targets(record.worker).is_empty() {
                self.ledger.settle_carried(record.worker);
            } else {
                self.expected.push_back(Expected::Issuance { author: record.worker });
            }
        }
        Ok(())
    }

    fn apply_review_issued(&mut self, seq: u64, task: &ReviewTask, author: WorkerId, reviewer: WorkerId) -> Result<()> {
        if task.id.0 != self.next_review {
            return Err(self.divergence(seq, format!("expected review id r{}", self.next_review)));
        }
        let viable = self.viable_targets(author);
        let Some(choice) = viable.iter().find(|v| v.record.id == task.target) else {
            return Err(self.divergence(seq, format!("{} is not a viable review target", task.target)));
        };
        if !choice.reviewers.contains(&reviewer) {
            return Err(self.divergence(seq, format!("{reviewer} may not review this submission")));
        }
        let expected_task =
            ReviewTask::for_submission(task.id, choice.record, self.level(author)?, self.ledger.accrued(author));
        if expected_task != *task {
            return Err(self.divergence(seq, "review task does not match the drawn submission"));
        }
        let band = choice.band;
        let payment = self.ledger.settle_issued(author);
        self.escrow += payment;
        self.next_review += 1;
        self.open_reviews.insert(
            task.id,
            OpenReview {
                task: task.clone(),
                author,
                reviewer,
                band,
                answered: false,
            },
        );
        Ok(())
    }

    fn apply_review_submitted(&mut self, ts: u64, review: ReviewId, response: &ReviewResponse) -> Result<()> {
        let open = self
            .open_reviews
            .get(&review)
            .filter(|o| !o.answered)
            .ok_or(RoutingError::UnknownReview(review))?;
        if open.reviewer != response.reviewer {
            return Err(RoutingError::ReviewerMismatch {
                review,
                assigned: open.reviewer,
                submitted_by: response.reviewer,
            }
            .into());
        }
        response.validate(self.config.allow_empty_feedback)?;
        let (author, payment, kind) = (open.author, open.task.payment, open.task.kind);

        self.open_reviews.get_mut(&review).expect("checked above").answered = true;
        let tally = self.received.entry(author).or_default();
        match kind {
            ReviewKind::WorkReview => {
                tally.work_sum += response.rating.numeric() as u64;
                tally.work_count += 1;
            }
            ReviewKind::MetaReview => {
                tally.meta_sum += response.rating.numeric() as u64;
                tally.meta_count += 1;
            }
        }

        if self.mode == ConditionMode::Guild {
            let policy = self.config.leveling;
            let reputation = self.reputations.get_mut(&author).expect("authors are members");
            if let ReviewOutcome::Changed(change) = reputation.record_review(response.rating, ts, &policy) {
                self.expected.push_back(Expected::Exact {
                    body: EventBody::LevelChanged {
                        worker: change.worker,
                        from: change.from,
                        to: change.to,
                    },
                });
            }
            self.expected.push_back(Expected::Exact {
                body: EventBody::FeedbackDelivered {
                    review,
                    author,
                    rating: response.rating,
                    predicted_acceptance: response.predicted_acceptance,
                    feedback: response.feedback.clone(),
                },
            });
        }
        self.expected.push_back(Expected::Exact {
            body: EventBody::Payout {
                review,
                reviewer: response.reviewer,
                amount: payment,
            },
        });
        self.expected.push_back(Expected::Exact {
            body: EventBody::Submission {
                record: SubmissionRecord {
                    id: SubmissionId(self.next_submission),
                    worker: response.reviewer,
                    task: None,
                    wage: payment,
                    work_seconds: 0,
                    timestamp: ts,
                    opted_out: false,
                    kind: SubmissionKind::Review { review },
                    content: response.anonymized_content(),
                },
            },
        });
        Ok(())
    }

    fn apply_task_rejected(&mut self, task: TaskId, worker: WorkerId) -> Result<()> {
        let level = self.level(worker)?;
        let posting = self.market.posting(task).ok_or(MarketError::UnknownTask(task))?;
        let population = self.level_population(posting.target_level);
        match self.market.reject(task, worker, level, population)? {
            RejectEffect::Duplicate => Err(EngineError::Divergence {
                seq: self.last_seq + 1,
                reason: format!("{worker} already rejected {task}"),
            }),
            RejectEffect::Rejected { requester, removed, .. } => {
                self.expected.push_back(Expected::Exact {
                    body: EventBody::RequesterNotified {
                        task,
                        requester,
                        worker_level: level,
                    },
                });
                if removed {
                    self.expected.push_back(Expected::Exact {
                        body: EventBody::TaskRemoved { task },
                    });
                }
                Ok(())
            }
        }
    }
}

fn review_kind(record: &SubmissionRecord) -> ReviewKind {
    match record.kind {
        SubmissionKind::Work => ReviewKind::WorkReview,
        SubmissionKind::Review { .. } => ReviewKind::MetaReview,
    }
}

/// Rebuilds engine state from a log.
pub fn replay(log: &EventLog, config: &EngineConfig) -> Result<EngineState> {
    let header = log.header();
    let mut state = EngineState::new(header.mode, config.clone(), &header.workers)?;
    for event in log.events() {
        state.apply(event)?;
    }
    Ok(state)
}

/// What a completed unit of work set in motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkReceipt {
    pub submission: SubmissionId,
    pub review: Option<IssuedTo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IssuedTo {
    pub review: ReviewId,
    pub reviewer: WorkerId,
}

/// Live engine: state, log and the assignment RNG.
#[derive(Debug, Clone)]
pub struct Engine {
    state: EngineState,
    log: EventLog,
    rng: ChaCha8Rng,
}

impl Engine {
    pub fn new(mode: ConditionMode, config: EngineConfig, workers: Vec<WorkerId>, seed: u64) -> Result<Self> {
        let state = EngineState::new(mode, config.clone(), &workers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ASSIGNMENT_STREAM);
        Ok(Self {
            state,
            log: EventLog::new(LogHeader::new(mode, config, workers)),
            rng,
        })
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_parts(self) -> (EngineState, EventLog) {
        (self.state, self.log)
    }

    fn emit(&mut self, ts: u64, body: EventBody) -> Result<()> {
        let event = Event {
            seq: self.log.last_seq() + 1,
            ts,
            body,
        };
        self.state.apply(&event)?;
        self.log.append(event)?;
        Ok(())
    }

    /// Emits every queued consequence, drawing review targets and reviewers
    /// where the queue asks for an issuance.
    fn settle(&mut self, ts: u64) -> Result<Vec<IssuedTo>> {
        let mut issued = Vec::new();
        while let Some(next) = self.state.expected.front().cloned() {
            match next {
                Expected::Exact { body } => self.emit(ts, body)?,
                Expected::Issuance { author } => {
                    let (task, reviewer) = {
                        let viable = self.state.viable_targets(author);
                        let choice = &viable[self.rng.random_range(0..viable.len())];
                        let reviewer = choice.reviewers[self.rng.random_range(0..choice.reviewers.len())];
                        let task = ReviewTask::for_submission(
                            ReviewId(self.state.next_review),
                            choice.record,
                            self.state.level(author)?,
                            self.state.ledger.accrued(author),
                        );
                        (task, reviewer)
                    };
                    issued.push(IssuedTo {
                        review: task.id,
                        reviewer,
                    });
                    self.emit(ts, EventBody::ReviewIssued { task, author, reviewer })?;
                }
            }
        }
        Ok(issued)
    }

    pub fn post_task(
        &mut self,
        requester: RequesterId,
        target_level: Level,
        price: u64,
        estimated_seconds: u64,
        opted_out_of_review: bool,
        ts: u64,
    ) -> Result<TaskId> {
        let id = TaskId(self.state.next_task);
        let posting = TaskPosting {
            id,
            requester,
            target_level,
            price,
            estimated_seconds,
            opted_out_of_review,
            status: TaskStatus::Live,
            posted_at: ts,
        };
        self.emit(ts, EventBody::TaskPosted { posting })?;
        Ok(id)
    }

    /// Records one unit of work on a posting from the worker's feed.
    pub fn complete_work(
        &mut self,
        worker: WorkerId,
        task: TaskId,
        content: String,
        work_seconds: u64,
        ts: u64,
    ) -> Result<WorkReceipt> {
        let posting = self.state.market.posting(task).ok_or(MarketError::UnknownTask(task))?;
        let record = SubmissionRecord {
            id: SubmissionId(self.state.next_submission),
            worker,
            task: Some(task),
            wage: posting.price,
            work_seconds,
            timestamp: ts,
            opted_out: posting.opted_out_of_review,
            kind: SubmissionKind::Work,
            content,
        };
        let submission = record.id;
        self.emit(ts, EventBody::Submission { record })?;
        let review = self.settle(ts)?.into_iter().next();
        Ok(WorkReceipt { submission, review })
    }

    /// Accepts the assigned reviewer's answer; returns reviews issued as a
    /// consequence (a meta-review draw on the reviewer's own pool).
    pub fn submit_review(&mut self, review: ReviewId, response: ReviewResponse, ts: u64) -> Result<Vec<IssuedTo>> {
        self.emit(
            ts,
            EventBody::ReviewSubmitted {
                review,
                reviewer: response.reviewer,
                rating: response.rating,
                predicted_acceptance: response.predicted_acceptance,
                feedback: response.feedback,
            },
        )?;
        self.settle(ts)
    }

    /// Rejects a posting from the worker's own feed. Repeat rejections are
    /// no-ops and leave no event.
    pub fn reject_task(&mut self, worker: WorkerId, task: TaskId, ts: u64) -> Result<RejectEffect> {
        self.state.level(worker)?;
        let posting = self.state.market.posting(task).ok_or(MarketError::UnknownTask(task))?;
        if !posting.is_live() {
            return Err(MarketError::TaskNotLive(task).into());
        }
        if self.state.market.has_rejected(worker, task) {
            return Ok(RejectEffect::Duplicate);
        }
        let population = self.state.level_population(posting.target_level);
        let required = self.state.market.rule().required(population);
        self.emit(ts, EventBody::TaskRejected { task, worker })?;
        self.settle(ts)?;
        let tally = self.state.market.tally(task).expect("tally exists after a rejection");
        Ok(RejectEffect::Rejected {
            requester: self.state.market.posting(task).expect("posting exists").requester,
            count: tally.count(),
            required,
            removed: !self.state.market.posting(task).expect("posting exists").is_live(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leveling::Rating;

    fn engine(mode: ConditionMode, workers: u64) -> Engine {
        Engine::new(mode, EngineConfig::default(), (1..=workers).map(WorkerId).collect(), 9).unwrap()
    }

    fn respond(reviewer: WorkerId, rating: Rating) -> ReviewResponse {
        ReviewResponse {
            reviewer,
            rating,
            predicted_acceptance: true,
            feedback: "I like the care taken; I wish it were shorter".into(),
        }
    }

    /// Runs ten work units for `worker` and returns the review they trigger.
    fn ten_units(engine: &mut Engine, worker: WorkerId, task: TaskId, ts: &mut u64) -> IssuedTo {
        let mut issued = None;
        for _ in 0..10 {
            *ts += 1;
            let receipt = engine
                .complete_work(worker, task, "label: cat".into(), 30, *ts)
                .unwrap();
            issued = issued.or(receipt.review);
        }
        issued.expect("tenth unit triggers a review")
    }

    #[test]
    fn empty_log_replays_to_level_one() {
        let engine = engine(ConditionMode::Guild, 3);
        let state = replay(engine.log(), &EngineConfig::default()).unwrap();
        assert_eq!(state, *engine.state());
        assert!(state.roster().iter().all(|(_, level)| *level == Level::FLOOR));
    }

    #[test]
    fn guild_review_flows_back_to_author() {
        let mut engine = engine(ConditionMode::Guild, 2);
        let task = engine
            .post_task(RequesterId(1), Level::FLOOR, 1000, 60, false, 0)
            .unwrap();
        let mut ts = 0;
        let issued = ten_units(&mut engine, WorkerId(1), task, &mut ts);
        assert_eq!(issued.reviewer, WorkerId(2));
        assert_eq!(engine.state().escrow(), 1000);

        engine
            .submit_review(issued.review, respond(WorkerId(2), Rating::AtPar), ts)
            .unwrap();
        let state = engine.state();
        let rep = state.reputation(WorkerId(1)).unwrap();
        assert_eq!(rep.window().ratings().collect::<Vec<_>>(), [2]);
        assert_eq!(state.inbox(WorkerId(1)).len(), 1);
        assert_eq!(state.review_pay(WorkerId(2)), 1000);
        assert_eq!(state.escrow(), 0);
        assert!(state.ledger_balances());
        // The review itself joined the reviewer's pool, taxed at 10%.
        assert_eq!(state.ledger().accrued(WorkerId(2)), 100);
    }

    #[test]
    fn control_reviews_leave_reputation_alone() {
        let mut engine = engine(ConditionMode::Control, 2);
        let task = engine
            .post_task(RequesterId(1), Level::FLOOR, 1000, 60, false, 0)
            .unwrap();
        let mut ts = 0;
        let issued = ten_units(&mut engine, WorkerId(1), task, &mut ts);
        let before = engine.state().reputation(WorkerId(1)).unwrap().clone();
        engine
            .submit_review(issued.review, respond(WorkerId(2), Rating::FarAbovePar), ts)
            .unwrap();
        let state = engine.state();
        assert_eq!(state.reputation(WorkerId(1)).unwrap(), &before);
        assert!(state.inbox(WorkerId(1)).is_empty());
        assert_eq!(state.received(WorkerId(1)).work_count, 1);
        assert_eq!(state.review_pay(WorkerId(2)), 1000);
        assert!(engine.log().events().iter().all(|e| !matches!(
            e.body,
            EventBody::LevelChanged { .. } | EventBody::FeedbackDelivered { .. }
        )));
    }

    #[test]
    fn wrong_reviewer_is_refused_without_side_effects() {
        let mut engine = engine(ConditionMode::Guild, 3);
        let task = engine
            .post_task(RequesterId(1), Level::FLOOR, 1000, 60, false, 0)
            .unwrap();
        let mut ts = 0;
        let issued = ten_units(&mut engine, WorkerId(1), task, &mut ts);
        let intruder = if issued.reviewer == WorkerId(2) {
            WorkerId(3)
        } else {
            WorkerId(2)
        };
        let before = engine.state().clone();
        let err = engine
            .submit_review(issued.review, respond(intruder, Rating::AtPar), ts)
            .unwrap_err();
        assert!(matches!(
            err,
            EngineError::Routing(RoutingError::ReviewerMismatch { .. })
        ));
        assert_eq!(engine.state(), &before);
        let err = engine
            .submit_review(issued.review, respond(WorkerId(1), Rating::AtPar), ts)
            .unwrap_err();
        assert!(matches!(
            err,
            EngineError::Routing(RoutingError::ReviewerMismatch { .. })
        ));
        let err = engine
            .submit_review(ReviewId(99), respond(issued.reviewer, Rating::AtPar), ts)
            .unwrap_err();
        assert!(matches!(err, EngineError::Routing(RoutingError::UnknownReview(_))));
    }

    #[test]
    fn ten_reviews_promote_and_log_level_change() {
        let mut engine = engine(ConditionMode::Guild, 2);
        let task = engine
            .post_task(RequesterId(1), Level::FLOOR, 1000, 60, false, 0)
            .unwrap();
        let mut ts = 0;
        for _ in 0..10 {
            let issued = ten_units(&mut engine, WorkerId(1), task, &mut ts);
            engine
                .submit_review(issued.review, respond(issued.reviewer, Rating::AbovePar), ts)
                .unwrap();
        }
        assert_eq!(engine.state().level(WorkerId(1)).unwrap().get(), 2);
        let changes: Vec<_> = engine
            .log()
            .events()
            .iter()
            .filter(|e| matches!(e.body, EventBody::LevelChanged { .. }))
            .collect();
        assert_eq!(changes.len(), 1);
        assert_eq!(replay(engine.log(), &EngineConfig::default()).unwrap(), *engine.state());
    }

    #[test]
    fn lone_worker_funds_carry_forward() {
        let mut engine = engine(ConditionMode::Guild, 1);
        let task = engine
            .post_task(RequesterId(1), Level::FLOOR, 1000, 60, false, 0)
            .unwrap();
        for ts in 1..=25 {
            let receipt = engine.complete_work(WorkerId(1), task, "x".into(), 10, ts).unwrap();
            assert!(receipt.review.is_none());
        }
        assert_eq!(engine.state().ledger().accrued(WorkerId(1)), 2500);
        assert!(engine.state().ledger_balances());
    }

    #[test]
    fn collective_rejection_removes_for_everyone() {
        let mut engine = engine(ConditionMode::Guild, 10);
        let task = engine.post_task(RequesterId(4), Level::FLOOR, 1, 60, false, 0).unwrap();
        for w in 1..=2 {
            let effect = engine.reject_task(WorkerId(w), task, 1).unwrap();
            assert!(matches!(effect, RejectEffect::Rejected { removed: false, .. }));
            assert!(engine.state().feed(WorkerId(w)).unwrap().is_empty());
            assert_eq!(engine.state().feed(WorkerId(9)).unwrap().len(), 1);
        }
        assert_eq!(
            engine.reject_task(WorkerId(1), task, 1).unwrap(),
            RejectEffect::Duplicate
        );
        let effect = engine.reject_task(WorkerId(3), task, 2).unwrap();
        assert!(matches!(
            effect,
            RejectEffect::Rejected {
                removed: true,
                count: 3,
                ..
            }
        ));
        assert!(engine.state().feed(WorkerId(9)).unwrap().is_empty());
        assert_eq!(engine.state().notices(RequesterId(4)), 3);
        assert!(engine.complete_work(WorkerId(9), task, "x".into(), 1, 3).is_err());
        assert_eq!(replay(engine.log(), &EngineConfig::default()).unwrap(), *engine.state());
    }

    #[test]
    fn work_outside_feed_is_refused() {
        let mut engine = engine(ConditionMode::Guild, 2);
        let task = engine
            .post_task(RequesterId(1), Level::new(2).unwrap(), 10, 60, false, 0)
            .unwrap();
        let before = engine.state().clone();
        assert!(matches!(
            engine.complete_work(WorkerId(1), task, "x".into(), 1, 1),
            Err(EngineError::Market(MarketError::NotInFeed { .. }))
        ));
        assert_eq!(engine.state(), &before);
        assert!(matches!(
            engine.complete_work(WorkerId(7), task, "x".into(), 1, 1),
            Err(EngineError::UnknownWorker(_))
        ));
    }

    #[test]
    fn tampered_log_fails_replay() {
        let mut engine = engine(ConditionMode::Guild, 3);
        let task = engine
            .post_task(RequesterId(1), Level::FLOOR, 1000, 60, false, 0)
            .unwrap();
        let mut ts = 0;
        let issued = ten_units(&mut engine, WorkerId(1), task, &mut ts);
        engine
            .submit_review(issued.review, respond(issued.reviewer, Rating::AtPar), ts)
            .unwrap();

        let text = engine.log().to_jsonl();
        // Pretend the author reviewed their own work.
        let tampered = text.replace(
            &format!("\"author\":\"w1\",\"reviewer\":\"{}\"", issued.reviewer),
            "\"author\":\"w1\",\"reviewer\":\"w1\"",
        );
        assert_ne!(tampered, text);
        let log = EventLog::read_from(tampered.as_bytes());
        assert!(log.is_err() || replay(&log.unwrap(), &EngineConfig::default()).is_err());

        // Drop the payout line: the following submission no longer matches.
        let lines: Vec<&str> = text.lines().filter(|l| !l.contains("\"kind\":\"payout\"")).collect();
        let renumbered: Vec<String> = lines
            .iter()
            .enumerate()
            .map(|(i, l)| {
                if i == 0 {
                    l.to_string()
                } else {
                    let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                    v["seq"] = serde_json::json!(i);
                    v.to_string()
                }
            })
            .collect();
        let log = EventLog::read_from(renumbered.join("\n").as_bytes()).unwrap();
        assert!(matches!(
            replay(&log, &EngineConfig::default()),
            Err(EngineError::Divergence { .. })
        ));
    }
}
