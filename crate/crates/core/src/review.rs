//! Review sampling, funding and reviewer assignment.
//!
//! Every submission is taxed into its author's [`FundingLedger`] account.
//! After `trigger` submissions one of them is drawn uniformly at random
//! (skipping requester opt-outs) and wrapped into a [`ReviewTask`] whose
//! payment is the accrued tax. Review tasks never carry the author's id;
//! the author is tracked separately by the engine.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::RoutingError;
use crate::fraction::Fraction;
use crate::ids::{ReviewId, SubmissionId, TaskId, WorkerId};
use crate::leveling::{Level, Rating};

/// Whether peer ratings drive levels and come back to the author.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionMode {
    Guild,
    Control,
}

impl ConditionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionMode::Guild => "guild",
            ConditionMode::Control => "control",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SubmissionKind {
    Work,
    /// A completed review; sampling one of these yields a meta-review.
    Review {
        review: ReviewId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub id: SubmissionId,
    pub worker: WorkerId,
    pub task: Option<TaskId>,
    /// Gross wage in micro-currency.
    pub wage: u64,
    pub work_seconds: u64,
    pub timestamp: u64,
    pub opted_out: bool,
    pub kind: SubmissionKind,
    /// The work product as shown to a reviewer. Must not identify the author.
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReviewKind {
    WorkReview,
    MetaReview,
}

/// The reviewer-visible assessment task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewTask {
    pub id: ReviewId,
    pub target: SubmissionId,
    pub payload: String,
    pub author_level: Level,
    pub payment: u64,
    pub kind: ReviewKind,
}

impl ReviewTask {
    pub fn for_submission(id: ReviewId, record: &SubmissionRecord, author_level: Level, payment: u64) -> Self {
        let kind = match record.kind {
            SubmissionKind::Work => ReviewKind::WorkReview,
            SubmissionKind::Review { .. } => ReviewKind::MetaReview,
        };
        Self {
            id,
            target: record.id,
            payload: record.content.clone(),
            author_level,
            payment,
            kind,
        }
    }
}

/// A review task together with its (system-only) author.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuedReview {
    pub task: ReviewTask,
    pub author: WorkerId,
}

/// Rating, acceptance prediction and free-text feedback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewResponse {
    pub reviewer: WorkerId,
    pub rating: Rating,
    pub predicted_acceptance: bool,
    pub feedback: String,
}

#[derive(Serialize)]
struct AnonymousResponse<'a> {
    rating: Rating,
    predicted_acceptance: bool,
    feedback: &'a str,
}

impl ReviewResponse {
    pub fn validate(&self, allow_empty_feedback: bool) -> Result<(), RoutingError> {
        if !allow_empty_feedback && self.feedback.trim().is_empty() {
            return Err(RoutingError::EmptyFeedback);
        }
        Ok(())
    }

    /// The response as a meta-reviewer sees it: answers only, no reviewer.
    pub fn anonymized_content(&self) -> String {
        serde_json::to_string(&AnonymousResponse {
            rating: self.rating,
            predicted_acceptance: self.predicted_acceptance,
            feedback: &self.feedback,
        })
        .expect("response serializes")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerAccount {
    pub accrued: u64,
    pub counter: u32,
    pub pool: Vec<SubmissionRecord>,
    /// Set when `counter` reached the trigger and a draw is outstanding.
    pub due: bool,
    /// Draws settled without a review.
    #[serde(default)]
    pub carried: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Accrual {
    pub tax: u64,
    pub due: bool,
}

/// Per-worker review tax accounts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FundingLedger {
    tax_rate: Fraction,
    trigger: u32,
    accounts: BTreeMap<WorkerId, LedgerAccount>,
    taxes_collected: u64,
    review_funding: u64,
}

impl FundingLedger {
    pub fn new(tax_rate: Fraction, trigger: u32) -> Self {
        assert!(trigger > 0, "review trigger must be positive");
        Self {
            tax_rate,
            trigger,
            accounts: BTreeMap::new(),
            taxes_collected: 0,
            review_funding: 0,
        }
    }

    pub fn tax_rate(&self) -> Fraction {
        self.tax_rate
    }

    pub fn trigger(&self) -> u32 {
        self.trigger
    }

    pub fn account(&self, worker: WorkerId) -> Option<&LedgerAccount> {
        self.accounts.get(&worker)
    }

    pub fn accrued(&self, worker: WorkerId) -> u64 {
        self.accounts.get(&worker).map_or(0, |a| a.accrued)
    }

    pub fn is_due(&self, worker: WorkerId) -> bool {
        self.accounts.get(&worker).is_some_and(|a| a.due)
    }

    /// Sum of every tax ever collected.
    pub fn taxes_collected(&self) -> u64 {
        self.taxes_collected
    }

    /// Sum of every accrued balance handed to an issued review.
    pub fn review_funding(&self) -> u64 {
        self.review_funding
    }

    pub fn total_accrued(&self) -> u64 {
        self.accounts.values().map(|a| a.accrued).sum()
    }

    /// Taxes the submission and adds it to the author's pool.
    ///
    /// Panics if a draw is already outstanding for the author.
    pub fn accrue(&mut self, record: &SubmissionRecord) -> Accrual {
        let tax = self.tax_rate.floor_mul(record.wage);
        let trigger = self.trigger;
        let account = self.accounts.entry(record.worker).or_default();
        assert!(!account.due, "submission ingested while a review draw is outstanding");
        account.accrued += tax;
        account.counter += 1;
        account.pool.push(record.clone());
        account.due = account.counter >= trigger;
        self.taxes_collected += tax;
        Accrual { tax, due: account.due }
    }

    /// Pool of the outstanding draw for `worker`.
    pub fn due_pool(&self, worker: WorkerId) -> Option<&[SubmissionRecord]> {
        self.accounts.get(&worker).filter(|a| a.due).map(|a| a.pool.as_slice())
    }

    /// Settles an outstanding draw by issuing a review; returns the payment.
    pub fn settle_issued(&mut self, worker: WorkerId) -> u64 {
        let account = self
            .accounts
            .get_mut(&worker)
            .filter(|a| a.due)
            .expect("no outstanding draw");
        let payment = std::mem::take(&mut account.accrued);
        account.counter = 0;
        account.pool.clear();
        account.due = false;
        self.review_funding += payment;
        payment
    }

    /// Settles an outstanding draw without a review; the balance carries forward.
    pub fn settle_carried(&mut self, worker: WorkerId) {
        let account = self
            .accounts
            .get_mut(&worker)
            .filter(|a| a.due)
            .expect("no outstanding draw");
        account.counter = 0;
        account.pool.clear();
        account.due = false;
        account.carried += 1;
    }

    /// Accrues `record` and, when the trigger is hit, draws a review target
    /// uniformly among the pooled submissions that were not opted out.
    pub fn ingest_submission<R: Rng + ?Sized>(
        &mut self,
        record: &SubmissionRecord,
        author_level: Level,
        review_id: ReviewId,
        rng: &mut R,
    ) -> Option<IssuedReview> {
        if !self.accrue(record).due {
            return None;
        }
        let worker = record.worker;
        let pool = self.due_pool(worker).expect("draw is due");
        let candidates: Vec<&SubmissionRecord> = pool.iter().filter(|s| !s.opted_out).collect();
        if candidates.is_empty() || self.accrued(worker) == 0 {
            self.settle_carried(worker);
            return None;
        }
        let target = candidates[rng.random_range(0..candidates.len())].clone();
        let payment = self.settle_issued(worker);
        Some(IssuedReview {
            task: ReviewTask::for_submission(review_id, &target, author_level, payment),
            author: worker,
        })
    }
}

/// Which rule produced a reviewer candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReviewerBand {
    /// Work review by a member one level above the author.
    OneAbove,
    /// Work review by a same-level peer, used when nobody is one level above.
    SameLevel,
    /// Meta-review by any other member.
    AnyMember,
}

/// Candidate reviewers, sorted by id, and the band they came from.
pub fn eligible_reviewers(
    kind: ReviewKind,
    author: WorkerId,
    author_level: Level,
    roster: &[(WorkerId, Level)],
) -> Option<(ReviewerBand, Vec<WorkerId>)> {
    let pick = |keep: &dyn Fn(Level) -> bool| {
        let mut ids: Vec<WorkerId> = roster
            .iter()
            .filter(|(id, level)| *id != author && keep(*level))
            .map(|(id, _)| *id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    match kind {
        ReviewKind::MetaReview => {
            let all = pick(&|_| true);
            (!all.is_empty()).then_some((ReviewerBand::AnyMember, all))
        }
        ReviewKind::WorkReview => {
            let above = pick(&|level| level == author_level.up());
            if !above.is_empty() {
                return Some((ReviewerBand::OneAbove, above));
            }
            let peers = pick(&|level| level == author_level);
            (!peers.is_empty()).then_some((ReviewerBand::SameLevel, peers))
        }
    }
}

/// Picks a reviewer uniformly from the first non-empty candidate band.
pub fn assign_reviewer<R: Rng + ?Sized>(
    task: &ReviewTask,
    author: WorkerId,
    roster: &[(WorkerId, Level)],
    rng: &mut R,
) -> Result<WorkerId, RoutingError> {
    let (_, candidates) = eligible_reviewers(task.kind, author, task.author_level, roster)
        .ok_or(RoutingError::NoEligibleReviewer(task.id))?;
    Ok(candidates[rng.random_range(0..candidates.len())])
}
