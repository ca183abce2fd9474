//! Level-targeted postings, per-worker feeds, wage recommendations and
//! collective rejection.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, MarketError};
use crate::fraction::Fraction;
use crate::ids::{RequesterId, TaskId, WorkerId};
use crate::leveling::Level;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskStatus {
    Live,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPosting {
    pub id: TaskId,
    pub requester: RequesterId,
    pub target_level: Level,
    /// Micro-currency per unit of work.
    pub price: u64,
    pub estimated_seconds: u64,
    pub opted_out_of_review: bool,
    pub status: TaskStatus,
    pub posted_at: u64,
}

impl TaskPosting {
    pub fn is_live(&self) -> bool {
        self.status == TaskStatus::Live
    }

    /// Visible to workers at or above the target level.
    pub fn visible_at(&self, level: Level) -> bool {
        self.is_live() && level >= self.target_level
    }
}

/// How many distinct same-level rejections remove a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionRule {
    pub fraction: Fraction,
    pub floor: u64,
}

impl Default for RejectionRule {
    fn default() -> Self {
        Self {
            fraction: Fraction::new(3, 100),
            floor: 3,
        }
    }
}

impl RejectionRule {
    /// `max(floor, ceil(fraction * population))`.
    pub fn required(&self, population: u64) -> u64 {
        self.floor.max(self.fraction.ceil_mul(population))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionTally {
    pub rejectors: BTreeSet<WorkerId>,
}

impl RejectionTally {
    pub fn count(&self) -> u64 {
        self.rejectors.len() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectEffect {
    /// Same worker rejected before; nothing changes.
    Duplicate,
    Rejected {
        requester: RequesterId,
        count: u64,
        required: u64,
        removed: bool,
    },
}

/// Records one rejection against a live posting. Does not change the
/// posting's status; the caller removes it when `removed` is reported.
pub fn reject_task(
    posting: &TaskPosting,
    tally: &mut RejectionTally,
    rule: &RejectionRule,
    worker: WorkerId,
    worker_level: Level,
    population: u64,
) -> Result<RejectEffect, MarketError> {
    if !posting.is_live() {
        return Err(MarketError::TaskNotLive(posting.id));
    }
    if worker_level != posting.target_level {
        return Err(MarketError::WrongLevel {
            worker,
            level: worker_level,
            target: posting.target_level,
        });
    }
    if !tally.rejectors.insert(worker) {
        return Ok(RejectEffect::Duplicate);
    }
    let required = rule.required(population);
    Ok(RejectEffect::Rejected {
        requester: posting.requester,
        count: tally.count(),
        required,
        removed: tally.count() >= required,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelWages {
    pub earnings: u64,
    pub seconds: u64,
}

/// Earnings and time per level, counting only work a level's members did on
/// tasks posted to that level.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WageStats {
    levels: BTreeMap<Level, LevelWages>,
}

impl WageStats {
    pub fn record(&mut self, level: Level, earnings: u64, seconds: u64) {
        let entry = self.levels.entry(level).or_default();
        entry.earnings += earnings;
        entry.seconds += seconds;
    }

    pub fn get(&self, level: Level) -> LevelWages {
        self.levels.get(&level).copied().unwrap_or_default()
    }

    pub fn levels(&self) -> impl Iterator<Item = (Level, LevelWages)> + '_ {
        self.levels.iter().map(|(l, w)| (*l, *w))
    }
}

/// Advisory hourly wage for a level, in micro-currency per hour.
pub fn recommend_wage(stats: &WageStats, level: Level, fallback_per_hour: u64) -> Ratio<u128> {
    let wages = stats.get(level);
    if wages.seconds == 0 {
        return Ratio::from_integer(fallback_per_hour as u128);
    }
    Ratio::new(wages.earnings as u128 * 3600, wages.seconds as u128)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Market {
    rule: RejectionRule,
    postings: BTreeMap<TaskId, TaskPosting>,
    tallies: BTreeMap<TaskId, RejectionTally>,
    rejected_by: BTreeMap<WorkerId, BTreeSet<TaskId>>,
    wages: WageStats,
}

impl Market {
    pub fn new(rule: RejectionRule) -> Self {
        Self {
            rule,
            ..Self::default()
        }
    }

    pub fn rule(&self) -> &RejectionRule {
        &self.rule
    }

    pub fn post(&mut self, posting: TaskPosting) {
        self.postings.insert(posting.id, posting);
    }

    pub fn posting(&self, task: TaskId) -> Option<&TaskPosting> {
        self.postings.get(&task)
    }

    pub fn postings(&self) -> impl Iterator<Item = &TaskPosting> {
        self.postings.values()
    }

    pub fn tally(&self, task: TaskId) -> Option<&RejectionTally> {
        self.tallies.get(&task)
    }

    pub fn wages(&self) -> &WageStats {
        &self.wages
    }

    pub fn record_work(&mut self, level: Level, earnings: u64, seconds: u64) {
        self.wages.record(level, earnings, seconds);
    }

    pub fn has_rejected(&self, worker: WorkerId, task: TaskId) -> bool {
        self.rejected_by.get(&worker).is_some_and(|set| set.contains(&task))
    }

    pub fn in_feed(&self, worker: WorkerId, level: Level, task: TaskId) -> bool {
        self.postings
            .get(&task)
            .is_some_and(|p| p.visible_at(level) && !self.has_rejected(worker, task))
    }

    /// Live postings visible at `level`, minus the worker's own rejections,
    /// in posting order.
    pub fn feed(&self, worker: WorkerId, level: Level) -> Vec<&TaskPosting> {
        let mut feed: Vec<&TaskPosting> = self
            .postings
            .values()
            .filter(|p| p.visible_at(level) && !self.has_rejected(worker, p.id))
            .collect();
        feed.sort_by_key(|p| (p.posted_at, p.id));
        feed
    }

    pub fn reject(
        &mut self,
        task: TaskId,
        worker: WorkerId,
        worker_level: Level,
        population: u64,
    ) -> Result<RejectEffect, MarketError> {
        let posting = self.postings.get(&task).ok_or(MarketError::UnknownTask(task))?;
        let tally = self.tallies.entry(task).or_default();
        let effect = reject_task(posting, tally, &self.rule, worker, worker_level, population)?;
        if matches!(effect, RejectEffect::Rejected { .. }) {
            self.rejected_by.entry(worker).or_default().insert(task);
        }
        Ok(effect)
    }

    pub fn remove(&mut self, task: TaskId) -> Result<(), MarketError> {
        let posting = self.postings.get_mut(&task).ok_or(MarketError::UnknownTask(task))?;
        if !posting.is_live() {
            return Err(MarketError::TaskNotLive(task));
        }
        posting.status = TaskStatus::Removed;
        Ok(())
    }
}

/// Feed for a worker looked up in `roster`.
pub fn task_feed<'a>(
    roster: &BTreeMap<WorkerId, Level>,
    market: &'a Market,
    worker: WorkerId,
) -> Result<Vec<&'a TaskPosting>, EngineError> {
    let level = roster.get(&worker).ok_or(EngineError::UnknownWorker(worker))?;
    Ok(market.feed(worker, *level))
}
