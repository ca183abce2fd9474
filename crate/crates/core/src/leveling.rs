//! The leveling state machine.
//!
//! Each review is converted to a number on the 1..=4 scale and pushed into a
//! fixed-capacity window. Once the window is full its mean is compared with
//! [`LevelThresholds`] after every review (a sliding evaluation). A nonzero
//! shift moves the worker and clears the window; a shift that is cut off by
//! the level floor (or an optional cap) still clears it.

use std::collections::VecDeque;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::LevelingError;
use crate::fraction::Fraction;
use crate::ids::WorkerId;

/// Four-point ordinal scale, calibrated to the author's current level `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Rating {
    /// Appropriate for level n-1.
    Subpar,
    /// Appropriate for level n.
    AtPar,
    /// Appropriate for level n+1.
    AbovePar,
    /// Appropriate for level n+2.
    FarAbovePar,
}

impl Rating {
    pub const ALL: [Rating; 4] = [Rating::Subpar, Rating::AtPar, Rating::AbovePar, Rating::FarAbovePar];

    pub fn numeric(self) -> u8 {
        match self {
            Rating::Subpar => 1,
            Rating::AtPar => 2,
            Rating::AbovePar => 3,
            Rating::FarAbovePar => 4,
        }
    }

    pub fn from_numeric(value: u8) -> Option<Rating> {
        match value {
            1 => Some(Rating::Subpar),
            2 => Some(Rating::AtPar),
            3 => Some(Rating::AbovePar),
            4 => Some(Rating::FarAbovePar),
            _ => None,
        }
    }
}

impl From<Rating> for u8 {
    fn from(rating: Rating) -> u8 {
        rating.numeric()
    }
}

impl TryFrom<u8> for Rating {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Rating::from_numeric(value).ok_or_else(|| format!("rating {value} outside 1..=4"))
    }
}

pub fn numeric_of_rating(rating: Rating) -> u8 {
    rating.numeric()
}

/// Guild level. Everybody starts at 1 and nobody goes below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Level(u32);

impl Level {
    pub const FLOOR: Level = Level(1);

    pub fn new(value: u32) -> Option<Level> {
        (value >= 1).then_some(Level(value))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn up(self) -> Level {
        Level(self.0 + 1)
    }

    /// Applies `delta`, clamped to `[1, cap]`.
    pub fn shifted(self, delta: LevelDelta, cap: Option<Level>) -> Level {
        let raw = (self.0 as i64 + delta.steps() as i64).max(1) as u32;
        match cap {
            Some(cap) => Level(raw.min(cap.0.max(self.0))),
            None => Level(raw),
        }
    }
}

impl Default for Level {
    fn default() -> Self {
        Level::FLOOR
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<Level> for u32 {
    fn from(level: Level) -> u32 {
        level.0
    }
}

impl TryFrom<u32> for Level {
    type Error = String;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Level::new(value).ok_or_else(|| format!("level {value} below 1"))
    }
}

/// The most recent numeric ratings, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewWindow {
    capacity: usize,
    ratings: VecDeque<u8>,
}

/// Result of [`moving_average`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MovingAverage {
    Full(Ratio<u64>),
    NotFull,
}

impl ReviewWindow {
    pub const DEFAULT_CAPACITY: usize = 10;

    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "review window needs a positive capacity");
        Self {
            capacity,
            ratings: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.ratings.len() == self.capacity
    }

    pub fn ratings(&self) -> impl Iterator<Item = u8> + '_ {
        self.ratings.iter().copied()
    }

    /// Appends a rating, evicting the oldest one when at capacity.
    pub fn push(&mut self, rating: Rating) {
        if self.ratings.len() == self.capacity {
            self.ratings.pop_front();
        }
        self.ratings.push_back(rating.numeric());
    }

    pub fn clear(&mut self) {
        self.ratings.clear();
    }

    pub fn sum(&self) -> u64 {
        self.ratings.iter().map(|&r| r as u64).sum()
    }
}

impl Default for ReviewWindow {
    fn default() -> Self {
        Self::new(Self::DEFAULT_CAPACITY)
    }
}

/// Exact mean of a full window.
pub fn moving_average(window: &ReviewWindow) -> MovingAverage {
    if window.is_full() {
        MovingAverage::Full(Ratio::new(window.sum(), window.len() as u64))
    } else {
        MovingAverage::NotFull
    }
}

/// One of the four level shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelDelta {
    Down,
    Stay,
    UpOne,
    UpTwo,
}

impl LevelDelta {
    pub fn steps(self) -> i32 {
        match self {
            LevelDelta::Down => -1,
            LevelDelta::Stay => 0,
            LevelDelta::UpOne => 1,
            LevelDelta::UpTwo => 2,
        }
    }
}

/// Band edges on the mean rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelThresholds {
    /// Demote when the mean is at or below this value.
    pub down_at_or_below: Fraction,
    /// Promote one level at or above this value.
    pub up_one_at_or_above: Fraction,
    /// Promote two levels at or above this value.
    pub up_two_at_or_above: Fraction,
}

impl Default for LevelThresholds {
    fn default() -> Self {
        // Nine 1s and one 4 average exactly 1.3, the most a window can hold
        // while still being 90% rated 1.
        Self {
            down_at_or_below: Fraction::new(13, 10),
            up_one_at_or_above: Fraction::new(5, 2),
            up_two_at_or_above: Fraction::new(7, 2),
        }
    }
}

impl LevelThresholds {
    pub fn validate(&self) -> Result<(), LevelingError> {
        let scale = Fraction::integer(1)..=Fraction::integer(4);
        let edges = [self.down_at_or_below, self.up_one_at_or_above, self.up_two_at_or_above];
        if !edges.iter().all(|edge| scale.contains(edge)) {
            return Err(LevelingError::InvalidThresholds("band edges must lie in [1, 4]".into()));
        }
        if !(edges[0] < edges[1] && edges[1] < edges[2]) {
            return Err(LevelingError::InvalidThresholds(
                "band edges must be strictly increasing (down < up-one < up-two)".into(),
            ));
        }
        Ok(())
    }
}

/// Maps a window mean to a level shift.
pub fn apply_thresholds(average: Ratio<u64>, thresholds: &LevelThresholds) -> Result<LevelDelta, LevelingError> {
    let average = Fraction::from(average);
    if average < Fraction::integer(1) || average > Fraction::integer(4) {
        return Err(LevelingError::AverageOutOfRange(average.to_string()));
    }
    Ok(if average <= thresholds.down_at_or_below {
        LevelDelta::Down
    } else if average >= thresholds.up_two_at_or_above {
        LevelDelta::UpTwo
    } else if average >= thresholds.up_one_at_or_above {
        LevelDelta::UpOne
    } else {
        LevelDelta::Stay
    })
}

/// Window size, thresholds and optional level cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelingPolicy {
    pub window: usize,
    pub thresholds: LevelThresholds,
    pub max_level: Option<Level>,
}

impl Default for LevelingPolicy {
    fn default() -> Self {
        Self {
            window: ReviewWindow::DEFAULT_CAPACITY,
            thresholds: LevelThresholds::default(),
            max_level: None,
        }
    }
}

impl LevelingPolicy {
    pub fn validate(&self) -> Result<(), LevelingError> {
        if self.window == 0 {
            return Err(LevelingError::InvalidThresholds("window must be positive".into()));
        }
        self.thresholds.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub at: u64,
    pub from: Level,
    pub to: Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelChange {
    pub worker: WorkerId,
    pub from: Level,
    pub to: Level,
    pub delta: LevelDelta,
}

/// What one recorded review did to the worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReviewOutcome {
    /// Window not yet full.
    Pending,
    /// Window full, mean inside the stay band; window keeps sliding.
    Held,
    /// Level moved; window cleared.
    Changed(LevelChange),
    /// A shift was triggered but the floor or cap absorbed it; window cleared.
    Clamped(LevelDelta),
}

impl ReviewOutcome {
    pub fn level_change(&self) -> Option<LevelChange> {
        match self {
            ReviewOutcome::Changed(change) => Some(*change),
            _ => None,
        }
    }

    pub fn resets_window(&self) -> bool {
        matches!(self, ReviewOutcome::Changed(_) | ReviewOutcome::Clamped(_))
    }
}

/// Per-worker leveling state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerReputation {
    pub worker: WorkerId,
    level: Level,
    window: ReviewWindow,
    transitions: Vec<Transition>,
}

impl WorkerReputation {
    pub fn new(worker: WorkerId, window: usize) -> Self {
        Self {
            worker,
            level: Level::FLOOR,
            window: ReviewWindow::new(window),
            transitions: Vec::new(),
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn window(&self) -> &ReviewWindow {
        &self.window
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Records one review received at time `at`.
    pub fn record_review(&mut self, rating: Rating, at: u64, policy: &LevelingPolicy) -> ReviewOutcome {
        self.window.push(rating);
        let MovingAverage::Full(average) = moving_average(&self.window) else {
            return ReviewOutcome::Pending;
        };
        // Full windows only ever hold values in 1..=4, and thresholds are
        // validated up front, so this cannot fail.
        let delta = apply_thresholds(average, &policy.thresholds).expect("window mean within scale");
        if delta == LevelDelta::Stay {
            return ReviewOutcome::Held;
        }
        self.window.clear();
        let to = self.level.shifted(delta, policy.max_level);
        if to == self.level {
            return ReviewOutcome::Clamped(delta);
        }
        if let Some(last) = self.transitions.last() {
            debug_assert!(last.at <= at, "transition timestamps must be monotone");
        }
        let from = self.level;
        self.level = to;
        self.transitions.push(Transition { at, from, to });
        ReviewOutcome::Changed(LevelChange {
            worker: self.worker,
            from,
            to,
            delta,
        })
    }
}
