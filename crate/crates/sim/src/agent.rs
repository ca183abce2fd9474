//! Synthetic workers: latent accuracy for gold tasks and a per-condition
//! rating model for reviews.

use guild_core::{Rating, WorkerId};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::RatingModel;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerAgent {
    pub id: WorkerId,
    /// Probability of answering a gold task correctly.
    pub accuracy: f64,
    pub rating: RatingModel,
    /// Mean work units per day.
    pub activity: f64,
}

/// A task with an answer fixed before anybody sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoldTask {
    pub id: u64,
    pub answer: bool,
}

/// Answers a gold task; correct with probability equal to the agent's accuracy.
pub fn answer_gold<R: Rng + ?Sized>(agent: &WorkerAgent, task: &GoldTask, rng: &mut R) -> bool {
    let answer = if rng.random_bool(agent.accuracy.clamp(0.0, 1.0)) {
        task.answer
    } else {
        !task.answer
    };
    answer == task.answer
}

/// Maps latent accuracy affinely from `[low, high]` onto the `[1, 4]` scale.
pub fn quality_signal(accuracy: f64, low: f64, high: f64) -> f64 {
    (1.0 + 3.0 * (accuracy - low) / (high - low)).clamp(1.0, 4.0)
}

/// `clamp(round(signal + bias + N(0, noise)), 1, 4)`.
pub fn rate_submission<R: Rng + ?Sized>(reviewer: &WorkerAgent, signal: f64, rng: &mut R) -> Rating {
    let z: f64 = rng.sample(StandardNormal);
    let raw = signal + reviewer.rating.bias + reviewer.rating.noise * z;
    let rounded = raw.round().clamp(1.0, 4.0) as u8;
    Rating::from_numeric(rounded).expect("clamped into scale")
}
