use std::path::Path;

use guild_core::EngineConfig;
use serde::{Deserialize, Serialize};

use crate::SimError;

/// How a condition's reviewers turn a quality signal into a rating:
/// an additive bias and Gaussian noise, both in rating points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingModel {
    pub bias: f64,
    pub noise: f64,
}

/// Task supply on the simulated marketplace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketParams {
    /// Levels that receive postings each day (1..=levels_posted).
    pub levels_posted: u32,
    /// Unit price at level 1, micro-currency.
    pub base_price: u64,
    /// Price multiplier per level above 1, in percent.
    pub level_step_percent: u64,
    pub task_seconds: u64,
    /// Probability that a day's posting opts out of review.
    pub opt_out_fraction: f64,
    /// Probability of an extra underpriced posting per level per day.
    pub lowball_probability: f64,
    /// Lowball postings pay this share of the level price, in percent.
    pub lowball_price_percent: u64,
    /// Probability that a worker rejects a lowball posting on sight.
    pub rejection_probability: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            levels_posted: 4,
            base_price: 500_000,
            level_step_percent: 25,
            task_seconds: 300,
            opt_out_fraction: 0.05,
            lowball_probability: 0.2,
            lowball_price_percent: 25,
            rejection_probability: 0.3,
        }
    }
}

impl MarketParams {
    pub fn price_for(&self, level: u32) -> u64 {
        self.base_price * (100 + self.level_step_percent * (level as u64 - 1)) / 100
    }

    pub fn lowball_price_for(&self, level: u32) -> u64 {
        self.price_for(level) * self.lowball_price_percent / 100
    }
}

/// Everything a run depends on. Identical configs give identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Agents per condition.
    pub population: usize,
    pub days: u32,
    /// Mean work units per agent per day; the fractional part is drawn.
    pub tasks_per_day: f64,
    pub gold_fraction: f64,
    /// Latent accuracy is uniform on this interval.
    pub accuracy_low: f64,
    pub accuracy_high: f64,
    pub guild_rating: RatingModel,
    pub control_rating: RatingModel,
    pub seed: u64,
    pub market: MarketParams,
    pub engine: EngineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            population: 150,
            days: 14,
            tasks_per_day: 6.4,
            gold_fraction: 0.1,
            accuracy_low: 0.5,
            accuracy_high: 1.0,
            guild_rating: RatingModel { bias: 0.0, noise: 0.6 },
            control_rating: RatingModel { bias: 0.7, noise: 1.5 },
            seed: 1,
            market: MarketParams::default(),
            engine: EngineConfig::default(),
        }
    }
}

fn probability(name: &str, value: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SimError::Config(format!("{name} must be within [0, 1], got {value}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.population == 0 || self.days == 0 {
            return Err(SimError::Config("population and days must be positive".into()));
        }
        if !(self.tasks_per_day.is_finite() && self.tasks_per_day > 0.0) {
            return Err(SimError::Config("tasks_per_day must be positive".into()));
        }
        probability("gold_fraction", self.gold_fraction)?;
        probability("accuracy_low", self.accuracy_low)?;
        probability("accuracy_high", self.accuracy_high)?;
        if self.accuracy_low >= self.accuracy_high {
            return Err(SimError::Config("accuracy_low must be below accuracy_high".into()));
        }
        for (name, model) in [
            ("guild_rating", self.guild_rating),
            ("control_rating", self.control_rating),
        ] {
            if !model.bias.is_finite() || !(model.noise.is_finite() && model.noise >= 0.0) {
                return Err(SimError::Config(format!("{name} needs finite bias and noise >= 0")));
            }
        }
        let m = &self.market;
        if m.levels_posted == 0 || m.base_price == 0 || m.task_seconds == 0 {
            return Err(SimError::Config(
                "market needs levels, a base price and task time".into(),
            ));
        }
        probability("opt_out_fraction", m.opt_out_fraction)?;
        probability("lowball_probability", m.lowball_probability)?;
        probability("rejection_probability", m.rejection_probability)?;
        self.engine.validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let config: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
