use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::fraction::Fraction;
use crate::leveling::LevelingPolicy;
use crate::market::RejectionRule;

/// Every tunable of the reputation engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub leveling: LevelingPolicy,
    /// Share of each wage withheld to fund reviews.
    pub tax_rate: Fraction,
    /// Submissions per review draw.
    pub review_trigger: u32,
    pub rejection: RejectionRule,
    /// Recommended hourly wage (micro-currency) for a level with no history.
    pub fallback_wage_per_hour: u64,
    pub allow_empty_feedback: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            leveling: LevelingPolicy::default(),
            tax_rate: Fraction::new(1, 10),
            review_trigger: 10,
            rejection: RejectionRule::default(),
            fallback_wage_per_hour: 7_250_000,
            allow_empty_feedback: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        self.leveling.validate()?;
        if self.tax_rate > Fraction::integer(1) {
            return Err(EngineError::Config("tax_rate must be within [0, 1]".into()));
        }
        if self.review_trigger == 0 {
            return Err(EngineError::Config("review_trigger must be positive".into()));
        }
        if self.rejection.fraction > Fraction::integer(1) {
            return Err(EngineError::Config("rejection fraction must be within [0, 1]".into()));
        }
        if self.rejection.floor == 0 {
            return Err(EngineError::Config("rejection floor must be positive".into()));
        }
        Ok(())
    }

    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self, EngineError> {
        let config: Self = toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}
