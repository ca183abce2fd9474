//! Statistical comparison of the two conditions from a results table.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use guild_core::ConditionMode;
use guild_stats::{
    mean, ols_regress, pearson, welch_t, CorrelationReport, Histogram, Matrix, RegressionReport, StatsError,
    TwoSampleReport,
};
use serde::{Deserialize, Serialize};

use crate::results::AgentResult;
use crate::SimError;

pub const RATING_BINS: usize = 6;
pub const REGRESSORS: [&str; 4] = ["intercept", "mean_rating", "tasks", "guild"];

/// A statistic, or why it could not be computed on this sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Unavailable(String),
}

impl<T> Outcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Unavailable(_) => None,
        }
    }
}

impl<T> From<Result<T, StatsError>> for Outcome<T> {
    fn from(result: Result<T, StatsError>) -> Self {
        match result {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Unavailable(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub agents: usize,
    pub reviewed: usize,
    pub mean_rating: Option<f64>,
    pub mean_accuracy: Option<f64>,
    /// Mean peer rating against gold accuracy, reviewed agents only.
    pub correlation: Outcome<CorrelationReport>,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub guild: ConditionSummary,
    pub control: ConditionSummary,
    /// Guild minus control on per-agent mean ratings.
    pub rating_difference: Outcome<TwoSampleReport>,
    /// Accuracy regressed on mean rating, tasks and a guild indicator.
    pub regression: Outcome<RegressionReport>,
    /// Final level to number of guild agents.
    pub level_distribution: BTreeMap<u32, u64>,
}

/// Agents with both a measured accuracy and at least one rating.
fn paired(rows: &[&AgentResult]) -> (Vec<f64>, Vec<f64>) {
    rows.iter().filter_map(|r| Some((r.mean_rating?, r.accuracy?))).unzip()
}

fn of(results: &[AgentResult], mode: ConditionMode) -> Vec<&AgentResult> {
    results.iter().filter(|r| r.condition == mode).collect()
}

/// Histogram of per-agent mean ratings over `[1, 4]`.
pub fn rating_histogram(results: &[AgentResult], mode: ConditionMode) -> Histogram {
    Histogram::from_values(
        1.0,
        4.0,
        RATING_BINS,
        of(results, mode).iter().filter_map(|r| r.mean_rating),
    )
}

pub fn level_distribution(results: &[AgentResult]) -> BTreeMap<u32, u64> {
    let mut levels = BTreeMap::new();
    for level in results.iter().filter_map(|r| r.final_level) {
        *levels.entry(level).or_default() += 1;
    }
    levels
}

fn summarize(results: &[AgentResult], mode: ConditionMode) -> ConditionSummary {
    let rows = of(results, mode);
    let ratings: Vec<f64> = rows.iter().filter_map(|r| r.mean_rating).collect();
    let accuracies: Vec<f64> = rows.iter().filter_map(|r| r.accuracy).collect();
    let (x, y) = paired(&rows);
    ConditionSummary {
        agents: rows.len(),
        reviewed: ratings.len(),
        mean_rating: (!ratings.is_empty()).then(|| mean(&ratings)),
        mean_accuracy: (!accuracies.is_empty()).then(|| mean(&accuracies)),
        correlation: pearson(&x, &y).into(),
        histogram: rating_histogram(results, mode),
    }
}

fn regress(results: &[AgentResult]) -> Result<RegressionReport, StatsError> {
    let rows: Vec<_> = results
        .iter()
        .filter_map(|r| Some((r.mean_rating?, r.accuracy?, r)))
        .collect();
    let rating: Vec<f64> = rows.iter().map(|(m, _, _)| *m).collect();
    let tasks: Vec<f64> = rows.iter().map(|(_, _, r)| r.tasks as f64).collect();
    let guild: Vec<f64> = rows
        .iter()
        .map(|(_, _, r)| f64::from(u8::from(r.condition == ConditionMode::Guild)))
        .collect();
    let accuracy: Vec<f64> = rows.iter().map(|(_, a, _)| *a).collect();
    let x = Matrix::with_intercept(&[&rating, &tasks, &guild])?;
    ols_regress(&x, &accuracy, &REGRESSORS)
}

pub fn analyze(results: &[AgentResult]) -> AnalysisReport {
    let guild_ratings: Vec<f64> = of(results, ConditionMode::Guild)
        .iter()
        .filter_map(|r| r.mean_rating)
        .collect();
    let control_ratings: Vec<f64> = of(results, ConditionMode::Control)
        .iter()
        .filter_map(|r| r.mean_rating)
        .collect();
    AnalysisReport {
        guild: summarize(results, ConditionMode::Guild),
        control: summarize(results, ConditionMode::Control),
        rating_difference: welch_t(&guild_ratings, &control_ratings).into(),
        regression: regress(results).into(),
        level_distribution: level_distribution(results),
    }
}

fn table<P: AsRef<Path>>(path: P, header: &str, rows: &[String]) -> Result<(), SimError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

fn missing(reason: &str) -> String {
    reason.replace(',', ";")
}

impl AnalysisReport {
    /// Writes `regression.csv`, `correlation.csv`, `ttest.csv`,
    /// `histogram.csv`, `levels.csv` and `summary.json` into `dir`.
    pub fn write_reports(&self, dir: impl AsRef<Path>) -> Result<(), SimError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;

        let regression = match &self.regression {
            Outcome::Ok(report) => report
                .coefficients
                .iter()
                .map(|c| {
                    format!(
                        "{},{},{},{},{},{},{}",
                        c.name, c.estimate, c.std_error, c.t_value, c.p_value, report.r_squared, report.adj_r_squared
                    )
                })
                .collect(),
            Outcome::Unavailable(reason) => vec![format!("unavailable,,,,,,{}", missing(reason))],
        };
        table(
            dir.join("regression.csv"),
            "term,estimate,std_error,t,p,r_squared,adj_r_squared",
            &regression,
        )?;

        let correlation: Vec<String> = [("guild", &self.guild), ("control", &self.control)]
            .iter()
            .map(|(name, s)| match &s.correlation {
                Outcome::Ok(c) => format!("{name},{},{},{},", c.r, c.p_value, c.n),
                Outcome::Unavailable(reason) => format!("{name},,,,{}", missing(reason)),
            })
            .collect();
        table(dir.join("correlation.csv"), "condition,r,p,n,note", &correlation)?;

        let ttest = match &self.rating_difference {
            Outcome::Ok(t) => vec![format!(
                "{},{},{},{},{},{},{},",
                t.t, t.df, t.p_value, t.mean_a, t.mean_b, t.n_a, t.n_b
            )],
            Outcome::Unavailable(reason) => vec![format!(",,,,,,,{}", missing(reason))],
        };
        table(
            dir.join("ttest.csv"),
            "t,df,p,mean_guild,mean_control,n_guild,n_control,note",
            &ttest,
        )?;

        let mut histogram = Vec::new();
        for (name, s) in [("guild", &self.guild), ("control", &self.control)] {
            for (lo, hi, count) in s.histogram.bins() {
                histogram.push(format!("{name},{lo},{hi},{count}"));
            }
        }
        table(dir.join("histogram.csv"), "condition,lower,upper,count", &histogram)?;

        let levels: Vec<String> = self
            .level_distribution
            .iter()
            .map(|(level, count)| format!("{level},{count}"))
            .collect();
        table(dir.join("levels.csv"), "level,agents", &levels)?;

        let summary = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(dir.join("summary.json"), summary + "\n")?;
        Ok(())
    }
}
