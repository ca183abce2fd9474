//! Per-agent outcomes and the delimited results table.
//!
//! Table layout: a `#` schema line, a header row, then one row per agent:
//! `agent,condition,accuracy,mean_rating,review_count,final_level,tasks`.
//! Missing values (no gold tasks, no reviews, control levels) are empty cells.

use std::io::{Read, Write};
use std::path::Path;

use guild_core::{ConditionMode, EventLog, WorkerId};
use serde::{Deserialize, Serialize};

use crate::SimError;

pub const RESULTS_SCHEMA_LINE: &str = "# crowd-guild-results v1";
const COLUMNS: [&str; 7] = [
    "agent",
    "condition",
    "accuracy",
    "mean_rating",
    "review_count",
    "final_level",
    "tasks",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResult {
    pub agent: WorkerId,
    pub condition: ConditionMode,
    /// Share of gold tasks answered correctly.
    pub accuracy: Option<f64>,
    /// Mean rating received on work reviews.
    pub mean_rating: Option<f64>,
    pub review_count: u64,
    /// Guild condition only.
    pub final_level: Option<u32>,
    pub tasks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub agents: Vec<AgentResult>,
    pub guild_log: EventLog,
    pub control_log: EventLog,
}

impl ExperimentResult {
    pub fn condition(&self, mode: ConditionMode) -> impl Iterator<Item = &AgentResult> {
        self.agents.iter().filter(move |a| a.condition == mode)
    }
}

fn cell<T: ToString>(value: Option<T>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_results<W: Write>(agents: &[AgentResult], mut out: W) -> Result<(), SimError> {
    writeln!(out, "{RESULTS_SCHEMA_LINE}")?;
    let mut writer = csv::Writer::from_writer(out);
    let table = |e: csv::Error| SimError::Table(e.to_string());
    writer.write_record(COLUMNS).map_err(table)?;
    for a in agents {
        writer
            .write_record([
                a.agent.to_string(),
                a.condition.as_str().to_string(),
                cell(a.accuracy),
                cell(a.mean_rating),
                a.review_count.to_string(),
                cell(a.final_level),
                a.tasks.to_string(),
            ])
            .map_err(table)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_results(agents: &[AgentResult], path: impl AsRef<Path>) -> Result<(), SimError> {
    let file = std::fs::File::create(path)?;
    write_results(agents, std::io::BufWriter::new(file))
}

fn parse_opt<T: std::str::FromStr>(raw: &str, column: &str, line: u64) -> Result<Option<T>, SimError> {
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse()
        .map(Some)
        .map_err(|_| SimError::Table(format!("line {line}: bad {column} `{raw}`")))
}

fn parse_req<T: std::str::FromStr>(raw: &str, column: &str, line: u64) -> Result<T, SimError> {
    parse_opt(raw, column, line)?.ok_or_else(|| SimError::Table(format!("line {line}: missing {column}")))
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<AgentResult>, SimError> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text)?;
    let mut lines = text.splitn(2, '\n');
    let schema = lines.next().unwrap_or_default().trim_end();
    if schema != RESULTS_SCHEMA_LINE {
        return Err(SimError::Table(format!("unsupported schema line `{schema}`")));
    }
    let body = lines.next().unwrap_or_default();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers().map_err(|e| SimError::Table(e.to_string()))?;
    if headers.iter().ne(COLUMNS) {
        return Err(SimError::Table(format!("unexpected columns {headers:?}")));
    }
    let mut agents = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| SimError::Table(e.to_string()))?;
        // +1 for the schema line.
        let line = record.position().map_or(0, |p| p.line() + 1);
        let condition = match &record[1] {
            "guild" => ConditionMode::Guild,
            "control" => ConditionMode::Control,
            other => return Err(SimError::Table(format!("line {line}: unknown condition `{other}`"))),
        };
        agents.push(AgentResult {
            agent: parse_req(&record[0], "agent", line)?,
            condition,
            accuracy: parse_opt(&record[2], "accuracy", line)?,
            mean_rating: parse_opt(&record[3], "mean_rating", line)?,
            review_count: parse_req(&record[4], "review_count", line)?,
            final_level: parse_opt(&record[5], "final_level", line)?,
            tasks: parse_req(&record[6], "tasks", line)?,
        });
    }
    Ok(agents)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<AgentResult>, SimError> {
    read_results(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<AgentResult> {
        vec![
            AgentResult {
                agent: WorkerId(1),
                condition: ConditionMode::Guild,
                accuracy: Some(0.875),
                mean_rating: Some(2.3333333333333335),
                review_count: 9,
                final_level: Some(2),
                tasks: 88,
            },
            AgentResult {
                agent: WorkerId(151),
                condition: ConditionMode::Control,
                accuracy: None,
                mean_rating: None,
                review_count: 0,
                final_level: None,
                tasks: 3,
            },
        ]
    }

    #[test]
    fn table_round_trips() {
        let mut buf = Vec::new();
        write_results(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# crowd-guild-results v1\nagent,condition,accuracy"));
        assert!(text.contains("w151,control,,,0,,3"));
        assert_eq!(read_results(buf.as_slice()).unwrap(), sample());
    }

    #[test]
    fn bad_tables_are_reported() {
        assert!(read_results("agent,condition\n".as_bytes()).is_err());
        let text = format!("{RESULTS_SCHEMA_LINE}\n{}\nw1,guild,x,,0,,1\n", COLUMNS.join(","));
        let err = read_results(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }
}
