//! `guild`: run simulated experiments, replay event logs and analyze results.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use guild_core::{replay, EngineConfig, EventBody, EventLog};
use guild_sim::{analyze, load_results, run_experiment, save_results, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "guild",
    version,
    about = "Crowd guild reputation engine and experiment simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run both conditions and write their event logs and the results table.
    Simulate {
        /// Experiment configuration (TOML). Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for guild-events.jsonl, control-events.jsonl and results.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild engine state from a log and write it as JSON.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Engine configuration (TOML); the configuration in the log header is used otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlation, regression, t-test and histogram reports from a results table.
    Analyze {
        #[arg(long)]
        results: PathBuf,
        /// Output directory for the reports and summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-worker level history from a log, as CSV.
    LevelReport {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Refuses to write over any input.
fn distinct(inputs: &[&Path], outputs: &[PathBuf]) -> Result<()> {
    for output in outputs {
        let Ok(out) = output.canonicalize() else { continue };
        for input in inputs {
            if input.canonicalize().is_ok_and(|i| i == out) {
                bail!("output {} would overwrite an input", output.display());
            }
        }
    }
    Ok(())
}

fn simulate(config: Option<PathBuf>, seed: Option<u64>, out: PathBuf) -> Result<()> {
    let mut cfg = match &config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let files = ["guild-events.jsonl", "control-events.jsonl", "results.csv"].map(|f| out.join(f));
    distinct(&config.iter().map(PathBuf::as_path).collect::<Vec<_>>(), &files)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let result = run_experiment(&cfg)?;
    result.guild_log.save(&files[0])?;
    result.control_log.save(&files[1])?;
    save_results(&result.agents, &files[2])?;
    println!(
        "seed {}: {} guild events, {} control events, {} agents -> {}",
        cfg.seed,
        result.guild_log.len(),
        result.control_log.len(),
        result.agents.len(),
        out.display()
    );
    Ok(())
}

fn load_log(path: &Path) -> Result<EventLog> {
    EventLog::load(path).with_context(|| format!("reading {}", path.display()))
}

fn replay_log(log_path: PathBuf, config: Option<PathBuf>, out: PathBuf) -> Result<()> {
    let mut inputs = vec![log_path.as_path()];
    inputs.extend(config.as_deref());
    distinct(&inputs, std::slice::from_ref(&out))?;
    let log = load_log(&log_path)?;
    let config = match &config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            EngineConfig::from_toml(&text)?
        }
        None => log.header().config.clone(),
    };
    let state = replay(&log, &config)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(&out)?);
    serde_json::to_writer_pretty(&mut file, &state)?;
    writeln!(file)?;
    file.flush()?;
    println!(
        "replayed {} events ({} workers, ledger balanced: {}) -> {}",
        log.len(),
        state.workers().count(),
        state.ledger_balances(),
        out.display()
    );
    Ok(())
}

fn analyze_results(results: PathBuf, out: PathBuf) -> Result<()> {
    distinct(&[results.as_path()], std::slice::from_ref(&out))?;
    let rows = load_results(&results).with_context(|| format!("reading {}", results.display()))?;
    let report = analyze(&rows);
    report.write_reports(&out)?;
    println!("analyzed {} agents -> {}", rows.len(), out.display());
    Ok(())
}

fn level_report(log_path: PathBuf, out: PathBuf) -> Result<()> {
    distinct(&[log_path.as_path()], std::slice::from_ref(&out))?;
    let log = load_log(&log_path)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(&out)?);
    writeln!(file, "worker,seq,ts,from,to")?;
    let mut changes = 0;
    for event in log.events() {
        if let EventBody::LevelChanged { worker, from, to } = &event.body {
            writeln!(file, "{worker},{},{},{},{}", event.seq, event.ts, from.get(), to.get())?;
            changes += 1;
        }
    }
    file.flush()?;
    println!("{changes} level changes -> {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { config, seed, out } => simulate(config, seed, out),
        Command::Replay { log, config, out } => replay_log(log, config, out),
        Command::Analyze { results, out } => analyze_results(results, out),
        Command::LevelReport { log, out } => level_report(log, out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
