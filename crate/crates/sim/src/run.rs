//! Drives the engine through a simulated two-week deployment.

use std::collections::{BTreeSet, VecDeque};

use guild_core::engine::IssuedTo;
use guild_core::{
    ConditionMode, Engine, EngineState, EventLog, Level, Rating, RequesterId, ReviewResponse, TaskId, WorkerId,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{answer_gold, quality_signal, rate_submission, GoldTask, WorkerAgent};
use crate::config::ExperimentConfig;
use crate::results::{AgentResult, ExperimentResult};
use crate::SimError;

/// Shared by both conditions so that paired runs see the same population.
const POPULATION_STREAM: u64 = 1;
const GUILD_STREAM: u64 = 2;
const CONTROL_STREAM: u64 = 3;

const SECONDS_PER_DAY: u64 = 86_400;

const FEEDBACK: [&str; 4] = [
    "The answer misses what the task asked for; reread the instructions before starting.",
    "Mostly there, but several labels look rushed; slow down on the ambiguous items.",
    "Careful and consistent work; a short note on edge cases would make it better.",
    "Excellent: accurate, complete, and clearly explained.",
];

/// One finished condition: its agents, their outcomes and the engine.
#[derive(Debug, Clone)]
pub struct ConditionRun {
    pub mode: ConditionMode,
    pub agents: Vec<WorkerAgent>,
    pub results: Vec<AgentResult>,
    pub state: EngineState,
    pub log: EventLog,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    tasks: u64,
    gold: u64,
    gold_correct: u64,
}

/// Latent accuracy and activity for each agent slot; identical across conditions.
fn draw_population(cfg: &ExperimentConfig, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(POPULATION_STREAM);
    (0..cfg.population)
        .map(|_| {
            let accuracy = rng.random_range(cfg.accuracy_low..=cfg.accuracy_high);
            let activity = cfg.tasks_per_day * rng.random_range(0.5..=1.5);
            (accuracy, activity)
        })
        .collect()
}

struct Driver<'a> {
    cfg: &'a ExperimentConfig,
    engine: Engine,
    agents: Vec<WorkerAgent>,
    /// Id of agent index 0, minus one.
    offset: u64,
    tally: Vec<Tally>,
    lowball: BTreeSet<TaskId>,
    rng: ChaCha8Rng,
    ts: u64,
    next_gold: u64,
}

impl Driver<'_> {
    fn index(&self, worker: WorkerId) -> usize {
        (worker.0 - self.offset - 1) as usize
    }

    fn tick(&mut self) -> u64 {
        self.ts += 1;
        self.ts
    }

    fn post_day(&mut self, day: u32) -> Result<Vec<TaskId>, SimError> {
        let m = &self.cfg.market;
        let mut lowball_today = Vec::new();
        for level in 1..=m.levels_posted {
            let opted_out = self.rng.random_bool(m.opt_out_fraction);
            let ts = self.tick();
            self.engine.post_task(
                RequesterId(level as u64),
                Level::new(level).expect("levels start at 1"),
                m.price_for(level),
                m.task_seconds,
                opted_out,
                ts,
            )?;
            if self.rng.random_bool(m.lowball_probability) {
                let ts = self.tick();
                let task = self.engine.post_task(
                    RequesterId(1000 + day as u64 * 100 + level as u64),
                    Level::new(level).expect("levels start at 1"),
                    m.lowball_price_for(level),
                    m.task_seconds,
                    false,
                    ts,
                )?;
                self.lowball.insert(task);
                lowball_today.push(task);
            }
        }
        Ok(lowball_today)
    }

    /// Each agent looks once at today's underpriced postings aimed at its level.
    fn reject_lowballs(&mut self, fresh: &[TaskId]) -> Result<(), SimError> {
        if fresh.is_empty() {
            return Ok(());
        }
        let mut order: Vec<usize> = (0..self.agents.len()).collect();
        order.shuffle(&mut self.rng);
        for i in order {
            let worker = self.agents[i].id;
            let level = self.engine.state().level(worker)?;
            for &task in fresh {
                let Some(posting) = self.engine.state().market().posting(task) else {
                    continue;
                };
                if !posting.is_live() || posting.target_level != level {
                    continue;
                }
                if self.rng.random_bool(self.cfg.market.rejection_probability) {
                    let ts = self.tick();
                    self.engine.reject_task(worker, task, ts)?;
                }
            }
        }
        Ok(())
    }

    /// Highest-level fairly priced posting in the feed, newest first.
    fn choose_task(&self, worker: WorkerId) -> Result<Option<TaskId>, SimError> {
        let feed = self.engine.state().feed(worker)?;
        Ok(feed
            .into_iter()
            .filter(|p| !self.lowball.contains(&p.id))
            .max_by_key(|p| (p.target_level, p.posted_at, p.id))
            .map(|p| p.id))
    }

    fn work_unit(&mut self, i: usize) -> Result<(), SimError> {
        let worker = self.agents[i].id;
        let Some(task) = self.choose_task(worker)? else {
            return Ok(());
        };
        let content = if self.rng.random_bool(self.cfg.gold_fraction) {
            let gold = GoldTask {
                id: self.next_gold,
                answer: self.rng.random_bool(0.5),
            };
            self.next_gold += 1;
            let correct = answer_gold(&self.agents[i], &gold, &mut self.rng);
            self.tally[i].gold += 1;
            self.tally[i].gold_correct += correct as u64;
            format!("answer: {}", if correct == gold.answer { "yes" } else { "no" })
        } else {
            format!("label: {}", self.rng.random_range(0..8u8))
        };
        let estimate = self.cfg.market.task_seconds as f64;
        let seconds = (estimate * self.rng.random_range(0.9..=1.1)).round() as u64;
        let ts = self.tick();
        let receipt = self.engine.complete_work(worker, task, content, seconds, ts)?;
        self.tally[i].tasks += 1;
        if let Some(issued) = receipt.review {
            self.answer_reviews(issued)?;
        }
        Ok(())
    }

    /// Reviewers answer at once; answers can trigger further meta-reviews.
    fn answer_reviews(&mut self, first: IssuedTo) -> Result<(), SimError> {
        let mut queue = VecDeque::from([first]);
        while let Some(issued) = queue.pop_front() {
            let author = self
                .engine
                .state()
                .open_review(issued.review)
                .expect("issued review is open")
                .author;
            let author_agent = &self.agents[self.index(author)];
            let signal = quality_signal(author_agent.accuracy, self.cfg.accuracy_low, self.cfg.accuracy_high);
            let reviewer = &self.agents[self.index(issued.reviewer)];
            let rating = rate_submission(reviewer, signal, &mut self.rng);
            let response = ReviewResponse {
                reviewer: issued.reviewer,
                rating,
                predicted_acceptance: rating >= Rating::AtPar,
                feedback: FEEDBACK[rating.numeric() as usize - 1].to_string(),
            };
            let ts = self.tick();
            queue.extend(self.engine.submit_review(issued.review, response, ts)?);
        }
        Ok(())
    }

    fn run_day(&mut self, day: u32) -> Result<(), SimError> {
        self.ts = self.ts.max(day as u64 * SECONDS_PER_DAY);
        let fresh = self.post_day(day)?;
        self.reject_lowballs(&fresh)?;
        let mut slots = Vec::new();
        for (i, agent) in self.agents.iter().enumerate() {
            let whole = agent.activity.floor();
            let extra = self.rng.random_bool(agent.activity - whole) as usize;
            slots.extend(std::iter::repeat_n(i, whole as usize + extra));
        }
        slots.shuffle(&mut self.rng);
        for i in slots {
            self.work_unit(i)?;
        }
        Ok(())
    }
}

/// Runs one condition for the configured number of days.
pub fn run_condition(cfg: &ExperimentConfig, mode: ConditionMode, seed: u64) -> Result<ConditionRun, SimError> {
    cfg.validate()?;
    let (offset, stream, rating) = match mode {
        ConditionMode::Guild => (0, GUILD_STREAM, cfg.guild_rating),
        ConditionMode::Control => (cfg.population as u64, CONTROL_STREAM, cfg.control_rating),
    };
    let agents: Vec<WorkerAgent> = draw_population(cfg, seed)
        .into_iter()
        .enumerate()
        .map(|(i, (accuracy, activity))| WorkerAgent {
            id: WorkerId(offset + i as u64 + 1),
            accuracy,
            rating,
            activity,
        })
        .collect();
    let engine = Engine::new(mode, cfg.engine.clone(), agents.iter().map(|a| a.id).collect(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut driver = Driver {
        cfg,
        engine,
        tally: vec![Tally::default(); agents.len()],
        agents,
        offset,
        lowball: BTreeSet::new(),
        rng,
        ts: 0,
        next_gold: 1,
    };
    for day in 0..cfg.days {
        driver.run_day(day)?;
    }

    let Driver {
        engine, agents, tally, ..
    } = driver;
    let (state, log) = engine.into_parts();
    let results = agents
        .iter()
        .zip(&tally)
        .map(|(agent, t)| {
            let received = state.received(agent.id);
            Ok(AgentResult {
                agent: agent.id,
                condition: mode,
                accuracy: (t.gold > 0).then(|| t.gold_correct as f64 / t.gold as f64),
                mean_rating: received.mean_work_rating(),
                review_count: received.work_count,
                final_level: match mode {
                    ConditionMode::Guild => Some(state.level(agent.id)?.get()),
                    ConditionMode::Control => None,
                },
                tasks: t.tasks,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(ConditionRun {
        mode,
        agents,
        results,
        state,
        log,
    })
}

/// Runs both conditions from the master seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, SimError> {
    let guild = run_condition(cfg, ConditionMode::Guild, cfg.seed)?;
    let control = run_condition(cfg, ConditionMode::Control, cfg.seed)?;
    let mut agents = guild.results;
    agents.extend(control.results);
    Ok(ExperimentResult {
        agents,
        guild_log: guild.log,
        control_log: control.log,
    })
}
