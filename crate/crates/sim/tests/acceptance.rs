//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run alone with `cargo test -p guild-sim --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use guild_core::leveling::LevelingPolicy;
use guild_core::market::{reject_task, RejectEffect, RejectionRule, RejectionTally, TaskPosting, TaskStatus};
use guild_core::review::ReviewKind;
use guild_core::{
    replay, ConditionMode, Engine, EngineConfig, EngineState, EventBody, EventLog, Level, Rating, RequesterId, TaskId,
    WorkerId, WorkerReputation,
};
use guild_sim::{analyze, run_condition, run_experiment, ConditionRun, ExperimentConfig, MarketParams};
use guild_stats::{ols_regress, pearson, welch_t, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, budget: Duration) -> String {
    format!("{:.2}s of {}s budget", elapsed.as_secs_f64(), budget.as_secs())
}

// ---------------------------------------------------------------- 1

/// Level and window contents after a stream, recomputed from scratch.
fn leveling_oracle(stream: &[u8], window: usize) -> (u32, Vec<u8>) {
    let mut level: u32 = 1;
    let mut start = 0;
    for end in 1..=stream.len() {
        if end - start < window {
            continue;
        }
        let recent = &stream[end - window..end];
        let sum: u32 = recent.iter().map(|&r| u32::from(r)).sum();
        let n = window as u32;
        // Averages compared in tenths: <= 1.3, >= 2.5, >= 3.5.
        let shift: i64 = match 10 * sum {
            s if s <= 13 * n => -1,
            s if s >= 35 * n => 2,
            s if s >= 25 * n => 1,
            _ => 0,
        };
        if shift != 0 {
            level = (i64::from(level) + shift).max(1) as u32;
            start = end;
        }
    }
    let held = stream[start.max(stream.len().saturating_sub(window))..].to_vec();
    (level, held)
}

fn criterion_1() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let window = if rng.random_bool(0.5) {
            10
        } else {
            rng.random_range(1..=20)
        };
        let len = rng.random_range(0..=200);
        let stream: Vec<u8> = (0..len).map(|_| rng.random_range(1..=4)).collect();
        let policy = LevelingPolicy {
            window,
            ..LevelingPolicy::default()
        };
        let mut rep = WorkerReputation::new(WorkerId(1), window);
        for (i, &r) in stream.iter().enumerate() {
            rep.record_review(Rating::from_numeric(r).unwrap(), i as u64, &policy);
        }
        let (level, held) = leveling_oracle(&stream, window);
        if rep.level().get() != level || rep.window().ratings().collect::<Vec<_>>() != held {
            mismatches += 1;
        }
    }
    let elapsed = started.elapsed();
    let budget = Duration::from_secs(10);
    verdict(
        mismatches == 0 && elapsed < budget,
        format!("10000 streams, {mismatches} mismatches, {}", within(elapsed, budget)),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Verdict {
    let started = Instant::now();
    let policy = LevelingPolicy::default();
    let mut base = WorkerReputation::new(WorkerId(1), 10);
    for _ in 0..10 {
        base.record_review(Rating::FarAbovePar, 0, &policy);
    }
    let start_level = base.level().get();
    assert_eq!(start_level, 3);

    let mut wrong = 0u64;
    let mut demotions = 0u64;
    let mut demoted_above_bound = 0u64;
    for code in 0..4u32.pow(10) {
        let mut rep = base.clone();
        let mut sum = 0;
        let mut c = code;
        for _ in 0..10 {
            let r = (c % 4) as u8 + 1;
            c /= 4;
            sum += u32::from(r);
            rep.record_review(Rating::from_numeric(r).unwrap(), 0, &policy);
        }
        let expected = match sum {
            s if s <= 13 => start_level - 1,
            s if s >= 35 => start_level + 2,
            s if s >= 25 => start_level + 1,
            _ => start_level,
        };
        let got = rep.level().get();
        wrong += u64::from(got != expected);
        if got < start_level {
            demotions += 1;
            demoted_above_bound += u64::from(sum > 13);
        }
    }

    // Nine ones and a four per window, starting from level 6.
    let mut rep = WorkerReputation::new(WorkerId(2), 10);
    for _ in 0..20 {
        rep.record_review(Rating::FarAbovePar, 0, &policy);
    }
    let mut staircase = vec![rep.level().get()];
    for _ in 0..8 {
        for r in [1u8, 1, 1, 1, 1, 1, 1, 1, 1, 4] {
            rep.record_review(Rating::from_numeric(r).unwrap(), 0, &policy);
        }
        staircase.push(rep.level().get());
    }
    let one_per_window = staircase == [5, 4, 3, 2, 1, 1, 1, 1, 1];

    let elapsed = started.elapsed();
    let budget = Duration::from_secs(60);
    verdict(
        wrong == 0 && demoted_above_bound == 0 && one_per_window && elapsed < budget,
        format!(
            "1048576 windows, {wrong} wrong, {demotions} demotions ({demoted_above_bound} above 1.3), \
             staircase {staircase:?}, {}",
            within(elapsed, budget)
        ),
    )
}

// ---------------------------------------------------------------- fuzzed runs

fn fuzzed_config(rng: &mut ChaCha8Rng) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        population: rng.random_range(2..=40),
        days: rng.random_range(1..=14),
        tasks_per_day: rng.random_range(0.5..9.0),
        gold_fraction: rng.random_range(0.0..0.5),
        seed: rng.random(),
        market: MarketParams {
            levels_posted: rng.random_range(1..=4),
            opt_out_fraction: if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(0.0..0.6)
            },
            lowball_probability: rng.random_range(0.0..1.0),
            rejection_probability: rng.random_range(0.0..1.0),
            ..MarketParams::default()
        },
        ..ExperimentConfig::default()
    };
    cfg.engine.review_trigger = 10;
    cfg.engine.leveling.window = rng.random_range(1..=10);
    cfg
}

struct Fuzzed {
    cfg: ExperimentConfig,
    run: ConditionRun,
}

fn fuzzed_runs() -> Vec<Fuzzed> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    (0..60)
        .map(|i| {
            let cfg = fuzzed_config(&mut rng);
            let mode = if i % 2 == 0 {
                ConditionMode::Guild
            } else {
                ConditionMode::Control
            };
            let run = run_condition(&cfg, mode, cfg.seed).expect("fuzzed run");
            Fuzzed { cfg, run }
        })
        .collect()
}

/// Alphanumeric tokens of every string in a JSON value.
fn tokens(value: &serde_json::Value, out: &mut BTreeSet<String>) {
    match value {
        serde_json::Value::String(s) => {
            for t in s.split(|c: char| !c.is_ascii_alphanumeric()).filter(|t| !t.is_empty()) {
                out.insert(t.to_string());
            }
        }
        serde_json::Value::Array(items) => items.iter().for_each(|v| tokens(v, out)),
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                out.insert(k.clone());
                tokens(v, out);
            }
        }
        _ => {}
    }
}

fn visible_tokens<T: serde::Serialize>(value: &T) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    tokens(&serde_json::to_value(value).unwrap(), &mut out);
    out
}

fn criterion_3(runs: &[Fuzzed]) -> Verdict {
    let mut leaks = 0;
    let mut self_reviews = 0;
    let mut misassigned = 0;
    let (mut one_above, mut fallback, mut meta) = (0, 0, 0);
    for f in runs {
        let log = &f.run.log;
        let mut state = EngineState::new(log.header().mode, f.cfg.engine.clone(), &log.header().workers).unwrap();
        let mut reviewer_of = BTreeMap::new();
        for event in log.events() {
            match &event.body {
                EventBody::ReviewIssued { task, author, reviewer } => {
                    reviewer_of.insert(task.id, *reviewer);
                    if visible_tokens(task).contains(&author.to_string()) {
                        leaks += 1;
                    }
                    if author == reviewer {
                        self_reviews += 1;
                    }
                    let author_level = state.level(*author).unwrap();
                    let reviewer_level = state.level(*reviewer).unwrap();
                    match task.kind {
                        ReviewKind::MetaReview => meta += 1,
                        ReviewKind::WorkReview => {
                            let above = author_level.up();
                            let exists = state.roster().iter().any(|(w, l)| w != author && *l == above);
                            if exists {
                                one_above += 1;
                                misassigned += u32::from(reviewer_level != above);
                            } else {
                                fallback += 1;
                                misassigned += u32::from(reviewer_level != author_level);
                            }
                        }
                    }
                }
                EventBody::FeedbackDelivered { review, .. } => {
                    let reviewer = reviewer_of[review];
                    let mut visible = visible_tokens(&event.body);
                    visible.remove(&review.to_string());
                    if visible.contains(&reviewer.to_string()) {
                        leaks += 1;
                    }
                }
                _ => {}
            }
            state.apply(event).unwrap();
        }
    }
    let pass = leaks == 0 && self_reviews == 0 && misassigned == 0 && one_above > 0 && fallback > 0;
    verdict(
        pass,
        format!(
            "{} runs: {leaks} identifier leaks, {self_reviews} self-reviews, {misassigned} misassigned; \
             {one_above} one-above, {fallback} same-level fallbacks, {meta} meta-reviews",
            runs.len()
        ),
    )
}

fn criterion_4(runs: &[Fuzzed]) -> Verdict {
    let mut unbalanced = 0;
    let mut draw_count_wrong = 0;
    let mut review_count_wrong = 0;
    let mut carried_total = 0;
    let mut exact_checked = 0;
    for f in runs {
        let state = &f.run.state;
        let rate = f.cfg.engine.tax_rate;
        let (mut taxes, mut payouts, mut escrow) = (0u64, 0u64, 0u64);
        let mut submissions: BTreeMap<WorkerId, u64> = BTreeMap::new();
        let mut reviews: BTreeMap<WorkerId, u64> = BTreeMap::new();
        for event in f.run.log.events() {
            match &event.body {
                EventBody::Submission { record } => {
                    taxes += rate.floor_mul(record.wage);
                    *submissions.entry(record.worker).or_default() += 1;
                }
                EventBody::ReviewIssued { task, author, .. } => {
                    escrow += task.payment;
                    *reviews.entry(*author).or_default() += 1;
                }
                EventBody::Payout { amount, .. } => {
                    payouts += amount;
                    escrow -= amount;
                }
                _ => {}
            }
        }
        let residual = state.ledger().total_accrued();
        if taxes != payouts + escrow + residual || !state.ledger_balances() {
            unbalanced += 1;
        }
        // Every opt-out-free control run has a reviewer for every draw.
        let exact = f.run.mode == ConditionMode::Control && f.cfg.market.opt_out_fraction == 0.0;
        for worker in state.workers() {
            let n = submissions.get(&worker).copied().unwrap_or(0);
            let issued = reviews.get(&worker).copied().unwrap_or(0);
            let carried = state.ledger().account(worker).map_or(0, |a| a.carried);
            carried_total += carried;
            draw_count_wrong += u64::from(issued + carried != n / 10);
            if exact {
                exact_checked += 1;
                review_count_wrong += u64::from(issued != n / 10);
            }
        }
    }
    verdict(
        unbalanced == 0 && draw_count_wrong == 0 && review_count_wrong == 0 && exact_checked > 0,
        format!(
            "{} runs: {unbalanced} unbalanced ledgers; draws = floor(N/10) wrong for {draw_count_wrong} workers; \
             reviews = floor(N/10) wrong for {review_count_wrong} of {exact_checked} workers in runs where every \
             draw is viable; {carried_total} draws carried forward elsewhere",
            runs.len()
        ),
    )
}

// ---------------------------------------------------------------- 5

fn posting(level: Level) -> TaskPosting {
    TaskPosting {
        id: TaskId(1),
        requester: RequesterId(1),
        target_level: level,
        price: 100,
        estimated_seconds: 60,
        opted_out_of_review: false,
        status: TaskStatus::Live,
        posted_at: 0,
    }
}

fn expected_removal(population: u64) -> u64 {
    3u64.max((3 * population).div_ceil(100))
}

fn criterion_5() -> Verdict {
    let rule = RejectionRule::default();
    let level = Level::FLOOR;
    let post = posting(level);
    let mut wrong = Vec::new();
    for population in 1..=10_000u64 {
        let mut tally = RejectionTally::default();
        let mut removed_at = None;
        for k in 1..=population {
            match reject_task(&post, &mut tally, &rule, WorkerId(k), level, population).unwrap() {
                RejectEffect::Rejected {
                    removed: true, count, ..
                } => {
                    removed_at = Some(count);
                    break;
                }
                RejectEffect::Rejected { .. } => {}
                RejectEffect::Duplicate => unreachable!("distinct workers"),
            }
        }
        let want = expected_removal(population);
        let want = (want <= population).then_some(want);
        if removed_at != want {
            wrong.push(population);
        }
    }

    // The same thresholds through the engine, including feed removal.
    let mut engine_wrong = Vec::new();
    for population in (1..=120).chain([150, 199, 200, 201, 334, 1000]) {
        let workers: Vec<WorkerId> = (1..=population).map(WorkerId).collect();
        let mut engine = Engine::new(ConditionMode::Guild, EngineConfig::default(), workers, 1).unwrap();
        let task = engine.post_task(RequesterId(1), level, 100, 60, false, 0).unwrap();
        let mut removed_at = None;
        for k in 1..=population {
            if let RejectEffect::Rejected {
                removed: true, count, ..
            } = engine.reject_task(WorkerId(k), task, k).unwrap()
            {
                removed_at = Some(count);
                let visible = engine
                    .state()
                    .feed(WorkerId(population))
                    .unwrap()
                    .iter()
                    .any(|p| p.id == task);
                if visible {
                    removed_at = None;
                }
                break;
            }
        }
        let want = expected_removal(population);
        if removed_at != (want <= population).then_some(want) {
            engine_wrong.push(population);
        }
    }
    verdict(
        wrong.is_empty() && engine_wrong.is_empty(),
        format!(
            "populations 1..=10000: {} wrong {:?}; engine spot checks: {} wrong {:?}",
            wrong.len(),
            &wrong[..wrong.len().min(5)],
            engine_wrong.len(),
            &engine_wrong[..engine_wrong.len().min(5)]
        ),
    )
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Verdict {
    let started = Instant::now();
    let seeds = 50;
    let (mut guild_r, mut guild_beats_control, mut significant) = (0, 0, 0);
    let mut tasks = 0.0;
    for seed in 1..=seeds {
        let cfg = ExperimentConfig {
            seed,
            ..ExperimentConfig::default()
        };
        let result = run_experiment(&cfg).expect("default run");
        let report = analyze(&result.agents);
        let g = report.guild.correlation.ok().map(|c| c.r);
        let c = report.control.correlation.ok().map(|c| c.r);
        guild_r += u32::from(g.is_some_and(|g| g > 0.3));
        guild_beats_control += u32::from(matches!((g, c), (Some(g), Some(c)) if g > c));
        significant += u32::from(report.rating_difference.ok().is_some_and(|t| t.p_value < 0.001));
        tasks += result.agents.iter().map(|a| a.tasks as f64).sum::<f64>() / result.agents.len() as f64;
    }
    let elapsed = started.elapsed();
    let budget = Duration::from_secs(120);
    let need = 45;
    verdict(
        guild_r >= need && guild_beats_control >= need && significant >= need && elapsed < budget,
        format!(
            "{seeds} seeds, {:.1} tasks/worker: guild r > 0.3 in {guild_r}, guild r > control r in \
             {guild_beats_control}, Welch p < 0.001 in {significant} (need {need}); {}",
            tasks / seeds as f64,
            within(elapsed, budget)
        ),
    )
}

// ---------------------------------------------------------------- 7

/// `(β, diag((XᵀX)⁻¹))` by Gauss-Jordan elimination on the normal equations.
fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = rows[0].len();
    let mut m = vec![vec![0.0; 2 * k + 1]; k];
    for (row, yi) in rows.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                m[i][j] += row[i] * row[j];
            }
            m[i][k] += row[i] * yi;
        }
    }
    for (i, line) in m.iter_mut().enumerate() {
        line[k + 1 + i] = 1.0;
    }
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= p);
        let pivot_row = m[col].clone();
        for (r, line) in m.iter_mut().enumerate() {
            let factor = line[col];
            if r != col && factor != 0.0 {
                line.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= factor * pv);
            }
        }
    }
    (
        (0..k).map(|i| m[i][k]).collect(),
        (0..k).map(|i| m[i][k + 1 + i]).collect(),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (n, k) = (50, 3);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut row = vec![1.0];
                row.extend((1..k).map(|_| rng.random_range(-10.0..10.0)));
                row
            })
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| rng.random_range(-3.0..3.0) + 0.7 * r[1] - 1.1 * r[2] + rng.random_range(-2.0..2.0))
            .collect();
        let report = ols_regress(&Matrix::from_rows(&rows).unwrap(), &y, &[]).unwrap();
        let (beta, inv_diag) = normal_equations(&rows, &y);
        let rss: f64 = rows
            .iter()
            .zip(&y)
            .map(|(r, yi)| (yi - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).powi(2))
            .sum();
        let sigma_sq = rss / (n - k) as f64;
        for (j, c) in report.coefficients.iter().enumerate() {
            worst = worst.max(rel_err(c.estimate, beta[j]));
            worst = worst.max(rel_err(c.std_error, (sigma_sq * inv_diag[j]).sqrt()));
        }
    }
    let welch = welch_t(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
    let welch_ok = (welch.t + 1.2247).abs() < 1e-4 && (welch.df - 4.0).abs() < 1e-4;
    let r = pearson(&[1.0, 3.0, 2.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap().r;
    verdict(
        worst <= 1e-9 && welch_ok && r == 0.8,
        format!(
            "OLS worst relative error {worst:.2e} over 100 instances; Welch t={:.4} df={:.4}; Pearson r={r}",
            welch.t, welch.df
        ),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8(runs: &[Fuzzed]) -> Verdict {
    let cfg = ExperimentConfig::default();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let identical =
        a.guild_log.to_jsonl() == b.guild_log.to_jsonl() && a.control_log.to_jsonl() == b.control_log.to_jsonl();
    let mut diverged = 0;
    for f in runs {
        let reread = EventLog::read_from(f.run.log.to_jsonl().as_bytes()).unwrap();
        match replay(&reread, &f.cfg.engine) {
            Ok(state) if state == f.run.state => {}
            _ => diverged += 1,
        }
    }
    verdict(
        identical && diverged == 0,
        format!(
            "default runs byte-identical: {identical} ({} + {} events); replay diverged on {diverged} of {} fuzzed runs",
            a.guild_log.len(),
            a.control_log.len(),
            runs.len()
        ),
    )
}

fn main() {
    let runs = fuzzed_runs();
    let results = [
        ("leveling oracle equivalence", criterion_1()),
        ("down-rule fidelity", criterion_2()),
        ("double-blind and assignment", criterion_3(&runs)),
        ("ledger conservation", criterion_4(&runs)),
        ("collective rejection", criterion_5()),
        ("simulator direction", criterion_6()),
        ("analytics oracles", criterion_7()),
        ("determinism and replay", criterion_8(&runs)),
    ];
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        println!(
            "criterion {} {name}: {} ({})",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
