//! Running techniques over finite event sequences and sweeping budgets.
//!
//! Each sweep point owns its miner and replays the shared, read-only event
//! slice. With the `parallel` feature the points run on the rayon pool;
//! without it, or with [`Execution::Sequential`], they run one after another.
//! Results are identical either way apart from wall-clock timings.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::event::{Event, MalformedEvent};
use crate::eval::{accuracy, Accuracy, EvalError, Technique, BYTES_PER_WORD};
use crate::graph::{lossless_budget, lossless_budget_directed, FrequencyGraph};
use crate::lcb::{LcbConfig, LcbState};
use crate::miner::{CaseBoundaries, ConfigError, MinerConfig, OnlineMiner, StreamMiner};

/// Everything needed to start one online run except the technique and budget.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunSettings {
    /// Running-case budget for the cache-replacement techniques.
    pub b_rc: usize,
    pub end_activities: HashSet<String>,
    pub case_ttl: Option<u64>,
}

impl RunSettings {
    pub fn new(b_rc: usize) -> Self {
        RunSettings {
            b_rc,
            ..Default::default()
        }
    }

    pub fn with_end_activities<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.end_activities = names.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("LCB budget must be positive")]
    ZeroLcbBudget,
    #[error("event {index}: {source}")]
    Malformed {
        index: usize,
        #[source]
        source: MalformedEvent,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Builds a fresh miner for `technique`. `budget` is `B_PM` for the
/// cache-replacement policies and the shared item budget for LCB.
pub fn build_miner(
    technique: Technique,
    budget: usize,
    settings: &RunSettings,
) -> Result<Box<dyn OnlineMiner + Send>, RunError> {
    match technique.policy() {
        Some(policy) => {
            let mut config = MinerConfig::new(policy, budget, settings.b_rc);
            config.end_activities = settings.end_activities.clone();
            config.case_ttl = settings.case_ttl;
            Ok(Box::new(StreamMiner::new(config)?))
        }
        None => {
            if budget == 0 {
                return Err(RunError::ZeroLcbBudget);
            }
            let mut config = LcbConfig::new(budget);
            config.end_activities = settings.end_activities.clone();
            config.case_ttl = settings.case_ttl;
            Ok(Box::new(LcbState::new(config)))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timing {
    pub mean_ms: f64,
    pub p99_ms: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub technique: Technique,
    pub budget: usize,
    pub graph: FrequencyGraph,
    pub boundaries: Option<CaseBoundaries>,
    /// Maximum of the per-event memory checkpoints, in words.
    pub peak_memory_words: u64,
    pub events_processed: u64,
    /// Update-loop time only; `None` when timing was disabled.
    pub timing: Option<Timing>,
}

/// Feeds every event to `miner`, recording peak memory after each one.
pub fn drive(
    miner: &mut (dyn OnlineMiner + Send),
    events: &[Event],
    timed: bool,
) -> Result<(u64, Option<Timing>), RunError> {
    let mut peak = miner.memory_words();
    let mut samples = Vec::with_capacity(if timed { events.len() } else { 0 });
    for (index, event) in events.iter().enumerate() {
        let result = if timed {
            let start = Instant::now();
            let r = miner.observe(event);
            samples.push(start.elapsed().as_nanos() as u64);
            r
        } else {
            miner.observe(event)
        };
        result.map_err(|source| RunError::Malformed { index, source })?;
        peak = peak.max(miner.memory_words());
    }
    Ok((peak, timed.then(|| summarize(&mut samples))))
}

fn summarize(samples: &mut [u64]) -> Timing {
    if samples.is_empty() {
        return Timing::default();
    }
    let total: u128 = samples.iter().map(|&s| s as u128).sum();
    let mean_ms = total as f64 / samples.len() as f64 / 1e6;
    let rank = ((samples.len() as f64) * 0.99).ceil() as usize;
    let (_, p99, _) = samples.select_nth_unstable(rank.clamp(1, samples.len()) - 1);
    Timing {
        mean_ms,
        p99_ms: *p99 as f64 / 1e6,
    }
}

pub fn run(
    technique: Technique,
    budget: usize,
    settings: &RunSettings,
    events: &[Event],
    timed: bool,
) -> Result<RunOutcome, RunError> {
    let mut miner = build_miner(technique, budget, settings)?;
    let (peak_memory_words, timing) = drive(miner.as_mut(), events, timed)?;
    Ok(RunOutcome {
        technique,
        budget,
        graph: miner.graph(),
        boundaries: miner.boundaries().cloned(),
        peak_memory_words,
        events_processed: miner.events_processed(),
        timing,
    })
}

/// One point of a memory/accuracy sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub technique: Technique,
    pub budget: usize,
    pub accuracy: Option<f64>,
    pub peak_memory_words: Option<u64>,
    pub ms_per_event: Option<f64>,
    pub events_processed: Option<u64>,
    /// Exact accuracy terms, kept for integer comparisons.
    pub exact: Option<Accuracy>,
    pub error: Option<String>,
}

pub const BENCH_HEADER: &str =
    "technique,budget,accuracy,peak_memory_words,peak_memory_bytes,ms_per_event,events_processed";

impl BenchRow {
    pub fn peak_memory_bytes(&self) -> Option<u64> {
        self.peak_memory_words.map(|w| w * BYTES_PER_WORD)
    }

    /// One CSV line without newline. Fields of a failed run are left empty.
    pub fn to_csv(&self) -> String {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|v| v.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{}",
            self.technique,
            self.budget,
            opt(self.accuracy),
            opt(self.peak_memory_words),
            opt(self.peak_memory_bytes()),
            opt(self.ms_per_event.map(|m| format!("{m:.6}"))),
            opt(self.events_processed),
        )
    }

    pub fn from_csv(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 7 {
            return Err(format!("expected 7 fields, found {}", fields.len()));
        }
        fn opt<T: FromStr>(s: &str) -> Result<Option<T>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| format!("bad field {s:?}"))
            }
        }
        Ok(BenchRow {
            technique: fields[0].parse().map_err(|e| format!("{e}"))?,
            budget: fields[1].parse().map_err(|_| format!("bad budget {:?}", fields[1]))?,
            accuracy: opt(fields[2])?,
            peak_memory_words: opt(fields[3])?,
            ms_per_event: opt(fields[5])?,
            events_processed: opt(fields[6])?,
            exact: None,
            error: None,
        })
    }
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(BENCH_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.to_csv());
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

fn evaluate_point(
    technique: Technique,
    budget: usize,
    settings: &RunSettings,
    events: &[Event],
    oracle: &FrequencyGraph,
    timed: bool,
) -> BenchRow {
    let outcome = run(technique, budget, settings, events, timed)
        .and_then(|o| Ok((accuracy(oracle, &o.graph)?, o)));
    match outcome {
        Ok((acc, o)) => BenchRow {
            technique,
            budget,
            accuracy: Some(acc.accuracy),
            peak_memory_words: Some(o.peak_memory_words),
            ms_per_event: Some(o.timing.map_or(0.0, |t| t.mean_ms)),
            events_processed: Some(o.events_processed),
            exact: Some(acc),
            error: None,
        },
        Err(e) => BenchRow {
            technique,
            budget,
            accuracy: None,
            peak_memory_words: None,
            ms_per_event: None,
            events_processed: None,
            exact: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every `(technique, budget)` point against `oracle` and returns rows
/// sorted by technique name, then budget. A failing point yields a row with
/// `error` set; the others still run.
pub fn sweep(
    events: &[Event],
    oracle: &FrequencyGraph,
    points: &[(Technique, usize)],
    settings: &RunSettings,
    execution: Execution,
    timed: bool,
) -> Vec<BenchRow> {
    let eval = |&(t, b): &(Technique, usize)| evaluate_point(t, b, settings, events, oracle, timed);
    let mut rows: Vec<BenchRow> = match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            points.par_iter().map(eval).collect()
        }
        _ => points.iter().map(eval).collect(),
    };
    rows.sort_by(|a, b| {
        (a.technique.name(), a.budget).cmp(&(b.technique.name(), b.budget))
    });
    rows
}

/// Applies `f` to each item, on the rayon pool when requested and available.
pub fn map_items<T, R, F>(items: &[T], execution: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// `points` budgets spaced geometrically from `min` to `max` inclusive,
/// deduplicated after rounding.
pub fn geometric_budgets(min: usize, max: usize, points: usize) -> Vec<usize> {
    let min = min.max(1);
    if max <= min || points < 2 {
        return vec![max.max(min)];
    }
    let ratio = (max as f64 / min as f64).powf(1.0 / (points - 1) as f64);
    let mut out: Vec<usize> = (0..points)
        .map(|i| ((min as f64) * ratio.powi(i as i32)).round() as usize)
        .map(|b| b.clamp(min, max))
        .collect();
    *out.last_mut().expect("points >= 2") = max;
    out.dedup();
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid budget {0:?}: expected a count, losslessN or directedN")]
pub struct BadBudget(pub String);

/// Parses `123`, `lossless<N>` or `directed<N>`.
pub fn parse_budget(raw: &str) -> Result<usize, BadBudget> {
    let bad = || BadBudget(raw.to_owned());
    let helper = |rest: &str, f: fn(usize) -> Result<usize, _>| -> Result<usize, BadBudget> {
        let n: usize = rest.parse().map_err(|_| bad())?;
        f(n).map_err(|_| bad())
    };
    if let Some(rest) = raw.strip_prefix("lossless") {
        helper(rest, lossless_budget)
    } else if let Some(rest) = raw.strip_prefix("directed") {
        helper(rest, lossless_budget_directed)
    } else {
        raw.parse::<usize>().ok().filter(|&b| b > 0).ok_or_else(bad)
    }
}
