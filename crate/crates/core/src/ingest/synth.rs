//! Seeded synthetic event streams.
//!
//! A model is a weighted transition matrix over `N + 2` states: a virtual
//! start (row 0), the `N` activities, and a virtual end (last index). Each
//! case is a random walk from start to end; up to `interleaving` cases run
//! concurrently and the generator picks which one advances at every step.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::event::{Event, Timestamp};
use crate::graph::FrequencyGraph;

/// Timestamp of the first generated event (2017-07-14T02:40:00Z).
const BASE_TIMESTAMP: Timestamp = 1_500_000_000_000;
const STEP_MS: Timestamp = 1_000;

/// Name of the activity that closes every synthetic case.
pub const CLOSE_ACTIVITY: &str = "close";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("need at least {min} activities, got {got}")]
    TooFewActivities { min: usize, got: usize },
    #[error("weight matrix must be {expected}x{expected}")]
    Shape { expected: usize },
    #[error("weights must be finite and non-negative")]
    BadWeight,
    #[error("row {0} has no outgoing weight")]
    DeadState(usize),
    #[error("the virtual start may not lead directly to the virtual end")]
    EmptyTrace,
    #[error("interleaving degree must be positive")]
    ZeroInterleaving,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticModel {
    activities: Vec<String>,
    /// Row-major `(N+2) x (N+2)`; row 0 is the virtual start, the last index
    /// is the virtual end (its row is unused).
    weights: Vec<Vec<f64>>,
    interleaving: usize,
    seed: u64,
}

/// A generated stream and the exact graph of what was emitted.
#[derive(Clone, Debug)]
pub struct Generated {
    pub events: Vec<Event>,
    pub dfg: FrequencyGraph,
    /// Largest number of cases that were open at the same time.
    pub max_concurrent_cases: usize,
}

impl SyntheticModel {
    pub fn new(
        activities: Vec<String>,
        weights: Vec<Vec<f64>>,
        interleaving: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let n = activities.len();
        if n == 0 {
            return Err(ModelError::TooFewActivities { min: 1, got: 0 });
        }
        let states = n + 2;
        if weights.len() != states || weights.iter().any(|r| r.len() != states) {
            return Err(ModelError::Shape { expected: states });
        }
        if weights.iter().flatten().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ModelError::BadWeight);
        }
        for (i, row) in weights.iter().enumerate().take(n + 1) {
            if row[1..].iter().sum::<f64>() <= 0.0 {
                return Err(ModelError::DeadState(i));
            }
        }
        if weights[0][1..=n].iter().sum::<f64>() <= 0.0 {
            return Err(ModelError::EmptyTrace);
        }
        if interleaving == 0 {
            return Err(ModelError::ZeroInterleaving);
        }
        Ok(SyntheticModel {
            activities,
            weights,
            interleaving,
            seed,
        })
    }

    /// Random weights. The last activity is [`CLOSE_ACTIVITY`]: every other
    /// activity moves to it with probability `end_probability`, and it always
    /// ends the case.
    pub fn random(n: usize, end_probability: f64, interleaving: usize, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f7a_b1e5);
        Self::closed(n, end_probability, interleaving, seed, |_, _| rng.random_range(0.05..1.0))
    }

    /// Zipf-skewed weights: the `k`-th regular activity is chosen with weight
    /// proportional to `1 / k^exponent`, jittered per row, so a few
    /// activities and relations dominate and a long tail stays rare.
    pub fn zipf(
        n: usize,
        exponent: f64,
        end_probability: f64,
        interleaving: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x21bf_0000_0000_0001);
        Self::closed(n, end_probability, interleaving, seed, |_, target| {
            let rank = (target + 1) as f64;
            rank.powf(-exponent) * rng.random_range(0.5..1.5)
        })
    }

    fn closed(
        n: usize,
        end_probability: f64,
        interleaving: usize,
        seed: u64,
        mut weight: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::TooFewActivities { min: 2, got: n });
        }
        if !(0.0..1.0).contains(&end_probability) {
            return Err(ModelError::BadWeight);
        }
        let regular = n - 1;
        let close = n; // state index of the close activity
        let end = n + 1;
        let mut activities: Vec<String> = (0..regular).map(|i| format!("act{i:02}")).collect();
        activities.push(CLOSE_ACTIVITY.to_owned());

        let mut weights = vec![vec![0.0; n + 2]; n + 2];
        for (from, row) in weights.iter_mut().enumerate().take(regular + 1) {
            for target in 0..regular {
                row[target + 1] = weight(from, target);
            }
            if from > 0 {
                let mass: f64 = row[1..=regular].iter().sum();
                row[close] = mass * end_probability / (1.0 - end_probability);
            }
        }
        weights[close][end] = 1.0;
        Self::new(activities, weights, interleaving, seed)
    }

    pub fn activities(&self) -> &[String] {
        &self.activities
    }

    pub fn interleaving(&self) -> usize {
        self.interleaving
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_interleaving(mut self, interleaving: usize) -> Result<Self, ModelError> {
        if interleaving == 0 {
            return Err(ModelError::ZeroInterleaving);
        }
        self.interleaving = interleaving;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Activities whose only successor is the virtual end.
    pub fn end_activities(&self) -> Vec<String> {
        let end = self.activities.len() + 1;
        self.activities
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let row = &self.weights[i + 1];
                row[end] > 0.0 && row[1..end].iter().all(|w| *w == 0.0)
            })
            .map(|(_, a)| a.clone())
            .collect()
    }
}

/// Emits `n_events` events. Timestamps are strictly increasing and the output
/// depends only on the model (including its seed).
pub fn generate(model: &SyntheticModel, n_events: usize) -> Generated {
    let n = model.activities.len();
    let end = n + 1;
    let samplers: Vec<Option<WeightedIndex<f64>>> = model
        .weights
        .iter()
        .take(n + 1)
        .map(|row| WeightedIndex::new(row).ok())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut events = Vec::with_capacity(n_events);
    let mut dfg = FrequencyGraph::default();
    let mut open: Vec<(String, usize)> = Vec::with_capacity(model.interleaving);
    let mut next_case = 0u64;
    let mut timestamp = BASE_TIMESTAMP;
    let mut max_concurrent = 0;

    while events.len() < n_events {
        if open.len() < model.interleaving {
            next_case += 1;
            open.push((format!("case{next_case}"), 0));
        }
        max_concurrent = max_concurrent.max(open.len());
        let slot = rng.random_range(0..open.len());
        let state = open[slot].1;
        let sampler = samplers[state].as_ref().expect("validated rows have weight");
        let next = sampler.sample(&mut rng);
        if next == end {
            open.swap_remove(slot);
            continue;
        }
        let activity = &model.activities[next - 1];
        *dfg.nodes.entry(activity.clone()).or_default() += 1;
        if state != 0 {
            let prev = model.activities[state - 1].clone();
            *dfg.arcs.entry((prev, activity.clone())).or_default() += 1;
        }
        events.push(Event {
            case_id: open[slot].0.clone(),
            activity: activity.clone(),
            timestamp,
        });
        timestamp += STEP_MS;
        open[slot].1 = next;
    }

    Generated {
        events,
        dfg,
        max_concurrent_cases: max_concurrent,
    }
}
