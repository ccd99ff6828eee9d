//! Exact offline discovery and the accuracy / memory metrics used to score
//! an online run against it.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::Event;
use crate::graph::{ArcUpdate, FrequencyGraph, ProcessMap, Touch};
use crate::policy::PolicyKind;

/// The four online techniques that can be compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Technique {
    Lcb,
    Lru,
    Lfu,
    LfuDa,
}

impl Technique {
    pub const ALL: [Technique; 4] = [Technique::Lcb, Technique::Lru, Technique::Lfu, Technique::LfuDa];

    pub fn name(self) -> &'static str {
        match self {
            Technique::Lcb => "lcb",
            Technique::Lru => "lru",
            Technique::Lfu => "lfu",
            Technique::LfuDa => "lfu-da",
        }
    }

    pub fn policy(self) -> Option<PolicyKind> {
        match self {
            Technique::Lcb => None,
            Technique::Lru => Some(PolicyKind::Lru),
            Technique::Lfu => Some(PolicyKind::Lfu),
            Technique::LfuDa => Some(PolicyKind::LfuDa),
        }
    }

    /// Storage cost of one activity, relation and case, in 4-byte words.
    pub fn word_costs(self) -> WordCosts {
        match self {
            Technique::Lcb => WordCosts::new(3, 4, 4),
            Technique::Lru => WordCosts::new(3, 4, 3),
            Technique::Lfu => WordCosts::new(2, 3, 3),
            Technique::LfuDa => WordCosts::new(3, 4, 3),
        }
    }
}

impl From<PolicyKind> for Technique {
    fn from(policy: PolicyKind) -> Self {
        match policy {
            PolicyKind::Lru => Technique::Lru,
            PolicyKind::Lfu => Technique::Lfu,
            PolicyKind::LfuDa => Technique::LfuDa,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<Technique> for String {
    fn from(t: Technique) -> String {
        t.name().to_owned()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown technique {0:?} (expected lru, lfu, lfu-da or lcb)")]
pub struct UnknownTechnique(pub String);

impl FromStr for Technique {
    type Err = UnknownTechnique;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("lcb") {
            return Ok(Technique::Lcb);
        }
        s.parse::<PolicyKind>()
            .map(Technique::from)
            .map_err(|_| UnknownTechnique(s.to_owned()))
    }
}

impl TryFrom<String> for Technique {
    type Error = UnknownTechnique;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WordCosts {
    pub activity: u64,
    pub relation: u64,
    pub case: u64,
}

impl WordCosts {
    const fn new(activity: u64, relation: u64, case: u64) -> Self {
        WordCosts {
            activity,
            relation,
            case,
        }
    }
}

pub const BYTES_PER_WORD: u64 = 4;

/// `M = M(activity)|V| + M(relation)|E| + M(case)|S_RC|` in words.
pub fn memory_words(technique: Technique, nodes: usize, arcs: usize, cases: usize) -> u64 {
    let c = technique.word_costs();
    c.activity * nodes as u64 + c.relation * arcs as u64 + c.case * cases as u64
}

/// Same as [`memory_words`], taking the technique by name.
pub fn memory_words_by_name(
    technique: &str,
    nodes: usize,
    arcs: usize,
    cases: usize,
) -> Result<u64, UnknownTechnique> {
    Ok(memory_words(technique.parse()?, nodes, arcs, cases))
}

/// Builds the exact directly-follows graph of a finite log. Events are
/// stably sorted by timestamp first, so equal timestamps keep input order.
pub fn offline_dfg(events: &[Event]) -> ProcessMap {
    let mut order: Vec<&Event> = events.iter().collect();
    order.sort_by_key(|e| e.timestamp);

    let mut map = ProcessMap::unbounded();
    let mut last: HashMap<&str, &str> = HashMap::new();
    for (i, event) in order.into_iter().enumerate() {
        let idx = i as u64 + 1;
        if map.touch_activity(&event.activity, idx, 0) == Touch::Missing {
            map.insert_activity(&event.activity, idx, 0)
                .expect("unbounded map has room");
        }
        if let Some(prev) = last.insert(&event.case_id, &event.activity) {
            let update = map
                .touch_or_insert_arc(prev, &event.activity, idx, 0)
                .expect("both endpoints were observed");
            debug_assert_ne!(update, ArcUpdate::NeedsRoom);
        }
    }
    map
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("the complete graph has no relations, so accuracy is undefined")]
    ZeroTotalFrequency,
}

/// Relation-frequency distance between a discovered graph and the exact one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub loss: u64,
    pub total_frequency: u64,
    /// `1 - loss / total_frequency`, clamped at 0.
    pub accuracy: f64,
    /// The unclamped value; negative when spurious mass exceeds the total.
    pub raw_accuracy: f64,
}

impl Accuracy {
    /// Exact comparison `accuracy >= num / den` using integer arithmetic.
    pub fn at_least(&self, num: u64, den: u64) -> bool {
        // 1 - loss/total >= num/den  <=>  (total - loss) * den >= num * total
        let kept = self.total_frequency as i128 - self.loss as i128;
        kept * den as i128 >= num as i128 * self.total_frequency as i128
    }

    pub fn is_exact(&self) -> bool {
        self.loss == 0
    }
}

/// Sums `|γ_complete(r) - γ_discovered(r)|` over the union of relations of
/// both graphs (absent relations count as 0). Node frequencies do not enter
/// the loss.
pub fn accuracy(complete: &FrequencyGraph, discovered: &FrequencyGraph) -> Result<Accuracy, EvalError> {
    let total = complete.total_arc_frequency();
    if total == 0 {
        return Err(EvalError::ZeroTotalFrequency);
    }
    let mut loss = 0u64;
    for (key, &expected) in &complete.arcs {
        let found = discovered.arcs.get(key).copied().unwrap_or(0);
        loss += expected.abs_diff(found);
    }
    for (key, &found) in &discovered.arcs {
        if !complete.arcs.contains_key(key) {
            loss += found;
        }
    }
    let raw = 1.0 - loss as f64 / total as f64;
    Ok(Accuracy {
        loss,
        total_frequency: total,
        accuracy: raw.max(0.0),
        raw_accuracy: raw,
    })
}

/// Full evaluation of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub technique: Technique,
    pub budget: usize,
    pub loss: u64,
    pub total_frequency: u64,
    pub accuracy: f64,
    pub raw_accuracy: f64,
    pub memory_words: u64,
    pub memory_bytes: u64,
    pub ms_per_event: f64,
    pub events_processed: u64,
}

impl EvalReport {
    pub fn new(
        technique: Technique,
        budget: usize,
        acc: Accuracy,
        memory_words: u64,
        ms_per_event: f64,
        events_processed: u64,
    ) -> Self {
        EvalReport {
            technique,
            budget,
            loss: acc.loss,
            total_frequency: acc.total_frequency,
            accuracy: acc.accuracy,
            raw_accuracy: acc.raw_accuracy,
            memory_words,
            memory_bytes: memory_words * BYTES_PER_WORD,
            ms_per_event,
            events_processed,
        }
    }
}
