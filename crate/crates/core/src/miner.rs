//! The per-event update loop: correlate each event with its case, update the
//! process map under its budget, and keep the running-case store bounded.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use serde_json::json;
use thiserror::Error;

use crate::event::{Event, MalformedEvent, Timestamp};
use crate::eval::{memory_words, Technique};
use crate::graph::{ArcUpdate, FrequencyGraph, ProcessMap, Touch};
use crate::policy::{evict_once, AgingState, PolicyKind, Victim};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseEntry {
    pub last_activity: Arc<str>,
    pub last_update_idx: u64,
    pub first_seen: Timestamp,
    seq: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("running-case store is empty")]
    EmptyStore,
}

/// Last observed activity per running case, capped at `budget` entries.
/// When full, the least recently updated case makes room.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunningCaseStore {
    budget: usize,
    entries: HashMap<Arc<str>, CaseEntry>,
    recency: BTreeMap<(u64, u64), Arc<str>>,
    next_seq: u64,
}

impl RunningCaseStore {
    pub fn new(budget: usize) -> Self {
        assert!(budget > 0, "running-case budget must be positive");
        RunningCaseStore {
            budget,
            entries: HashMap::new(),
            recency: BTreeMap::new(),
            next_seq: 0,
        }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.budget
    }

    pub fn get(&self, case_id: &str) -> Option<&CaseEntry> {
        self.entries.get(case_id)
    }

    pub fn contains(&self, case_id: &str) -> bool {
        self.entries.contains_key(case_id)
    }

    /// Records `activity` as the latest event of `case_id`. New cases are
    /// admitted after evicting the least recently updated case if the store
    /// is full; the evicted case id is returned.
    pub fn record(
        &mut self,
        case_id: &str,
        activity: Arc<str>,
        idx: u64,
        timestamp: Timestamp,
    ) -> Option<Arc<str>> {
        let seq = self.next_seq;
        self.next_seq += 1;
        if let Some(entry) = self.entries.get_mut(case_id) {
            let key = self
                .recency
                .remove(&(entry.last_update_idx, entry.seq))
                .expect("recency entry present");
            entry.last_activity = activity;
            entry.last_update_idx = idx;
            entry.seq = seq;
            self.recency.insert((idx, seq), key);
            return None;
        }
        let evicted = if self.is_full() {
            self.evict_case().ok()
        } else {
            None
        };
        let key: Arc<str> = Arc::from(case_id);
        self.entries.insert(
            key.clone(),
            CaseEntry {
                last_activity: activity,
                last_update_idx: idx,
                first_seen: timestamp,
                seq,
            },
        );
        self.recency.insert((idx, seq), key);
        debug_assert!(self.entries.len() <= self.budget);
        evicted
    }

    pub fn remove(&mut self, case_id: &str) -> Option<CaseEntry> {
        let entry = self.entries.remove(case_id)?;
        self.recency.remove(&(entry.last_update_idx, entry.seq));
        Some(entry)
    }

    /// Removes the case with the smallest last-update index.
    pub fn evict_case(&mut self) -> Result<Arc<str>, StoreError> {
        let (_, case_id) = self.recency.pop_first().ok_or(StoreError::EmptyStore)?;
        self.entries.remove(&case_id);
        Ok(case_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CaseEntry)> {
        self.entries.iter().map(|(k, v)| (&**k, v))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("process map budget must be at least 2, got {0}")]
    MapBudgetTooSmall(usize),
    #[error("running-case budget must be at least 1")]
    ZeroCaseBudget,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinerConfig {
    pub policy: PolicyKind,
    pub b_pm: usize,
    pub b_rc: usize,
    pub end_activities: HashSet<String>,
    /// Cases running longer than this many milliseconds are dropped.
    pub case_ttl: Option<u64>,
}

impl MinerConfig {
    pub fn new(policy: PolicyKind, b_pm: usize, b_rc: usize) -> Self {
        MinerConfig {
            policy,
            b_pm,
            b_rc,
            end_activities: HashSet::new(),
            case_ttl: None,
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

    pub fn with_case_ttl(mut self, ttl_ms: u64) -> Self {
        self.case_ttl = Some(ttl_ms);
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.b_pm < 2 {
            return Err(ConfigError::MapBudgetTooSmall(self.b_pm));
        }
        if self.b_rc == 0 {
            return Err(ConfigError::ZeroCaseBudget);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeAction {
    Incremented,
    Inserted,
}

/// What happened to the directly-follows relation of an event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RelationOutcome {
    /// The case had no stored predecessor.
    NoPredecessor,
    Incremented(Arc<str>, Arc<str>),
    Inserted(Arc<str>, Arc<str>),
    /// An endpoint was missing from the map (evicted earlier or while making
    /// room), so the relation could not be stored without dangling.
    Dropped(Arc<str>, Arc<str>),
}

/// Per-event summary, also used for the structured trace log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateReport {
    pub idx: u64,
    pub node: NodeAction,
    pub relation: RelationOutcome,
    pub evicted_map_entries: usize,
    pub victims: Vec<Victim>,
    pub evicted_cases: usize,
    pub case_expired: bool,
}

impl UpdateReport {
    pub fn relation_recorded(&self) -> Option<(&str, &str)> {
        match &self.relation {
            RelationOutcome::Incremented(s, t) | RelationOutcome::Inserted(s, t) => Some((s, t)),
            _ => None,
        }
    }

    /// One JSON object describing this update.
    pub fn trace_line(&self, event: &Event) -> String {
        let relation = match &self.relation {
            RelationOutcome::NoPredecessor => json!(null),
            RelationOutcome::Incremented(s, t) => json!({"source": &**s, "target": &**t, "action": "incremented"}),
            RelationOutcome::Inserted(s, t) => json!({"source": &**s, "target": &**t, "action": "inserted"}),
            RelationOutcome::Dropped(s, t) => json!({"source": &**s, "target": &**t, "action": "dropped"}),
        };
        let victims: Vec<_> = self
            .victims
            .iter()
            .map(|v| json!({"element": v.element.to_string(), "key": v.key}))
            .collect();
        json!({
            "idx": self.idx,
            "case": event.case_id,
            "activity": event.activity,
            "node": match self.node { NodeAction::Incremented => "incremented", NodeAction::Inserted => "inserted" },
            "relation": relation,
            "evicted_map_entries": self.evicted_map_entries,
            "victims": victims,
            "evicted_cases": self.evicted_cases,
            "case_expired": self.case_expired,
        })
        .to_string()
    }
}

/// How often each activity opened or closed a case. Only tracked when end
/// activities are configured.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CaseBoundaries {
    pub starts: BTreeMap<String, u64>,
    pub ends: BTreeMap<String, u64>,
}

/// Immutable copy of a miner's map and stream position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinerSnapshot {
    pub map: ProcessMap,
    pub position: u64,
}

/// Common surface of the online techniques, used by the runners.
pub trait OnlineMiner {
    fn observe(&mut self, event: &Event) -> Result<UpdateReport, MalformedEvent>;
    fn technique(&self) -> Technique;
    fn budget(&self) -> usize;
    fn graph(&self) -> FrequencyGraph;
    /// Current memory in words, per the technique's cost table.
    fn memory_words(&self) -> u64;
    fn events_processed(&self) -> u64;
    fn boundaries(&self) -> Option<&CaseBoundaries>;
}

/// Streaming process-map miner with a cache-replacement deletion mechanism.
#[derive(Clone, Debug)]
pub struct StreamMiner {
    config: MinerConfig,
    map: ProcessMap,
    cases: RunningCaseStore,
    aging: AgingState,
    position: u64,
    boundaries: Option<CaseBoundaries>,
}

impl StreamMiner {
    pub fn new(config: MinerConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(StreamMiner {
            map: ProcessMap::with_policy(config.b_pm, config.policy),
            cases: RunningCaseStore::new(config.b_rc),
            aging: AgingState::new(),
            position: 0,
            boundaries: (!config.end_activities.is_empty()).then(CaseBoundaries::default),
            config,
        })
    }

    pub fn config(&self) -> &MinerConfig {
        &self.config
    }

    pub fn map(&self) -> &ProcessMap {
        &self.map
    }

    pub fn cases(&self) -> &RunningCaseStore {
        &self.cases
    }

    pub fn aging(&self) -> AgingState {
        self.aging
    }

    /// Number of events observed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn snapshot(&self) -> MinerSnapshot {
        MinerSnapshot {
            map: self.map.clone(),
            position: self.position,
        }
    }

    /// True when `event` ends its case: the activity is a configured end
    /// activity, or the case has been running longer than the TTL.
    pub fn is_expired(&self, case_id: &str, event: &Event) -> bool {
        if self.config.end_activities.contains(&event.activity) {
            return true;
        }
        match self.config.case_ttl {
            Some(ttl) => {
                let first_seen = self
                    .cases
                    .get(case_id)
                    .map_or(event.timestamp, |c| c.first_seen);
                event.timestamp.saturating_sub(first_seen) > ttl
            }
            None => false,
        }
    }

    fn evict(&mut self, report: &mut UpdateReport) {
        let eviction = evict_once(self.config.policy, &mut self.map, &mut self.aging)
            .expect("a full map with budget >= 2 is non-empty");
        report.evicted_map_entries += eviction.removed;
        report.victims.push(eviction.victim);
    }

    pub fn observe(&mut self, event: &Event) -> Result<UpdateReport, MalformedEvent> {
        event.validate()?;
        let idx = self.position + 1;
        let activity = event.activity.as_str();
        let mut report = UpdateReport {
            idx,
            node: NodeAction::Incremented,
            relation: RelationOutcome::NoPredecessor,
            evicted_map_entries: 0,
            victims: Vec::new(),
            evicted_cases: 0,
            case_expired: false,
        };

        if self.map.touch_activity(activity, idx, self.aging.level()) == Touch::Missing {
            if self.map.is_full() {
                self.evict(&mut report);
            }
            self.map
                .insert_activity(activity, idx, self.aging.level())
                .expect("eviction made room");
            report.node = NodeAction::Inserted;
        }
        let current: Arc<str> = self
            .map
            .node(activity)
            .map(|n| n.activity.clone())
            .unwrap_or_else(|| Arc::from(activity));

        let previous = self.cases.get(&event.case_id).map(|c| c.last_activity.clone());
        if let Some(prev) = previous.clone() {
            report.relation = self.record_relation(prev, current.clone(), idx, &mut report);
        }

        let expired = self.is_expired(&event.case_id, event);
        report.case_expired = expired;
        if expired {
            self.cases.remove(&event.case_id);
        } else if self
            .cases
            .record(&event.case_id, current.clone(), idx, event.timestamp)
            .is_some()
        {
            report.evicted_cases = 1;
        }

        if let Some(b) = self.boundaries.as_mut() {
            if previous.is_none() {
                *b.starts.entry(activity.to_owned()).or_default() += 1;
            }
            if self.config.end_activities.contains(activity) {
                *b.ends.entry(activity.to_owned()).or_default() += 1;
            }
        }

        self.position = idx;
        debug_assert!(self.map.len() <= self.config.b_pm);
        debug_assert!(self.cases.len() <= self.config.b_rc);
        Ok(report)
    }

    fn record_relation(
        &mut self,
        source: Arc<str>,
        target: Arc<str>,
        idx: u64,
        report: &mut UpdateReport,
    ) -> RelationOutcome {
        if !self.map.contains_activity(&source) || !self.map.contains_activity(&target) {
            return RelationOutcome::Dropped(source, target);
        }
        let update = self
            .map
            .touch_or_insert_arc(&source, &target, idx, self.aging.level())
            .expect("endpoints checked above");
        match update {
            ArcUpdate::Incremented => RelationOutcome::Incremented(source, target),
            ArcUpdate::Inserted => RelationOutcome::Inserted(source, target),
            ArcUpdate::NeedsRoom => {
                self.evict(report);
                if !self.map.contains_activity(&source) || !self.map.contains_activity(&target) {
                    return RelationOutcome::Dropped(source, target);
                }
                let retry = self
                    .map
                    .touch_or_insert_arc(&source, &target, idx, self.aging.level())
                    .expect("endpoints checked above");
                debug_assert_eq!(retry, ArcUpdate::Inserted);
                RelationOutcome::Inserted(source, target)
            }
        }
    }
}

impl OnlineMiner for StreamMiner {
    fn observe(&mut self, event: &Event) -> Result<UpdateReport, MalformedEvent> {
        StreamMiner::observe(self, event)
    }

    fn technique(&self) -> Technique {
        self.config.policy.into()
    }

    fn budget(&self) -> usize {
        self.config.b_pm
    }

    fn graph(&self) -> FrequencyGraph {
        self.map.to_graph()
    }

    fn memory_words(&self) -> u64 {
        let cases = self.cases.len();
        let ttl_words = if self.config.case_ttl.is_some() { cases as u64 } else { 0 };
        memory_words(self.technique(), self.map.node_count(), self.map.arc_count(), cases) + ttl_words
    }

    fn events_processed(&self) -> u64 {
        self.position
    }

    fn boundaries(&self) -> Option<&CaseBoundaries> {
        self.boundaries.as_ref()
    }
}
