//! The budgeted directly-follows graph (process map).
//!
//! Activities are interned to small integer ids; every public method takes and
//! returns activity names. When the map is built for a [`PolicyKind`] it also
//! keeps an ordered victim index so that eviction does not need a full scan.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::policy::{score, ElementStats, PolicyKind};

pub(crate) type ActivityId = u32;

/// `(score, insertion sequence)`; the sequence number breaks score ties.
pub(crate) type IndexKey = (u64, u64);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("process map budget {budget} exhausted")]
    BudgetViolation { budget: usize },
    #[error("activity {0:?} is already present")]
    AlreadyPresent(String),
    #[error("arc endpoint {0:?} is not in the map")]
    DanglingEndpoint(String),
    #[error("element {0} not found")]
    NotFound(ElementRef),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("number of activities must be at least 1")]
pub struct ZeroActivities;

/// Element budget from the clique count: `N(N+1)/2 + N`.
///
/// This undercounts a directed graph with self-loops, which can hold `N²`
/// arcs; use [`lossless_budget_directed`] when losslessness must be guaranteed.
pub fn lossless_budget(n_activities: usize) -> Result<usize, ZeroActivities> {
    if n_activities == 0 {
        return Err(ZeroActivities);
    }
    Ok(n_activities * (n_activities + 1) / 2 + n_activities)
}

/// Element budget that holds every node and every directed arc: `N² + N`.
pub fn lossless_budget_directed(n_activities: usize) -> Result<usize, ZeroActivities> {
    if n_activities == 0 {
        return Err(ZeroActivities);
    }
    Ok(n_activities * n_activities + n_activities)
}

/// A node or an arc, addressed by activity names.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementRef {
    Node(Arc<str>),
    Arc(Arc<str>, Arc<str>),
}

impl ElementRef {
    pub fn node(activity: &str) -> Self {
        ElementRef::Node(Arc::from(activity))
    }

    pub fn arc(source: &str, target: &str) -> Self {
        ElementRef::Arc(Arc::from(source), Arc::from(target))
    }
}

impl std::fmt::Display for ElementRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ElementRef::Node(a) => write!(f, "node {a:?}"),
            ElementRef::Arc(s, t) => write!(f, "arc {s:?} -> {t:?}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeEntry {
    pub activity: Arc<str>,
    pub frequency: u64,
    /// Stream index of the latest update (used by LRU).
    pub last_seen_idx: u64,
    /// Aging level at insertion time (used by LFU-DA).
    pub aging_credit: u64,
    seq: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArcEntry {
    pub source: Arc<str>,
    pub target: Arc<str>,
    pub frequency: u64,
    pub last_seen_idx: u64,
    pub aging_credit: u64,
    seq: u64,
}

impl NodeEntry {
    /// Insertion sequence number, unique within one map.
    pub fn seq(&self) -> u64 {
        self.seq
    }
}

impl ArcEntry {
    pub fn seq(&self) -> u64 {
        self.seq
    }
}

impl ElementStats for NodeEntry {
    fn frequency(&self) -> u64 {
        self.frequency
    }
    fn last_seen_idx(&self) -> u64 {
        self.last_seen_idx
    }
    fn aging_credit(&self) -> u64 {
        self.aging_credit
    }
}

impl ElementStats for ArcEntry {
    fn frequency(&self) -> u64 {
        self.frequency
    }
    fn last_seen_idx(&self) -> u64 {
        self.last_seen_idx
    }
    fn aging_credit(&self) -> u64 {
        self.aging_credit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Touch {
    Incremented,
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcUpdate {
    Incremented,
    Inserted,
    NeedsRoom,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct NodeSlot {
    entry: NodeEntry,
    out: HashSet<ActivityId>,
    inc: HashSet<ActivityId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Interner {
    ids: HashMap<Arc<str>, ActivityId>,
    names: Vec<Option<Arc<str>>>,
    free: Vec<ActivityId>,
}

impl Interner {
    fn get(&self, name: &str) -> Option<ActivityId> {
        self.ids.get(name).copied()
    }

    fn intern(&mut self, name: &str) -> (ActivityId, Arc<str>) {
        if let Some(&id) = self.ids.get(name) {
            return (id, self.name(id).clone());
        }
        let name: Arc<str> = Arc::from(name);
        let id = match self.free.pop() {
            Some(id) => {
                self.names[id as usize] = Some(name.clone());
                id
            }
            None => {
                self.names.push(Some(name.clone()));
                ActivityId::try_from(self.names.len() - 1).expect("activity id space exhausted")
            }
        };
        self.ids.insert(name.clone(), id);
        (id, name)
    }

    fn release(&mut self, id: ActivityId) {
        if let Some(name) = self.names[id as usize].take() {
            self.ids.remove(&name);
            self.free.push(id);
        }
    }

    fn name(&self, id: ActivityId) -> &Arc<str> {
        self.names[id as usize]
            .as_ref()
            .expect("interned id refers to a live activity")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct VictimIndex {
    pub(crate) policy: PolicyKind,
    pub(crate) nodes: BTreeMap<IndexKey, ActivityId>,
    pub(crate) arcs: BTreeMap<IndexKey, (ActivityId, ActivityId)>,
}

/// Directly-follows graph with an element budget `|V| + |E| <= budget`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessMap {
    budget: usize,
    interner: Interner,
    nodes: HashMap<ActivityId, NodeSlot>,
    arcs: HashMap<(ActivityId, ActivityId), ArcEntry>,
    index: Option<VictimIndex>,
    next_seq: u64,
}

fn bump(frequency: &mut u64) {
    *frequency = frequency
        .checked_add(1)
        .expect("frequency counter overflowed u64");
}

impl ProcessMap {
    /// A map without a victim index. Suitable when eviction never runs.
    pub fn new(budget: usize) -> Self {
        assert!(budget > 0, "process map budget must be positive");
        ProcessMap {
            budget,
            interner: Interner::default(),
            nodes: HashMap::new(),
            arcs: HashMap::new(),
            index: None,
            next_seq: 0,
        }
    }

    /// A map with no effective budget limit.
    pub fn unbounded() -> Self {
        Self::new(usize::MAX)
    }

    /// A map that maintains the ordered victim index for `policy`.
    pub fn with_policy(budget: usize, policy: PolicyKind) -> Self {
        let mut map = Self::new(budget);
        map.index = Some(VictimIndex {
            policy,
            nodes: BTreeMap::new(),
            arcs: BTreeMap::new(),
        });
        map
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn policy(&self) -> Option<PolicyKind> {
        self.index.as_ref().map(|i| i.policy)
    }

    pub(crate) fn victim_index(&self) -> Option<&VictimIndex> {
        self.index.as_ref()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// `|V| + |E|`.
    pub fn len(&self) -> usize {
        self.nodes.len() + self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.budget
    }

    pub fn contains_activity(&self, activity: &str) -> bool {
        self.interner
            .get(activity)
            .is_some_and(|id| self.nodes.contains_key(&id))
    }

    pub fn node(&self, activity: &str) -> Option<&NodeEntry> {
        let id = self.interner.get(activity)?;
        self.nodes.get(&id).map(|slot| &slot.entry)
    }

    pub fn arc(&self, source: &str, target: &str) -> Option<&ArcEntry> {
        let s = self.interner.get(source)?;
        let t = self.interner.get(target)?;
        self.arcs.get(&(s, t))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeEntry> {
        self.nodes.values().map(|slot| &slot.entry)
    }

    pub fn arcs(&self) -> impl Iterator<Item = &ArcEntry> {
        self.arcs.values()
    }

    pub(crate) fn node_by_id(&self, id: ActivityId) -> &NodeEntry {
        &self.nodes[&id].entry
    }

    pub(crate) fn arc_by_ids(&self, key: (ActivityId, ActivityId)) -> &ArcEntry {
        &self.arcs[&key]
    }

    /// Increments an existing activity. Returns [`Touch::Missing`] without
    /// changing anything when the activity is absent.
    pub fn touch_activity(&mut self, activity: &str, idx: u64, _aging: u64) -> Touch {
        let Some(id) = self.interner.get(activity) else {
            return Touch::Missing;
        };
        let Some(slot) = self.nodes.get_mut(&id) else {
            return Touch::Missing;
        };
        let entry = &mut slot.entry;
        if let Some(index) = self.index.as_mut() {
            index.nodes.remove(&(score(index.policy, entry), entry.seq));
        }
        bump(&mut entry.frequency);
        entry.last_seen_idx = entry.last_seen_idx.max(idx);
        if let Some(index) = self.index.as_mut() {
            index.nodes.insert((score(index.policy, entry), entry.seq), id);
        }
        Touch::Incremented
    }

    /// Inserts a new activity with frequency 1. The caller must have made room.
    pub fn insert_activity(&mut self, activity: &str, idx: u64, aging: u64) -> Result<(), MapError> {
        if self.is_full() {
            return Err(MapError::BudgetViolation { budget: self.budget });
        }
        if self.contains_activity(activity) {
            return Err(MapError::AlreadyPresent(activity.to_owned()));
        }
        let (id, name) = self.interner.intern(activity);
        let seq = self.next_seq;
        self.next_seq += 1;
        let entry = NodeEntry {
            activity: name,
            frequency: 1,
            last_seen_idx: idx,
            aging_credit: aging,
            seq,
        };
        if let Some(index) = self.index.as_mut() {
            index.nodes.insert((score(index.policy, &entry), seq), id);
        }
        self.nodes.insert(
            id,
            NodeSlot {
                entry,
                out: HashSet::new(),
                inc: HashSet::new(),
            },
        );
        debug_assert!(self.len() <= self.budget);
        Ok(())
    }

    /// Increments the arc `source -> target`, or inserts it if there is room.
    /// Both endpoints must already be present.
    pub fn touch_or_insert_arc(
        &mut self,
        source: &str,
        target: &str,
        idx: u64,
        aging: u64,
    ) -> Result<ArcUpdate, MapError> {
        let s = self.live_id(source)?;
        let t = self.live_id(target)?;
        if let Some(entry) = self.arcs.get_mut(&(s, t)) {
            if let Some(index) = self.index.as_mut() {
                index.arcs.remove(&(score(index.policy, entry), entry.seq));
            }
            bump(&mut entry.frequency);
            entry.last_seen_idx = entry.last_seen_idx.max(idx);
            if let Some(index) = self.index.as_mut() {
                index.arcs.insert((score(index.policy, entry), entry.seq), (s, t));
            }
            return Ok(ArcUpdate::Incremented);
        }
        if self.is_full() {
            return Ok(ArcUpdate::NeedsRoom);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let entry = ArcEntry {
            source: self.interner.name(s).clone(),
            target: self.interner.name(t).clone(),
            frequency: 1,
            last_seen_idx: idx,
            aging_credit: aging,
            seq,
        };
        if let Some(index) = self.index.as_mut() {
            index.arcs.insert((score(index.policy, &entry), seq), (s, t));
        }
        self.arcs.insert((s, t), entry);
        self.nodes.get_mut(&s).expect("source present").out.insert(t);
        self.nodes.get_mut(&t).expect("target present").inc.insert(s);
        debug_assert!(self.len() <= self.budget);
        Ok(ArcUpdate::Inserted)
    }

    fn live_id(&self, activity: &str) -> Result<ActivityId, MapError> {
        self.interner
            .get(activity)
            .filter(|id| self.nodes.contains_key(id))
            .ok_or_else(|| MapError::DanglingEndpoint(activity.to_owned()))
    }

    /// Removes an arc, or a node together with every incident arc. Returns
    /// the number of entries removed.
    pub fn remove_element(&mut self, victim: &ElementRef) -> Result<usize, MapError> {
        let not_found = || MapError::NotFound(victim.clone());
        match victim {
            ElementRef::Arc(source, target) => {
                let s = self.live_id(source).map_err(|_| not_found())?;
                let t = self.live_id(target).map_err(|_| not_found())?;
                if !self.arcs.contains_key(&(s, t)) {
                    return Err(not_found());
                }
                self.remove_arc_ids(s, t);
                Ok(1)
            }
            ElementRef::Node(activity) => {
                let id = self.live_id(activity).map_err(|_| not_found())?;
                Ok(self.remove_node_id(id))
            }
        }
    }

    pub(crate) fn remove_arc_ids(&mut self, s: ActivityId, t: ActivityId) {
        let entry = self.arcs.remove(&(s, t)).expect("arc present");
        if let Some(index) = self.index.as_mut() {
            index.arcs.remove(&(score(index.policy, &entry), entry.seq));
        }
        if let Some(slot) = self.nodes.get_mut(&s) {
            slot.out.remove(&t);
        }
        if let Some(slot) = self.nodes.get_mut(&t) {
            slot.inc.remove(&s);
        }
    }

    pub(crate) fn remove_node_id(&mut self, id: ActivityId) -> usize {
        let slot = self.nodes.remove(&id).expect("node present");
        if let Some(index) = self.index.as_mut() {
            index.nodes.remove(&(score(index.policy, &slot.entry), slot.entry.seq));
        }
        let mut removed = 1;
        for &t in &slot.out {
            self.remove_arc_ids(id, t);
            removed += 1;
        }
        for &s in &slot.inc {
            if s != id {
                self.remove_arc_ids(s, id);
                removed += 1;
            }
        }
        self.interner.release(id);
        removed
    }

    pub(crate) fn element_ref_for_node(&self, id: ActivityId) -> ElementRef {
        ElementRef::Node(self.interner.name(id).clone())
    }

    pub(crate) fn element_ref_for_arc(&self, (s, t): (ActivityId, ActivityId)) -> ElementRef {
        ElementRef::Arc(self.interner.name(s).clone(), self.interner.name(t).clone())
    }

    /// Frequencies only, keyed by names, in deterministic order.
    pub fn to_graph(&self) -> FrequencyGraph {
        let mut graph = FrequencyGraph::default();
        for entry in self.nodes() {
            graph.nodes.insert(entry.activity.to_string(), entry.frequency);
        }
        for entry in self.arcs() {
            graph.arcs.insert(
                (entry.source.to_string(), entry.target.to_string()),
                entry.frequency,
            );
        }
        graph
    }

    /// Full consistency check: budget, no dangling arcs, adjacency and index
    /// agree with the stored entries.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.len() > self.budget {
            return Err(format!("{} elements exceed budget {}", self.len(), self.budget));
        }
        for (&(s, t), entry) in &self.arcs {
            let (Some(src), Some(dst)) = (self.nodes.get(&s), self.nodes.get(&t)) else {
                return Err(format!("dangling arc {} -> {}", entry.source, entry.target));
            };
            if !src.out.contains(&t) || !dst.inc.contains(&s) {
                return Err(format!("adjacency missing arc {} -> {}", entry.source, entry.target));
            }
            if entry.frequency == 0 {
                return Err("arc with zero frequency".into());
            }
        }
        let mut adjacency = 0;
        for (&id, slot) in &self.nodes {
            if slot.entry.frequency == 0 {
                return Err(format!("node {} with zero frequency", slot.entry.activity));
            }
            if self.interner.get(&slot.entry.activity) != Some(id) {
                return Err(format!("interner disagrees for {}", slot.entry.activity));
            }
            for t in &slot.out {
                if !self.arcs.contains_key(&(id, *t)) {
                    return Err(format!("stale adjacency from {}", slot.entry.activity));
                }
            }
            adjacency += slot.out.len();
        }
        if adjacency != self.arcs.len() {
            return Err("adjacency count differs from arc count".into());
        }
        if let Some(index) = &self.index {
            if index.nodes.len() != self.nodes.len() || index.arcs.len() != self.arcs.len() {
                return Err("victim index size mismatch".into());
            }
            for (&(key, seq), id) in &index.nodes {
                let entry = &self.nodes.get(id).ok_or("index names missing node")?.entry;
                if score(index.policy, entry) != key || entry.seq != seq {
                    return Err(format!("stale index key for node {}", entry.activity));
                }
            }
            for (&(key, seq), pair) in &index.arcs {
                let entry = self.arcs.get(pair).ok_or("index names missing arc")?;
                if score(index.policy, entry) != key || entry.seq != seq {
                    return Err(format!("stale index key for arc {} -> {}", entry.source, entry.target));
                }
            }
        }
        Ok(())
    }
}

/// Plain frequency view of a directly-follows graph, independent of budget
/// and policy metadata. Zero-frequency nodes are allowed here.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrequencyGraph {
    pub nodes: BTreeMap<String, u64>,
    pub arcs: BTreeMap<(String, String), u64>,
}

impl FrequencyGraph {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.arcs.is_empty()
    }

    pub fn total_arc_frequency(&self) -> u64 {
        self.arcs.values().sum()
    }

    pub fn node(&self, activity: &str) -> u64 {
        self.nodes.get(activity).copied().unwrap_or(0)
    }

    pub fn arc(&self, source: &str, target: &str) -> u64 {
        self.arcs
            .get(&(source.to_owned(), target.to_owned()))
            .copied()
            .unwrap_or(0)
    }
}
