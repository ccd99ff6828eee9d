//! Lossy Counting with Budget, the baseline online technique.
//!
//! Activities, relations and running cases share one item budget. Items carry
//! an observed count `f` and a maximal under-count `delta`. When an insertion
//! finds the budget exhausted, the bucket index `w` is advanced and every
//! item with `f + delta <= w` is dropped; if nothing qualifies, `w` keeps
//! advancing until something does. New items enter with `delta = w`.
//!
//! This is a reconstruction from the published description of the technique,
//! intended as a comparison baseline.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use crate::event::{Event, MalformedEvent, Timestamp};
use crate::eval::{memory_words, Technique};
use crate::graph::FrequencyGraph;
use crate::miner::{CaseBoundaries, NodeAction, OnlineMiner, RelationOutcome, UpdateReport};

type NameId = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LcbConfig {
    pub budget: usize,
    pub end_activities: HashSet<String>,
    pub case_ttl: Option<u64>,
}

impl LcbConfig {
    pub fn new(budget: usize) -> Self {
        LcbConfig {
            budget,
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
}

/// Public, name-based key of an item.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LcbKey {
    Activity(String),
    Relation(String, String),
    Case(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LcbItem {
    pub f: u64,
    pub delta: u64,
    seq: u64,
}

impl LcbItem {
    fn bound(&self) -> u64 {
        self.f + self.delta
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct CaseItem {
    item: LcbItem,
    last_activity: NameId,
    first_seen: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum ItemRef {
    Activity(NameId),
    Relation(NameId, NameId),
    Case(Arc<str>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CleanupCounts {
    pub activities: usize,
    pub relations: usize,
    pub cases: usize,
}

impl CleanupCounts {
    pub fn total(&self) -> usize {
        self.activities + self.relations + self.cases
    }
}

#[derive(Clone, Debug)]
pub struct LcbState {
    config: LcbConfig,
    names: Vec<Arc<str>>,
    name_ids: HashMap<Arc<str>, NameId>,
    activities: HashMap<NameId, LcbItem>,
    relations: HashMap<(NameId, NameId), LcbItem>,
    cases: HashMap<Arc<str>, CaseItem>,
    /// Items ordered by `f + delta`, ties by insertion.
    by_bound: BTreeSet<(u64, u64, ItemRef)>,
    w: u64,
    next_seq: u64,
    position: u64,
    boundaries: Option<CaseBoundaries>,
}

impl LcbState {
    pub fn new(config: LcbConfig) -> Self {
        assert!(config.budget > 0, "LCB budget must be positive");
        LcbState {
            boundaries: (!config.end_activities.is_empty()).then(CaseBoundaries::default),
            config,
            names: Vec::new(),
            name_ids: HashMap::new(),
            activities: HashMap::new(),
            relations: HashMap::new(),
            cases: HashMap::new(),
            by_bound: BTreeSet::new(),
            w: 0,
            next_seq: 0,
            position: 0,
        }
    }

    pub fn budget(&self) -> usize {
        self.config.budget
    }

    /// Current bucket index.
    pub fn bucket(&self) -> u64 {
        self.w
    }

    pub fn len(&self) -> usize {
        self.activities.len() + self.relations.len() + self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.config.budget
    }

    pub fn activity_count(&self) -> usize {
        self.activities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn case_count(&self) -> usize {
        self.cases.len()
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    fn intern(&mut self, name: &str) -> NameId {
        if let Some(&id) = self.name_ids.get(name) {
            return id;
        }
        let name: Arc<str> = Arc::from(name);
        let id = NameId::try_from(self.names.len()).expect("activity id space exhausted");
        self.names.push(name.clone());
        self.name_ids.insert(name, id);
        id
    }

    fn name(&self, id: NameId) -> &str {
        &self.names[id as usize]
    }

    pub fn get(&self, key: &LcbKey) -> Option<LcbItem> {
        let id = |n: &str| self.name_ids.get(n).copied();
        match key {
            LcbKey::Activity(a) => self.activities.get(&id(a)?).copied(),
            LcbKey::Relation(s, t) => self.relations.get(&(id(s)?, id(t)?)).copied(),
            LcbKey::Case(c) => self.cases.get(c.as_str()).map(|c| c.item),
        }
    }

    /// Every retained item with its name-based key.
    pub fn items(&self) -> Vec<(LcbKey, LcbItem)> {
        let mut out = Vec::with_capacity(self.len());
        for (&a, item) in &self.activities {
            out.push((LcbKey::Activity(self.name(a).to_owned()), *item));
        }
        for (&(s, t), item) in &self.relations {
            out.push((
                LcbKey::Relation(self.name(s).to_owned(), self.name(t).to_owned()),
                *item,
            ));
        }
        for (c, case) in &self.cases {
            out.push((LcbKey::Case(c.to_string()), case.item));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    fn new_item(&mut self) -> LcbItem {
        let seq = self.next_seq;
        self.next_seq += 1;
        LcbItem {
            f: 1,
            delta: self.w,
            seq,
        }
    }

    fn item_mut(&mut self, r: &ItemRef) -> Option<&mut LcbItem> {
        match r {
            ItemRef::Activity(a) => self.activities.get_mut(a),
            ItemRef::Relation(s, t) => self.relations.get_mut(&(*s, *t)),
            ItemRef::Case(c) => self.cases.get_mut(c).map(|c| &mut c.item),
        }
    }

    fn increment(&mut self, r: ItemRef) {
        let item = self.item_mut(&r).expect("item present");
        let old = (item.bound(), item.seq);
        item.f = item.f.checked_add(1).expect("item count overflowed u64");
        let new = (item.bound(), item.seq);
        self.by_bound.remove(&(old.0, old.1, r.clone()));
        self.by_bound.insert((new.0, new.1, r));
    }

    fn remove_item(&mut self, r: &ItemRef) -> Option<LcbItem> {
        let item = match r {
            ItemRef::Activity(a) => self.activities.remove(a),
            ItemRef::Relation(s, t) => self.relations.remove(&(*s, *t)),
            ItemRef::Case(c) => self.cases.remove(c).map(|c| c.item),
        }?;
        self.by_bound.remove(&(item.bound(), item.seq, r.clone()));
        Some(item)
    }

    fn make_room(&mut self, counts: &mut CleanupCounts) {
        if self.is_full() {
            let removed = self.cleanup_counts();
            counts.activities += removed.activities;
            counts.relations += removed.relations;
            counts.cases += removed.cases;
        }
    }

    /// Advances the bucket index and drops every item with `f + delta <= w`,
    /// relaxing `w` until at least one item goes. Returns the number removed.
    pub fn cleanup(&mut self) -> usize {
        self.cleanup_counts().total()
    }

    fn cleanup_counts(&mut self) -> CleanupCounts {
        let mut counts = CleanupCounts::default();
        self.w += 1;
        let Some(&(min_bound, _, _)) = self.by_bound.first() else {
            return counts;
        };
        // Stepwise relaxation stops at the smallest bound present.
        self.w = self.w.max(min_bound);
        while let Some((bound, _, r)) = self.by_bound.first().cloned() {
            if bound > self.w {
                break;
            }
            self.remove_item(&r);
            match r {
                ItemRef::Activity(_) => counts.activities += 1,
                ItemRef::Relation(..) => counts.relations += 1,
                ItemRef::Case(_) => counts.cases += 1,
            }
        }
        counts
    }

    fn touch_or_insert_activity(&mut self, a: NameId, counts: &mut CleanupCounts) -> NodeAction {
        if self.activities.contains_key(&a) {
            self.increment(ItemRef::Activity(a));
            return NodeAction::Incremented;
        }
        self.make_room(counts);
        let item = self.new_item();
        self.by_bound.insert((item.bound(), item.seq, ItemRef::Activity(a)));
        self.activities.insert(a, item);
        NodeAction::Inserted
    }

    fn touch_or_insert_relation(&mut self, s: NameId, t: NameId, counts: &mut CleanupCounts) -> bool {
        if self.relations.contains_key(&(s, t)) {
            self.increment(ItemRef::Relation(s, t));
            return false;
        }
        self.make_room(counts);
        let item = self.new_item();
        self.by_bound.insert((item.bound(), item.seq, ItemRef::Relation(s, t)));
        self.relations.insert((s, t), item);
        true
    }

    fn is_expired(&self, case_id: &str, event: &Event) -> bool {
        if self.config.end_activities.contains(&event.activity) {
            return true;
        }
        match self.config.case_ttl {
            Some(ttl) => {
                let first = self.cases.get(case_id).map_or(event.timestamp, |c| c.first_seen);
                event.timestamp.saturating_sub(first) > ttl
            }
            None => false,
        }
    }

    pub fn observe(&mut self, event: &Event) -> Result<UpdateReport, MalformedEvent> {
        event.validate()?;
        let idx = self.position + 1;
        let mut counts = CleanupCounts::default();
        let a = self.intern(&event.activity);
        let node = self.touch_or_insert_activity(a, &mut counts);

        let previous = self.cases.get(event.case_id.as_str()).map(|c| c.last_activity);
        let relation = match previous {
            None => RelationOutcome::NoPredecessor,
            Some(p) => {
                let inserted = self.touch_or_insert_relation(p, a, &mut counts);
                let (s, t) = (self.names[p as usize].clone(), self.names[a as usize].clone());
                if inserted {
                    RelationOutcome::Inserted(s, t)
                } else {
                    RelationOutcome::Incremented(s, t)
                }
            }
        };

        let expired = self.is_expired(&event.case_id, event);
        let case_key = ItemRef::Case(Arc::from(event.case_id.as_str()));
        if expired {
            self.remove_item(&case_key);
        } else if self.cases.contains_key(event.case_id.as_str()) {
            self.increment(case_key);
            self.cases
                .get_mut(event.case_id.as_str())
                .expect("case present")
                .last_activity = a;
        } else {
            self.make_room(&mut counts);
            let item = self.new_item();
            let ItemRef::Case(key) = &case_key else { unreachable!() };
            self.cases.insert(
                key.clone(),
                CaseItem {
                    item,
                    last_activity: a,
                    first_seen: event.timestamp,
                },
            );
            self.by_bound.insert((item.bound(), item.seq, case_key));
        }

        if let Some(b) = self.boundaries.as_mut() {
            if previous.is_none() {
                *b.starts.entry(event.activity.clone()).or_default() += 1;
            }
            if self.config.end_activities.contains(&event.activity) {
                *b.ends.entry(event.activity.clone()).or_default() += 1;
            }
        }

        self.position = idx;
        debug_assert!(self.len() <= self.config.budget);
        Ok(UpdateReport {
            idx,
            node,
            relation,
            evicted_map_entries: counts.activities + counts.relations,
            victims: Vec::new(),
            evicted_cases: counts.cases,
            case_expired: expired,
        })
    }

    /// Activities become nodes and relations become arcs. Relation endpoints
    /// whose activity item was cleaned up appear with frequency 0.
    pub fn snapshot(&self) -> FrequencyGraph {
        let mut graph = FrequencyGraph::default();
        for (&a, item) in &self.activities {
            graph.nodes.insert(self.name(a).to_owned(), item.f);
        }
        for (&(s, t), item) in &self.relations {
            let (s, t) = (self.name(s).to_owned(), self.name(t).to_owned());
            graph.nodes.entry(s.clone()).or_insert(0);
            graph.nodes.entry(t.clone()).or_insert(0);
            graph.arcs.insert((s, t), item.f);
        }
        graph
    }

    /// Checks the budget and that the ordering index mirrors the items.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.len() > self.config.budget {
            return Err(format!("{} items exceed budget {}", self.len(), self.config.budget));
        }
        if self.by_bound.len() != self.len() {
            return Err("bound index size mismatch".into());
        }
        let all = self
            .activities
            .values()
            .chain(self.relations.values())
            .chain(self.cases.values().map(|c| &c.item));
        for item in all {
            if item.f == 0 || item.delta > self.w {
                return Err(format!("bad item f={} delta={} w={}", item.f, item.delta, self.w));
            }
        }
        Ok(())
    }
}

impl OnlineMiner for LcbState {
    fn observe(&mut self, event: &Event) -> Result<UpdateReport, MalformedEvent> {
        LcbState::observe(self, event)
    }

    fn technique(&self) -> Technique {
        Technique::Lcb
    }

    fn budget(&self) -> usize {
        self.config.budget
    }

    fn graph(&self) -> FrequencyGraph {
        self.snapshot()
    }

    fn memory_words(&self) -> u64 {
        memory_words(
            Technique::Lcb,
            self.activities.len(),
            self.relations.len(),
            self.cases.len(),
        )
    }

    fn events_processed(&self) -> u64 {
        self.position
    }

    fn boundaries(&self) -> Option<&CaseBoundaries> {
        self.boundaries.as_ref()
    }
}

/// Test helper: seeds a state with explicit items.
#[cfg(test)]
impl LcbState {
    fn seed_activity(&mut self, name: &str, f: u64, delta: u64) {
        let a = self.intern(name);
        let seq = self.next_seq;
        self.next_seq += 1;
        let item = LcbItem { f, delta, seq };
        self.by_bound.insert((item.bound(), seq, ItemRef::Activity(a)));
        self.activities.insert(a, item);
    }
}
