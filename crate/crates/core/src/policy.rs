//! Cache-replacement deletion mechanisms for the process map.
//!
//! Each policy assigns every node and arc a score; the victim is the
//! minimum-score arc when the minimum node score is strictly larger, and the
//! minimum-score node otherwise (node removal cascades to its arcs). Ties
//! inside the node set or the arc set go to the earliest insertion.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{ElementRef, ProcessMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    /// Least recently used: score is the last-seen stream index.
    Lru,
    /// Least frequently used: score is the frequency.
    Lfu,
    /// LFU with dynamic aging: score is frequency plus the aging level
    /// recorded when the element was inserted.
    LfuDa,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Lru, PolicyKind::Lfu, PolicyKind::LfuDa];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Lru => "lru",
            PolicyKind::Lfu => "lfu",
            PolicyKind::LfuDa => "lfu-da",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown policy {0:?} (expected lru, lfu or lfu-da)")]
pub struct UnknownPolicy(pub String);

impl FromStr for PolicyKind {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lru" => Ok(PolicyKind::Lru),
            "lfu" => Ok(PolicyKind::Lfu),
            "lfu-da" | "lfu_da" | "lfuda" => Ok(PolicyKind::LfuDa),
            _ => Err(UnknownPolicy(s.to_owned())),
        }
    }
}

/// Read access to the per-element bookkeeping a policy scores.
pub trait ElementStats {
    fn frequency(&self) -> u64;
    fn last_seen_idx(&self) -> u64;
    fn aging_credit(&self) -> u64;
}

pub fn score<T: ElementStats + ?Sized>(policy: PolicyKind, entry: &T) -> u64 {
    match policy {
        PolicyKind::Lru => entry.last_seen_idx(),
        PolicyKind::Lfu => entry.frequency(),
        PolicyKind::LfuDa => entry.frequency() + entry.aging_credit(),
    }
}

/// The dynamic aging level `L`. Starts at 0 and only moves up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AgingState {
    level: u64,
}

impl AgingState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    fn raise_to(&mut self, key: u64) {
        debug_assert!(key >= self.level, "aging level must not decrease");
        self.level = self.level.max(key);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VictimKind {
    Node,
    Arc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Victim {
    pub element: ElementRef,
    /// The score that made this element minimal.
    pub key: u64,
}

impl Victim {
    pub fn kind(&self) -> VictimKind {
        match self.element {
            ElementRef::Node(_) => VictimKind::Node,
            ElementRef::Arc(..) => VictimKind::Arc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Eviction {
    pub victim: Victim,
    pub removed: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("cannot select a victim from an empty map")]
    EmptyMap,
    #[error("map is indexed for {found:?}, not {expected}")]
    NotIndexed {
        expected: PolicyKind,
        found: Option<PolicyKind>,
    },
}

/// Picks the element to delete. The map must have been created with
/// [`ProcessMap::with_policy`] for the same policy.
pub fn select_victim(
    policy: PolicyKind,
    map: &ProcessMap,
    _aging: &AgingState,
) -> Result<Victim, PolicyError> {
    let index = match map.victim_index() {
        Some(index) if index.policy == policy => index,
        _ => {
            return Err(PolicyError::NotIndexed {
                expected: policy,
                found: map.policy(),
            })
        }
    };
    let min_node = index.nodes.first_key_value();
    let min_arc = index.arcs.first_key_value();
    match (min_node, min_arc) {
        (None, None) => Err(PolicyError::EmptyMap),
        (Some((&(node_key, _), &id)), arc) if arc.is_none_or(|(&(arc_key, _), _)| node_key <= arc_key) => {
            debug_assert_eq!(score(policy, map.node_by_id(id)), node_key);
            Ok(Victim {
                element: map.element_ref_for_node(id),
                key: node_key,
            })
        }
        (_, Some((&(arc_key, _), &pair))) => {
            debug_assert_eq!(score(policy, map.arc_by_ids(pair)), arc_key);
            Ok(Victim {
                element: map.element_ref_for_arc(pair),
                key: arc_key,
            })
        }
        (Some(_), None) => unreachable!("node branch covers a missing arc minimum"),
    }
}

/// Deletes one victim (cascading for nodes). Under LFU-DA the aging level is
/// then set to the victim's score.
pub fn evict_once(
    policy: PolicyKind,
    map: &mut ProcessMap,
    aging: &mut AgingState,
) -> Result<Eviction, PolicyError> {
    let victim = select_victim(policy, map, aging)?;
    let removed = map
        .remove_element(&victim.element)
        .expect("selected victim is present");
    if policy == PolicyKind::LfuDa {
        aging.raise_to(victim.key);
    }
    Ok(Eviction { victim, removed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ArcUpdate;

    /// Builds a map with exact frequencies; the last update of each element
    /// happens at the given stream index.
    fn build(
        policy: PolicyKind,
        nodes: &[(&str, u64, u64)],
        arcs: &[(&str, &str, u64, u64)],
    ) -> ProcessMap {
        let at = |k: u64, freq: u64, idx: u64| if k + 1 == freq { idx } else { 0 };
        let mut map = ProcessMap::with_policy(64, policy);
        for &(a, freq, idx) in nodes {
            map.insert_activity(a, at(0, freq, idx), 0).unwrap();
            for k in 1..freq {
                map.touch_activity(a, at(k, freq, idx), 0);
            }
        }
        for &(s, t, freq, idx) in arcs {
            assert_eq!(
                map.touch_or_insert_arc(s, t, at(0, freq, idx), 0).unwrap(),
                ArcUpdate::Inserted
            );
            for k in 1..freq {
                map.touch_or_insert_arc(s, t, at(k, freq, idx), 0).unwrap();
            }
        }
        map
    }

    #[test]
    fn scores() {
        let map = build(PolicyKind::Lru, &[("A", 1, 0), ("B", 1, 0)], &[("A", "B", 1, 3)]);
        assert_eq!(score(PolicyKind::Lru, map.arc("A", "B").unwrap()), 3);

        let mut map = ProcessMap::with_policy(8, PolicyKind::LfuDa);
        map.insert_activity("N", 1, 4).unwrap();
        map.touch_activity("N", 2, 0);
        assert_eq!(score(PolicyKind::LfuDa, map.node("N").unwrap()), 6);
        for _ in 0..5 {
            map.touch_activity("N", 3, 0);
        }
        assert_eq!(score(PolicyKind::Lfu, map.node("N").unwrap()), 7);
    }

    #[test]
    fn lru_prefers_older_arc() {
        // Nodes seen at 5 and 9, arcs at 9 and 3.
        let mut map = ProcessMap::with_policy(16, PolicyKind::Lru);
        map.insert_activity("A", 5, 0).unwrap();
        map.insert_activity("B", 9, 0).unwrap();
        map.touch_or_insert_arc("A", "B", 9, 0).unwrap();
        map.touch_or_insert_arc("B", "A", 3, 0).unwrap();
        let victim = select_victim(PolicyKind::Lru, &map, &AgingState::new()).unwrap();
        assert_eq!(victim.element, ElementRef::arc("B", "A"));
        assert_eq!(victim.key, 3);
    }

    #[test]
    fn lfu_prefers_node_and_cascades() {
        let mut map = build(PolicyKind::Lfu, &[("A", 1, 1), ("B", 7, 1)], &[("A", "B", 5, 1)]);
        assert_eq!(map.node("A").unwrap().frequency, 1);
        let victim = select_victim(PolicyKind::Lfu, &map, &AgingState::new()).unwrap();
        assert_eq!(victim.element, ElementRef::node("A"));
        let mut aging = AgingState::new();
        let ev = evict_once(PolicyKind::Lfu, &mut map, &mut aging).unwrap();
        assert_eq!(ev.removed, 2);
        assert_eq!(map.arc_count(), 0);
        assert_eq!(aging.level(), 0);
    }

    #[test]
    fn equal_minimum_takes_node() {
        let mut map = ProcessMap::with_policy(8, PolicyKind::Lfu);
        map.insert_activity("A", 1, 0).unwrap();
        map.insert_activity("B", 1, 0).unwrap();
        map.touch_activity("A", 2, 0);
        map.touch_activity("B", 2, 0);
        map.touch_or_insert_arc("A", "B", 2, 0).unwrap();
        map.touch_or_insert_arc("A", "B", 2, 0).unwrap();
        // min node = 2, min arc = 2
        let victim = select_victim(PolicyKind::Lfu, &map, &AgingState::new()).unwrap();
        assert_eq!(victim.kind(), VictimKind::Node);
        assert_eq!(victim.element, ElementRef::node("A"));
    }

    #[test]
    fn node_with_three_arcs_removes_four() {
        let mut map = ProcessMap::with_policy(8, PolicyKind::Lfu);
        for a in ["A", "B", "C"] {
            map.insert_activity(a, 1, 0).unwrap();
        }
        map.touch_activity("B", 1, 0);
        map.touch_activity("C", 1, 0);
        for (s, t) in [("A", "B"), ("C", "A"), ("A", "A")] {
            map.touch_or_insert_arc(s, t, 1, 0).unwrap();
            map.touch_or_insert_arc(s, t, 1, 0).unwrap();
        }
        let ev = evict_once(PolicyKind::Lfu, &mut map, &mut AgingState::new()).unwrap();
        assert_eq!(ev.removed, 4);
        map.check_invariants().unwrap();
    }

    #[test]
    fn lfu_da_raises_level_to_victim_key() {
        let mut map = ProcessMap::with_policy(8, PolicyKind::LfuDa);
        map.insert_activity("A", 1, 0).unwrap();
        for _ in 0..3 {
            map.touch_activity("A", 1, 0);
        }
        map.insert_activity("B", 1, 0).unwrap();
        for _ in 0..5 {
            map.touch_activity("B", 1, 0);
        }
        let mut aging = AgingState::new();
        let ev = evict_once(PolicyKind::LfuDa, &mut map, &mut aging).unwrap();
        assert_eq!(ev.victim.key, 4);
        assert_eq!(aging.level(), 4);
    }

    #[test]
    fn lru_arc_eviction_leaves_level() {
        let mut map = ProcessMap::with_policy(8, PolicyKind::Lru);
        map.insert_activity("A", 5, 0).unwrap();
        map.touch_or_insert_arc("A", "A", 2, 0).unwrap();
        let mut aging = AgingState::new();
        let ev = evict_once(PolicyKind::Lru, &mut map, &mut aging).unwrap();
        assert_eq!(ev.removed, 1);
        assert_eq!(ev.victim.kind(), VictimKind::Arc);
        assert_eq!(aging.level(), 0);
    }

    #[test]
    fn errors() {
        let map = ProcessMap::with_policy(8, PolicyKind::Lfu);
        assert_eq!(
            select_victim(PolicyKind::Lfu, &map, &AgingState::new()),
            Err(PolicyError::EmptyMap)
        );
        assert!(matches!(
            select_victim(PolicyKind::Lru, &map, &AgingState::new()),
            Err(PolicyError::NotIndexed { .. })
        ));
        let mut unindexed = ProcessMap::new(8);
        unindexed.insert_activity("A", 1, 0).unwrap();
        assert!(matches!(
            evict_once(PolicyKind::Lfu, &mut unindexed, &mut AgingState::new()),
            Err(PolicyError::NotIndexed { found: None, .. })
        ));
    }

    #[test]
    fn parse_names() {
        assert_eq!("LFU-DA".parse::<PolicyKind>(), Ok(PolicyKind::LfuDa));
        assert_eq!("lru".parse::<PolicyKind>(), Ok(PolicyKind::Lru));
        assert!("arc".parse::<PolicyKind>().is_err());
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>(), Ok(p));
        }
    }
}
