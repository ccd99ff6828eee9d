//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use procmap::ingest::{replay, Mode, Order};
use procmap::{ElementRef, Event, FrequencyGraph, PolicyKind, ProcessMap};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fines() -> Vec<Event> {
    replay(&fixture_path("fines.csv"), Order::ByTimestamp, Mode::Strict)
        .expect("fixture parses")
        .events
}

/// Directly-follows graph straight from the definition: `a => b` for every
/// pair of events `i < j` of the same case with no event of that case in
/// between. Cubic, on purpose.
pub fn brute_dfg(events: &[Event]) -> FrequencyGraph {
    let mut order: Vec<&Event> = events.iter().collect();
    order.sort_by_key(|e| e.timestamp);
    let mut g = FrequencyGraph::default();
    for e in &order {
        *g.nodes.entry(e.activity.clone()).or_default() += 1;
    }
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if order[i].case_id != order[j].case_id {
                continue;
            }
            let between = (i + 1..j).any(|k| order[k].case_id == order[i].case_id);
            if !between {
                *g.arcs
                    .entry((order[i].activity.clone(), order[j].activity.clone()))
                    .or_default() += 1;
            }
        }
    }
    g
}

fn brute_score(policy: PolicyKind, frequency: u64, last_seen: u64, credit: u64) -> u64 {
    match policy {
        PolicyKind::Lru => last_seen,
        PolicyKind::Lfu => frequency,
        PolicyKind::LfuDa => frequency + credit,
    }
}

/// Full scan: lowest score wins, earliest inserted breaks ties; an arc is
/// chosen only when its minimum is strictly below the node minimum.
pub fn brute_victim(policy: PolicyKind, map: &ProcessMap) -> Option<(ElementRef, u64)> {
    let mut best_node: Option<(u64, u64, ElementRef)> = None;
    for n in map.nodes() {
        let s = brute_score(policy, n.frequency, n.last_seen_idx, n.aging_credit);
        let cand = (s, n.seq(), ElementRef::node(&n.activity));
        if best_node.as_ref().is_none_or(|b| (cand.0, cand.1) < (b.0, b.1)) {
            best_node = Some(cand);
        }
    }
    let mut best_arc: Option<(u64, u64, ElementRef)> = None;
    for a in map.arcs() {
        let s = brute_score(policy, a.frequency, a.last_seen_idx, a.aging_credit);
        let cand = (s, a.seq(), ElementRef::arc(&a.source, &a.target));
        if best_arc.as_ref().is_none_or(|b| (cand.0, cand.1) < (b.0, b.1)) {
            best_arc = Some(cand);
        }
    }
    match (best_node, best_arc) {
        (None, None) => None,
        (Some(n), None) => Some((n.2, n.0)),
        (None, Some(a)) => Some((a.2, a.0)),
        (Some(n), Some(a)) => {
            if n.0 > a.0 {
                Some((a.2, a.0))
            } else {
                Some((n.2, n.0))
            }
        }
    }
}

/// Loss and total as in the accuracy metric, computed over dense matrices
/// indexed by the union of activity names.
pub fn padded_loss(complete: &FrequencyGraph, discovered: &FrequencyGraph) -> (u64, u64) {
    let names: BTreeSet<&String> = complete
        .arcs
        .keys()
        .chain(discovered.arcs.keys())
        .flat_map(|(s, t)| [s, t])
        .collect();
    let names: Vec<&String> = names.into_iter().collect();
    let n = names.len();
    let dense = |g: &FrequencyGraph| {
        let mut m = vec![vec![0i64; n]; n];
        for (i, s) in names.iter().enumerate() {
            for (j, t) in names.iter().enumerate() {
                m[i][j] = g.arcs.get(&((*s).clone(), (*t).clone())).copied().unwrap_or(0) as i64;
            }
        }
        m
    };
    let (c, d) = (dense(complete), dense(discovered));
    let mut loss = 0i64;
    let mut total = 0i64;
    for i in 0..n {
        for j in 0..n {
            loss += (c[i][j] - d[i][j]).abs();
            total += c[i][j];
        }
    }
    (loss as u64, total as u64)
}

pub fn arc_counts(events: &[(&str, &str)]) -> BTreeMap<(String, String), u64> {
    let mut out = BTreeMap::new();
    for (s, t) in events {
        *out.entry((s.to_string(), t.to_string())).or_default() += 1;
    }
    out
}

pub fn ev(case: &str, activity: &str, t: u64) -> Event {
    Event::new(case, activity, t).unwrap()
}

/// One random mutation of a map: `(kind, a, b)` with `a`, `b` picking
/// activity names.
pub type MapOp = (u8, u8, u8);

pub const NAMES: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

/// Replays `ops` against a policy-indexed map of `budget`, evicting through
/// the library whenever there is no room, so the state also carries aging
/// credits from earlier evictions.
pub fn random_map(policy: PolicyKind, budget: usize, ops: &[MapOp]) -> ProcessMap {
    use procmap::{evict_once, AgingState, ArcUpdate, Touch};
    let mut map = ProcessMap::with_policy(budget, policy);
    let mut aging = AgingState::new();
    for (i, &(kind, a, b)) in ops.iter().enumerate() {
        let idx = i as u64 + 1;
        let (a, b) = (NAMES[a as usize % NAMES.len()], NAMES[b as usize % NAMES.len()]);
        match kind % 4 {
            0 | 1 => {
                if map.touch_activity(a, idx, aging.level()) == Touch::Missing {
                    if map.is_full() {
                        evict_once(policy, &mut map, &mut aging).unwrap();
                    }
                    map.insert_activity(a, idx, aging.level()).unwrap();
                }
            }
            2 => {
                if map.contains_activity(a)
                    && map.contains_activity(b)
                    && map.touch_or_insert_arc(a, b, idx, aging.level()).unwrap() == ArcUpdate::NeedsRoom
                {
                    evict_once(policy, &mut map, &mut aging).unwrap();
                    if map.contains_activity(a) && map.contains_activity(b) {
                        map.touch_or_insert_arc(a, b, idx, aging.level()).unwrap();
                    }
                }
            }
            _ => {
                let victim = if a < b {
                    ElementRef::arc(a, b)
                } else {
                    ElementRef::node(a)
                };
                let _ = map.remove_element(&victim);
            }
        }
    }
    map
}
