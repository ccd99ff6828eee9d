mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use regex::Regex;

use common::{brute_dfg, brute_victim, ev, padded_loss, random_map, MapOp, NAMES};
use procmap::ingest::{parse_event, read_events, record::split_fields, write_events, Mode};
use procmap::{
    accuracy, lossless_budget_directed, offline_dfg, select_victim, AgingState, Event, FrequencyGraph, LcbConfig,
    LcbKey, LcbState, MinerConfig, PolicyKind, StreamMiner,
};

fn policy() -> impl Strategy<Value = PolicyKind> {
    prop::sample::select(PolicyKind::ALL.to_vec())
}

fn ops(max: usize) -> impl Strategy<Value = Vec<MapOp>> {
    prop::collection::vec((0u8..4, 0u8..6, 0u8..6), 0..max)
}

/// Events over `cases` case ids and the first `acts` activity names, with
/// strictly increasing timestamps.
fn stream(cases: u8, acts: u8, max: usize) -> impl Strategy<Value = Vec<Event>> {
    prop::collection::vec((0..cases, 0..acts), 1..max).prop_map(|pairs| {
        pairs
            .into_iter()
            .enumerate()
            .map(|(i, (c, a))| ev(&format!("c{c}"), NAMES[a as usize], i as u64 * 10))
            .collect()
    })
}

fn graph_over(acts: usize) -> impl Strategy<Value = FrequencyGraph> {
    prop::collection::btree_map((0..acts, 0..acts), 1u64..=5, 0..20).prop_map(|arcs| {
        let mut g = FrequencyGraph::default();
        for ((s, t), f) in arcs {
            g.arcs.insert((format!("x{s}"), format!("x{t}")), f);
        }
        g
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn budgets_hold_after_every_event(
        policy in policy(),
        b_pm in 2usize..24,
        b_rc in 1usize..6,
        events in stream(8, 6, 300),
    ) {
        let mut miner = StreamMiner::new(MinerConfig::new(policy, b_pm, b_rc)).unwrap();
        for e in &events {
            miner.observe(e).unwrap();
            prop_assert!(miner.map().len() <= b_pm);
            prop_assert!(miner.cases().len() <= b_rc);
            prop_assert_eq!(miner.map().check_invariants(), Ok(()));
        }
    }

    #[test]
    fn lcb_budget_holds(budget in 1usize..20, events in stream(8, 6, 300)) {
        let mut lcb = LcbState::new(LcbConfig::new(budget));
        for e in &events {
            lcb.observe(e).unwrap();
            prop_assert!(lcb.len() <= budget);
            prop_assert_eq!(lcb.check_invariants(), Ok(()));
        }
    }

    #[test]
    fn victim_matches_full_scan(policy in policy(), budget in 2usize..16, ops in ops(80)) {
        let map = random_map(policy, budget, &ops);
        let got = select_victim(policy, &map, &AgingState::new()).ok().map(|v| (v.element, v.key));
        prop_assert_eq!(got, brute_victim(policy, &map));
    }

    #[test]
    fn lfu_da_equals_lfu_until_first_eviction(b_pm in 2usize..30, events in stream(6, 6, 200)) {
        let mut lfu = StreamMiner::new(MinerConfig::new(PolicyKind::Lfu, b_pm, 100)).unwrap();
        let mut da = StreamMiner::new(MinerConfig::new(PolicyKind::LfuDa, b_pm, 100)).unwrap();
        for e in &events {
            let (r1, r2) = (lfu.observe(e).unwrap(), da.observe(e).unwrap());
            if !r1.victims.is_empty() || !r2.victims.is_empty() {
                // The aging level moves after this victim, so only it must agree.
                prop_assert_eq!(r1.victims.first(), r2.victims.first());
                break;
            }
            prop_assert_eq!(&r1, &r2);
            prop_assert_eq!(lfu.map().to_graph(), da.map().to_graph());
        }
    }

    #[test]
    fn accuracy_matches_padded_matrix(complete in graph_over(10), discovered in graph_over(10)) {
        match accuracy(&complete, &discovered) {
            Err(_) => prop_assert!(complete.arcs.is_empty()),
            Ok(acc) => {
                let (loss, total) = padded_loss(&complete, &discovered);
                prop_assert_eq!((acc.loss, acc.total_frequency), (loss, total));
                let expected = (1.0 - loss as f64 / total as f64).max(0.0);
                prop_assert_eq!(acc.accuracy, expected);
                prop_assert_eq!(acc.at_least(1, 1), loss == 0);
            }
        }
    }

    #[test]
    fn accuracy_endpoints(g in graph_over(10)) {
        prop_assume!(!g.arcs.is_empty());
        prop_assert_eq!(accuracy(&g, &g).unwrap().accuracy, 1.0);
        prop_assert_eq!(accuracy(&g, &FrequencyGraph::default()).unwrap().accuracy, 0.0);
    }

    #[test]
    fn offline_dfg_matches_definition(events in stream(5, 6, 120)) {
        prop_assert_eq!(offline_dfg(&events).to_graph(), brute_dfg(&events));
    }

    #[test]
    fn lossless_budget_reproduces_offline(policy in policy(), events in stream(10, 6, 400)) {
        let b_pm = lossless_budget_directed(NAMES.len()).unwrap();
        let mut miner = StreamMiner::new(MinerConfig::new(policy, b_pm, 10)).unwrap();
        for e in &events {
            miner.observe(e).unwrap();
        }
        prop_assert_eq!(miner.map().to_graph(), brute_dfg(&events));
    }

    #[test]
    fn lcb_error_bound(budget in 1usize..30, events in stream(6, 6, 600)) {
        let mut lcb = LcbState::new(LcbConfig::new(budget));
        let mut truth: HashMap<LcbKey, u64> = HashMap::new();
        for e in &events {
            let report = lcb.observe(e).unwrap();
            *truth.entry(LcbKey::Activity(e.activity.clone())).or_default() += 1;
            *truth.entry(LcbKey::Case(e.case_id.clone())).or_default() += 1;
            if let Some((s, t)) = report.relation_recorded() {
                *truth.entry(LcbKey::Relation(s.into(), t.into())).or_default() += 1;
            }
            let w = lcb.bucket();
            for (key, item) in lcb.items() {
                let true_count = truth[&key];
                prop_assert!(item.f <= true_count);
                prop_assert!(true_count - item.f <= item.delta, "{key:?}: true {true_count}, f {}, delta {}", item.f, item.delta);
                prop_assert!(item.delta <= w);
            }
        }
    }
}

fn reference_fields(line: &str) -> Option<Vec<String>> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let field = r#"(?:"(?:[^"\r\n]|"")*"|[^",\r\n]*)"#;
    let whole = Regex::new(&format!("^{field}(?:,{field})*$")).unwrap();
    if !whole.is_match(line) {
        return None;
    }
    let head = Regex::new(&format!("^({field})(,|$)")).unwrap();
    let mut rest = line;
    let mut out = Vec::new();
    loop {
        let caps = head.captures(rest).expect("whole line matched");
        let raw = caps.get(1).unwrap().as_str();
        out.push(match raw.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
            Some(inner) => inner.replace("\"\"", "\""),
            None => raw.to_owned(),
        });
        if caps.get(2).unwrap().as_str().is_empty() {
            return Some(out);
        }
        rest = &rest[caps.get(0).unwrap().end()..];
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn split_fields_matches_regex_grammar(line in r#"[a,"\r \n]{0,12}"#) {
        prop_assert_eq!(split_fields(&line).ok(), reference_fields(&line));
    }

    #[test]
    fn write_then_read_roundtrips(
        rows in prop::collection::vec((r#"[a-c,"1 ]{1,6}"#, r#"[A-C,"x ]{1,6}"#, 0u64..10_000_000_000_000), 0..40)
    ) {
        let events: Vec<Event> = rows
            .into_iter()
            .map(|(c, a, t)| ev(&c, &a, t))
            .collect();
        let mut buf = Vec::new();
        write_events(&mut buf, &events).unwrap();
        let back = read_events(&buf[..], "mem".as_ref(), Mode::Strict).unwrap();
        prop_assert!(back.rejected.is_empty());
        prop_assert_eq!(back.events, events);
    }

    #[test]
    fn single_record_roundtrips(c in "[^\r\n]{1,8}", a in "[^\r\n]{1,8}", t in any::<u32>()) {
        let e = ev(&c, &a, t as u64);
        prop_assert_eq!(parse_event(&procmap::ingest::format_event(&e)).unwrap(), e);
    }
}
