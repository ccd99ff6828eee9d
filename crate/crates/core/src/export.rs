//! Snapshot files (JSON) and Graphviz DOT rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eval::Technique;
use crate::graph::FrequencyGraph;
use crate::miner::CaseBoundaries;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub activity: String,
    pub frequency: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcRecord {
    pub source: String,
    pub target: String,
    pub frequency: u64,
}

/// On-disk form of a discovered graph plus the run metadata needed to
/// evaluate and export it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub technique: Technique,
    pub budget: usize,
    pub events_processed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_memory_words: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ms_per_event: Option<f64>,
    pub nodes: Vec<NodeRecord>,
    pub arcs: Vec<ArcRecord>,
    /// Cases started per activity; present only when end activities were tracked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<BTreeMap<String, u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ends: Option<BTreeMap<String, u64>>,
}

impl SnapshotFile {
    pub fn new(technique: Technique, budget: usize, events_processed: u64, graph: &FrequencyGraph) -> Self {
        SnapshotFile {
            technique,
            budget,
            events_processed,
            peak_memory_words: None,
            ms_per_event: None,
            nodes: graph
                .nodes
                .iter()
                .map(|(a, &f)| NodeRecord {
                    activity: a.clone(),
                    frequency: f,
                })
                .collect(),
            arcs: graph
                .arcs
                .iter()
                .map(|((s, t), &f)| ArcRecord {
                    source: s.clone(),
                    target: t.clone(),
                    frequency: f,
                })
                .collect(),
            starts: None,
            ends: None,
        }
    }

    pub fn boundaries(&self) -> Option<CaseBoundaries> {
        match (&self.starts, &self.ends) {
            (Some(s), Some(e)) => Some(CaseBoundaries {
                starts: s.clone(),
                ends: e.clone(),
            }),
            _ => None,
        }
    }

    pub fn with_boundaries(mut self, boundaries: Option<&CaseBoundaries>) -> Self {
        if let Some(b) = boundaries {
            self.starts = Some(b.starts.clone());
            self.ends = Some(b.ends.clone());
        }
        self
    }

    pub fn graph(&self) -> FrequencyGraph {
        let mut g = FrequencyGraph::default();
        for n in &self.nodes {
            g.nodes.insert(n.activity.clone(), n.frequency);
        }
        for a in &self.arcs {
            g.arcs.insert((a.source.clone(), a.target.clone()), a.frequency);
        }
        g
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn quote(id: &str) -> String {
    let mut out = String::with_capacity(id.len() + 2);
    out.push('"');
    for c in id.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

const START_NODE: &str = "__start__";
const END_NODE: &str = "__end__";

fn pen_width(frequency: u64, max: u64) -> f64 {
    1.0 + 4.0 * frequency as f64 / max.max(1) as f64
}

/// Renders the graph as a DOT digraph. Arcs are labelled with their
/// frequency and drawn thicker the more frequent they are. When
/// `boundaries` is given, virtual start and end nodes are connected to the
/// activities that opened and closed cases.
pub fn to_dot(graph: &FrequencyGraph, boundaries: Option<&CaseBoundaries>) -> String {
    let mut out = String::new();
    out.push_str("digraph process_map {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=box, style=rounded];\n");
    for (activity, f) in &graph.nodes {
        let _ = writeln!(out, "  {} [label={}];", quote(activity), quote(&format!("{activity}\n{f}")));
    }
    let mut max = graph.arcs.values().copied().max().unwrap_or(1);
    if let Some(CaseBoundaries { starts, ends }) = boundaries {
        max = max
            .max(starts.values().copied().max().unwrap_or(1))
            .max(ends.values().copied().max().unwrap_or(1));
        let _ = writeln!(out, "  {START_NODE} [shape=circle, label=\"start\"];");
        let _ = writeln!(out, "  {END_NODE} [shape=doublecircle, label=\"end\"];");
        for (activity, &f) in starts {
            let _ = writeln!(
                out,
                "  {START_NODE} -> {} [label=\"{f}\", penwidth={:.2}, style=dashed];",
                quote(activity),
                pen_width(f, max)
            );
        }
        for (activity, &f) in ends {
            let _ = writeln!(
                out,
                "  {} -> {END_NODE} [label=\"{f}\", penwidth={:.2}, style=dashed];",
                quote(activity),
                pen_width(f, max)
            );
        }
    }
    for ((s, t), &f) in &graph.arcs {
        let _ = writeln!(
            out,
            "  {} -> {} [label=\"{f}\", penwidth={:.2}];",
            quote(s),
            quote(t),
            pen_width(f, max)
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph() -> FrequencyGraph {
        let mut g = FrequencyGraph::default();
        g.nodes.insert("A".into(), 4);
        g.nodes.insert("B".into(), 4);
        g.arcs.insert(("A".into(), "B".into()), 4);
        g
    }

    #[test]
    fn empty_graph_is_valid_dot() {
        let dot = to_dot(&FrequencyGraph::default(), None);
        assert!(dot.starts_with("digraph process_map {"));
        assert!(dot.trim_end().ends_with('}'));
        assert!(!dot.contains("->"));
    }

    #[test]
    fn one_labelled_edge() {
        let dot = to_dot(&graph(), None);
        let edges: Vec<&str> = dot.lines().filter(|l| l.contains("->")).collect();
        assert_eq!(edges, vec!["  \"A\" -> \"B\" [label=\"4\", penwidth=5.00];"]);
    }

    #[test]
    fn start_and_end_nodes() {
        let b = CaseBoundaries {
            starts: BTreeMap::from([("A".to_owned(), 2)]),
            ends: BTreeMap::from([("B".to_owned(), 2)]),
        };
        let dot = to_dot(&graph(), Some(&b));
        assert!(dot.contains("__start__ -> \"A\""));
        assert!(dot.contains("\"B\" -> __end__"));
    }

    #[test]
    fn names_are_escaped() {
        let mut g = FrequencyGraph::default();
        g.nodes.insert("say \"hi\"".into(), 1);
        let dot = to_dot(&g, None);
        assert!(dot.contains("\"say \\\"hi\\\"\""));
    }

    #[test]
    fn json_roundtrip() {
        let snap = SnapshotFile::new(Technique::Lfu, 30, 22, &graph());
        let back = SnapshotFile::from_json(&snap.to_json()).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.graph(), graph());
        assert!(snap.to_json().contains("\"technique\": \"lfu\""));
    }
}
