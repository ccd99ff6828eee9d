//! Bounded-memory discovery of process maps (directly-follows graphs) from
//! event streams.
//!
//! The graph lives in a [`ProcessMap`] with a fixed element budget. When the
//! budget is exhausted a cache-replacement policy ([`PolicyKind`]: LRU, LFU
//! or LFU with dynamic aging) picks a node or arc to delete. [`StreamMiner`]
//! drives the per-event update loop; [`LcbState`] implements the Lossy
//! Counting with Budget baseline. [`eval`] computes the exact offline graph
//! and the accuracy and memory metrics used to compare techniques.

pub mod eval;
pub mod event;
pub mod export;
pub mod graph;
pub mod ingest;
pub mod lcb;
pub mod miner;
pub mod policy;
pub mod run;

pub use eval::{accuracy, memory_words, offline_dfg, Accuracy, EvalError, EvalReport, Technique, WordCosts};
pub use event::{Event, MalformedEvent, Timestamp};
pub use graph::{
    lossless_budget, lossless_budget_directed, ArcEntry, ArcUpdate, ElementRef, FrequencyGraph, MapError,
    NodeEntry, ProcessMap, Touch,
};
pub use lcb::{LcbConfig, LcbKey, LcbState};
pub use miner::{
    CaseBoundaries, MinerConfig, MinerSnapshot, OnlineMiner, RelationOutcome, RunningCaseStore, StreamMiner,
    UpdateReport,
};
pub use policy::{evict_once, score, select_victim, AgingState, PolicyKind, Victim, VictimKind};
pub use run::{sweep, BenchRow, Execution, RunSettings};
