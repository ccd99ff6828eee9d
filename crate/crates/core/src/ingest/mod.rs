//! Getting events into the miner: the record format, file replay, line
//! streams and a synthetic log generator.

pub mod record;
pub mod source;
pub mod synth;

pub use record::{format_event, parse_event, parse_event_at, parse_timestamp, ParseError, ParseErrorKind};
pub use source::{read_events, replay, stdin_stream, tcp_stream, write_events, LineStream, Mode, Order, ReadOutcome, SourceError};
pub use synth::{generate, Generated, ModelError, SyntheticModel};
