use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Result};
use procmap::ingest::{replay, stdin_stream, tcp_stream, Mode, Order, SourceError};
use procmap::Event;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SourceSpec {
    Stdin,
    Tcp(String),
    File(PathBuf),
}

impl FromStr for SourceSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "stdin" || s == "-" {
            Ok(SourceSpec::Stdin)
        } else if let Some(addr) = s.strip_prefix("tcp:") {
            if addr.rsplit_once(':').is_none_or(|(host, port)| host.is_empty() || port.parse::<u16>().is_err()) {
                return Err(format!("expected tcp:<host:port>, got {s:?}"));
            }
            Ok(SourceSpec::Tcp(addr.to_owned()))
        } else {
            let path = s.strip_prefix("file:").unwrap_or(s);
            if path.is_empty() {
                return Err("empty file path".into());
            }
            Ok(SourceSpec::File(PathBuf::from(path)))
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Stdin => f.write_str("stdin"),
            SourceSpec::Tcp(addr) => write!(f, "tcp:{addr}"),
            SourceSpec::File(path) => write!(f, "{}", path.display()),
        }
    }
}

pub type EventIter = Box<dyn Iterator<Item = Result<Event, SourceError>>>;

/// Opens the source. Files are read up front (and sorted unless `AsIs`);
/// streams are consumed lazily in arrival order.
pub fn open(spec: &SourceSpec, order: Option<Order>, mode: Mode) -> Result<EventIter> {
    match spec {
        SourceSpec::File(path) => {
            let outcome = replay(path, order.unwrap_or_default(), mode)?;
            for rejected in &outcome.rejected {
                eprintln!("warning: {}: skipped {rejected}", path.display());
            }
            Ok(Box::new(outcome.events.into_iter().map(Ok)))
        }
        _ if order == Some(Order::ByTimestamp) => {
            bail!("--order by-timestamp needs a file source; {spec} is read in arrival order")
        }
        SourceSpec::Stdin => Ok(Box::new(stdin_stream())),
        SourceSpec::Tcp(addr) => Ok(Box::new(tcp_stream(addr)?)),
    }
}
