//! Event sources: log files replayed as streams, and line-delimited readers
//! over standard input or TCP.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::record::{format_event, is_header, parse_event_at, ParseError};
use crate::event::Event;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Order {
    AsIs,
    #[default]
    ByTimestamp,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Malformed lines are reported and skipped.
    #[default]
    Lenient,
    /// The first malformed line aborts reading.
    Strict,
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Reads records from any line-oriented reader. Blank lines are ignored and
/// a header is accepted on the first line only.
pub struct LineStream<R> {
    reader: R,
    line_no: usize,
    buf: String,
    origin: PathBuf,
}

impl<R: BufRead> LineStream<R> {
    pub fn new(reader: R, origin: impl Into<PathBuf>) -> Self {
        LineStream {
            reader,
            line_no: 0,
            buf: String::new(),
            origin: origin.into(),
        }
    }
}

impl<R: BufRead> Iterator for LineStream<R> {
    type Item = Result<Event, SourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(source) => {
                    return Some(Err(SourceError::Io {
                        path: self.origin.clone(),
                        source,
                    }))
                }
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.is_empty() || (self.line_no == 1 && is_header(line)) {
                continue;
            }
            return Some(parse_event_at(line, self.line_no).map_err(SourceError::from));
        }
    }
}

/// Events read from a finite source plus the lines that were skipped.
#[derive(Debug, Default)]
pub struct ReadOutcome {
    pub events: Vec<Event>,
    pub rejected: Vec<ParseError>,
}

pub fn read_events<R: BufRead>(reader: R, origin: &Path, mode: Mode) -> Result<ReadOutcome, SourceError> {
    let mut out = ReadOutcome::default();
    for item in LineStream::new(reader, origin) {
        match item {
            Ok(event) => out.events.push(event),
            Err(SourceError::Parse(e)) if mode == Mode::Lenient => out.rejected.push(e),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Loads a log file. With [`Order::ByTimestamp`] events are stably sorted, so
/// equal timestamps keep file order.
pub fn replay(path: &Path, order: Order, mode: Mode) -> Result<ReadOutcome, SourceError> {
    let file = File::open(path).map_err(|source| SourceError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut out = read_events(BufReader::new(file), path, mode)?;
    if order == Order::ByTimestamp {
        out.events.sort_by_key(|e| e.timestamp);
    }
    Ok(out)
}

pub fn stdin_stream() -> LineStream<io::StdinLock<'static>> {
    LineStream::new(io::stdin().lock(), "<stdin>")
}

/// Connects to `addr` and reads newline-delimited records until the peer
/// closes the connection. Reads block, so a slow consumer pushes back on the
/// sender through TCP flow control.
pub fn tcp_stream(addr: &str) -> Result<LineStream<BufReader<TcpStream>>, SourceError> {
    let io_err = |source| SourceError::Io {
        path: PathBuf::from(format!("tcp:{addr}")),
        source,
    };
    let resolved = addr.to_socket_addrs().map_err(io_err)?.collect::<Vec<_>>();
    let stream = TcpStream::connect(&resolved[..]).map_err(io_err)?;
    Ok(LineStream::new(BufReader::new(stream), format!("tcp:{addr}")))
}

/// Writes events in the record format, one per line, with a header.
pub fn write_events<W: Write>(mut out: W, events: &[Event]) -> io::Result<()> {
    writeln!(out, "case_id,activity,timestamp")?;
    for event in events {
        writeln!(out, "{}", format_event(event))?;
    }
    out.flush()
}
