//! The `case_id,activity,timestamp` line format.
//!
//! Grammar (one record per line, no embedded line breaks):
//!
//! ```text
//! record   = field "," field "," field
//! field    = quoted / bare
//! quoted   = DQUOTE *( any-char-except-DQUOTE / DQUOTE DQUOTE ) DQUOTE
//! bare     = *( any-char-except-DQUOTE-COMMA-CR-LF )
//! ```
//!
//! A trailing `\r` (CRLF line endings) is stripped before parsing. The case
//! id and activity must be non-empty. The timestamp is either a non-negative
//! integer (epoch milliseconds) or an ISO-8601 date-time with seconds
//! precision, `YYYY-MM-DDTHH:MM:SS` (a space may replace the `T`), optionally
//! followed by `Z` or a `+HH:MM` offset; without a zone it is read as UTC.

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use thiserror::Error;

use crate::event::{Event, Timestamp};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("unterminated quoted field")]
    UnterminatedQuote,
    #[error("unexpected character after closing quote")]
    TrailingAfterQuote,
    #[error("quote inside unquoted field")]
    StrayQuote,
    #[error("line break inside a field")]
    LineBreak,
    #[error("expected 3 fields, found {0}")]
    FieldCount(usize),
    #[error("empty case id")]
    EmptyCase,
    #[error("empty activity")]
    EmptyActivity,
    #[error("unparseable timestamp {0:?}")]
    Timestamp(String),
}

/// A rejected line, with 1-based line and column numbers.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

/// Splits one line into fields according to the grammar above. Errors carry
/// a 1-based column.
pub fn split_fields(line: &str) -> Result<Vec<String>, (usize, ParseErrorKind)> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let chars: Vec<char> = line.chars().collect();
    let mut fields = Vec::new();
    let mut i = 0;
    loop {
        let mut field = String::new();
        if chars.get(i) == Some(&'"') {
            let open = i;
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err((open + 1, ParseErrorKind::UnterminatedQuote)),
                    Some('"') if chars.get(i + 1) == Some(&'"') => {
                        field.push('"');
                        i += 2;
                    }
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\r' | '\n') => return Err((i + 1, ParseErrorKind::LineBreak)),
                    Some(&c) => {
                        field.push(c);
                        i += 1;
                    }
                }
            }
            match chars.get(i) {
                None | Some(',') => {}
                Some(_) => return Err((i + 1, ParseErrorKind::TrailingAfterQuote)),
            }
        } else {
            while let Some(&c) = chars.get(i) {
                match c {
                    ',' => break,
                    '"' => return Err((i + 1, ParseErrorKind::StrayQuote)),
                    '\r' | '\n' => return Err((i + 1, ParseErrorKind::LineBreak)),
                    _ => {
                        field.push(c);
                        i += 1;
                    }
                }
            }
        }
        fields.push(field);
        match chars.get(i) {
            Some(',') => i += 1,
            None => return Ok(fields),
            Some(_) => unreachable!("field scanners stop at a comma or end of line"),
        }
    }
}

/// Parses an epoch-millisecond integer or an ISO-8601 date-time.
pub fn parse_timestamp(raw: &str) -> Option<Timestamp> {
    if !raw.is_empty() && raw.bytes().all(|b| b.is_ascii_digit()) {
        return raw.parse().ok();
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return u64::try_from(dt.timestamp_millis()).ok();
    }
    for format in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, format) {
            return u64::try_from(Utc.from_utc_datetime(&naive).timestamp_millis()).ok();
        }
    }
    None
}

/// Parses one record. `line_no` is only used for error reporting.
pub fn parse_event_at(line: &str, line_no: usize) -> Result<Event, ParseError> {
    let err = |column, kind| ParseError {
        line: line_no,
        column,
        kind,
    };
    let fields = split_fields(line).map_err(|(column, kind)| err(column, kind))?;
    if fields.len() != 3 {
        return Err(err(1, ParseErrorKind::FieldCount(fields.len())));
    }
    let [case_id, activity, raw_ts]: [String; 3] = fields.try_into().expect("three fields");
    if case_id.is_empty() {
        return Err(err(1, ParseErrorKind::EmptyCase));
    }
    if activity.is_empty() {
        return Err(err(2, ParseErrorKind::EmptyActivity));
    }
    let timestamp = parse_timestamp(&raw_ts).ok_or_else(|| err(3, ParseErrorKind::Timestamp(raw_ts.clone())))?;
    Ok(Event {
        case_id,
        activity,
        timestamp,
    })
}

pub fn parse_event(line: &str) -> Result<Event, ParseError> {
    parse_event_at(line, 1)
}

/// True for the optional header line `case_id,activity,timestamp` (any case,
/// spaces or underscores between words).
pub fn is_header(line: &str) -> bool {
    let Ok(fields) = split_fields(line) else {
        return false;
    };
    let norm = |s: &str| s.trim().to_ascii_lowercase().replace([' ', '_'], "");
    let names: Vec<String> = fields.iter().map(|f| norm(f)).collect();
    names.len() == 3
        && matches!(names[0].as_str(), "caseid" | "case")
        && matches!(names[1].as_str(), "activity" | "activityname")
        && names[2] == "timestamp"
}

fn quote_field(field: &str) -> String {
    if field.contains([',', '"']) || field.is_empty() {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

/// Serializes an event as one record line (without newline), using epoch
/// milliseconds for the timestamp.
pub fn format_event(event: &Event) -> String {
    format!(
        "{},{},{}",
        quote_field(&event.case_id),
        quote_field(&event.activity),
        event.timestamp
    )
}
