//! Events as they arrive from a log or a live stream.

use std::fmt;

use thiserror::Error;

/// Milliseconds since the Unix epoch (UTC).
pub type Timestamp = u64;

/// One activity occurrence within a case.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub case_id: String,
    pub activity: String,
    pub timestamp: Timestamp,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MalformedEvent {
    #[error("empty case id")]
    EmptyCase,
    #[error("empty activity name")]
    EmptyActivity,
}

impl Event {
    /// Builds an event, rejecting empty case ids and activity names.
    pub fn new(
        case_id: impl Into<String>,
        activity: impl Into<String>,
        timestamp: Timestamp,
    ) -> Result<Self, MalformedEvent> {
        let event = Event {
            case_id: case_id.into(),
            activity: activity.into(),
            timestamp,
        };
        event.validate()?;
        Ok(event)
    }

    pub fn validate(&self) -> Result<(), MalformedEvent> {
        if self.case_id.is_empty() {
            return Err(MalformedEvent::EmptyCase);
        }
        if self.activity.is_empty() {
            return Err(MalformedEvent::EmptyActivity);
        }
        Ok(())
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.activity, self.case_id, self.timestamp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_fields() {
        assert_eq!(Event::new("", "A", 0), Err(MalformedEvent::EmptyCase));
        assert_eq!(Event::new("c", "", 0), Err(MalformedEvent::EmptyActivity));
        assert!(Event::new("c", "A", 0).is_ok());
    }
}
