//! Cooperative time budgets polled by long-running stages.

use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("time budget exhausted")]
pub struct TimedOut;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deadline {
    end: Option<Instant>,
}

impl Deadline {
    /// A deadline that never expires.
    pub fn none() -> Deadline {
        Deadline { end: None }
    }

    pub fn after_ms(ms: u64) -> Deadline {
        Deadline { end: Some(Instant::now() + Duration::from_millis(ms)) }
    }

    pub fn from_budget(ms: Option<u64>) -> Deadline {
        ms.map_or_else(Deadline::none, Deadline::after_ms)
    }

    /// The earlier of two deadlines.
    pub fn min(self, other: Deadline) -> Deadline {
        match (self.end, other.end) {
            (Some(a), Some(b)) => Deadline { end: Some(a.min(b)) },
            (a, b) => Deadline { end: a.or(b) },
        }
    }

    pub fn expired(&self) -> bool {
        self.end.is_some_and(|e| Instant::now() >= e)
    }

    pub fn check(&self) -> Result<(), TimedOut> {
        if self.expired() {
            Err(TimedOut)
        } else {
            Ok(())
        }
    }

    pub fn remaining(&self) -> Option<Duration> {
        self.end.map(|e| e.saturating_duration_since(Instant::now()))
    }
}

impl Default for Deadline {
    fn default() -> Self {
        Deadline::none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expiry() {
        assert!(Deadline::none().check().is_ok());
        assert!(Deadline::after_ms(0).expired());
        let d = Deadline::after_ms(60_000).min(Deadline::after_ms(0));
        assert_eq!(d.check(), Err(TimedOut));
        assert!(Deadline::after_ms(60_000).remaining().unwrap() > Duration::from_secs(30));
    }
}
