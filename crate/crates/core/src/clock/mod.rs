//! Time sources: a trigger-disciplined clock for sensor servers and a
//! virtual-time scheduler for deterministic simulation.

mod disciplined;
mod virtual_time;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

pub use disciplined::{DisciplinedClock, DEFAULT_TRIGGER_PERIOD_US};
pub use virtual_time::{Activation, VirtualClock};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClockError {
    #[error("period must be positive")]
    InvalidPeriod,
    #[error("no trigger edge seen yet")]
    NotSynchronized,
    #[error("local time went backwards: {now} < {previous}")]
    LocalTimeRegressed { previous: u64, now: u64 },
}

/// Where sensor servers get their timestamps from.
pub trait TimeSource: Send + Sync {
    fn now_us(&self) -> Result<u64, ClockError>;
}

/// A settable time, for virtual-time runs and tests.
#[derive(Debug, Default)]
pub struct ManualTime(AtomicU64);

impl ManualTime {
    pub fn new(t_us: u64) -> Self {
        ManualTime(AtomicU64::new(t_us))
    }

    pub fn set(&self, t_us: u64) {
        self.0.store(t_us, Ordering::Release);
    }
}

impl TimeSource for ManualTime {
    fn now_us(&self) -> Result<u64, ClockError> {
        Ok(self.0.load(Ordering::Acquire))
    }
}

/// A [`DisciplinedClock`] read against the process's monotonic clock.
#[derive(Debug, Clone)]
pub struct LocalDisciplined {
    clock: Arc<DisciplinedClock>,
    base: Instant,
}

impl LocalDisciplined {
    pub fn new(clock: Arc<DisciplinedClock>) -> Self {
        LocalDisciplined {
            clock,
            base: Instant::now(),
        }
    }

    /// Free-running local counter in microseconds.
    pub fn local_us(&self) -> u64 {
        self.base.elapsed().as_micros() as u64
    }

    /// Call from the trigger interrupt handler.
    pub fn trigger(&self) -> Result<(), ClockError> {
        self.clock.on_trigger_edge(self.local_us())
    }
}

impl TimeSource for LocalDisciplined {
    fn now_us(&self) -> Result<u64, ClockError> {
        self.clock.disciplined_now(self.local_us())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manual_time_reads_back() {
        let t = ManualTime::new(5);
        assert_eq!(t.now_us(), Ok(5));
        t.set(9);
        assert_eq!(t.now_us(), Ok(9));
    }

    #[test]
    fn local_disciplined_is_monotonic() {
        let src = LocalDisciplined::new(Arc::new(DisciplinedClock::new(1000, 0).unwrap()));
        assert_eq!(src.now_us(), Err(ClockError::NotSynchronized));
        src.trigger().unwrap();
        let a = src.now_us().unwrap();
        let b = src.now_us().unwrap();
        assert!(b >= a);
    }
}
