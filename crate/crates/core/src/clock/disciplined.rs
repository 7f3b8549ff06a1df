use std::sync::Mutex;

use super::ClockError;

/// Default trigger period: a 15 Hz camera trigger.
pub const DEFAULT_TRIGGER_PERIOD_US: u64 = 66_667;

#[derive(Debug, Clone, Copy)]
struct State {
    edge_count: Option<u64>,
    local_at_last_edge: u64,
    last_local: u64,
    last_output: u64,
}

/// A clock disciplined by a periodic trigger signal.
///
/// Edge `n` is defined to happen at exactly `epoch_us + n * period`. Between
/// edges the time is extrapolated from the free-running local counter. The
/// output never goes backwards: if an edge would pull time back (a fast
/// local counter), the clock holds until the extrapolation catches up.
///
/// Nothing in the arithmetic depends on the unit; the fields are named for
/// microseconds but any integer tick works if period and local counter agree.
#[derive(Debug)]
pub struct DisciplinedClock {
    nominal_period_us: u64,
    epoch_us: u64,
    state: Mutex<State>,
}

impl DisciplinedClock {
    pub fn new(nominal_period_us: u64, epoch_us: u64) -> Result<Self, ClockError> {
        if nominal_period_us == 0 {
            return Err(ClockError::InvalidPeriod);
        }
        Ok(DisciplinedClock {
            nominal_period_us,
            epoch_us,
            state: Mutex::new(State {
                edge_count: None,
                local_at_last_edge: 0,
                last_local: 0,
                last_output: 0,
            }),
        })
    }

    pub fn nominal_period_us(&self) -> u64 {
        self.nominal_period_us
    }

    pub fn epoch_us(&self) -> u64 {
        self.epoch_us
    }

    /// Index of the most recent edge, if any has been seen.
    pub fn edge_count(&self) -> Option<u64> {
        self.lock().edge_count
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn check_local(state: &State, local_now_us: u64) -> Result<(), ClockError> {
        if state.edge_count.is_some() && local_now_us < state.last_local {
            return Err(ClockError::LocalTimeRegressed {
                previous: state.last_local,
                now: local_now_us,
            });
        }
        Ok(())
    }

    /// Records a trigger edge observed at local counter value `local_now_us`.
    pub fn on_trigger_edge(&self, local_now_us: u64) -> Result<(), ClockError> {
        let mut st = self.lock();
        Self::check_local(&st, local_now_us)?;
        st.edge_count = Some(st.edge_count.map_or(0, |n| n + 1));
        st.local_at_last_edge = local_now_us;
        st.last_local = local_now_us;
        Ok(())
    }

    /// Disciplined time at local counter value `local_now_us`.
    pub fn disciplined_now(&self, local_now_us: u64) -> Result<u64, ClockError> {
        let mut st = self.lock();
        let Some(edge) = st.edge_count else {
            return Err(ClockError::NotSynchronized);
        };
        Self::check_local(&st, local_now_us)?;
        let at_edge = self.epoch_us + edge * self.nominal_period_us;
        let raw = at_edge + (local_now_us - st.local_at_last_edge);
        let out = raw.max(st.last_output);
        st.last_local = local_now_us;
        st.last_output = out;
        Ok(out)
    }
}
