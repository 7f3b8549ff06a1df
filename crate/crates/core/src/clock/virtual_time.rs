use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::convert::Infallible;

use super::ClockError;

/// One executed activation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activation {
    pub time_us: u64,
    pub name: String,
}

type Callback<'a, E> = Box<dyn FnMut(u64) -> Result<(), E> + 'a>;

struct Module<'a, E> {
    name: String,
    period_us: u64,
    callback: Callback<'a, E>,
}

/// Virtual-time scheduler for periodic modules.
///
/// Activations are ordered by (due time, priority, registration order);
/// lower priority values run first. Callbacks receive the virtual time at
/// which they are due and must not consult the wall clock.
pub struct VirtualClock<'a, E = Infallible> {
    now_us: u64,
    started: bool,
    modules: Vec<Module<'a, E>>,
    queue: BinaryHeap<Reverse<(u64, i32, usize)>>,
    transcript: Vec<Activation>,
}

impl<E> Default for VirtualClock<'_, E> {
    fn default() -> Self {
        VirtualClock {
            now_us: 0,
            started: false,
            modules: Vec::new(),
            queue: BinaryHeap::new(),
            transcript: Vec::new(),
        }
    }
}

impl<'a, E> VirtualClock<'a, E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now_us(&self) -> u64 {
        self.now_us
    }

    /// Registers a periodic module. Before the first run it is first due at
    /// t = 0; afterwards at the next multiple of its period not yet run.
    pub fn register<F>(
        &mut self,
        name: &str,
        period_us: u64,
        priority: i32,
        callback: F,
    ) -> Result<(), ClockError>
    where
        F: FnMut(u64) -> Result<(), E> + 'a,
    {
        if period_us == 0 {
            return Err(ClockError::InvalidPeriod);
        }
        let first_due = if self.started {
            self.now_us.div_ceil(period_us) * period_us
        } else {
            0
        };
        let index = self.modules.len();
        self.modules.push(Module {
            name: name.to_string(),
            period_us,
            callback: Box::new(callback),
        });
        self.queue.push(Reverse((first_due, priority, index)));
        Ok(())
    }

    /// Runs every activation due strictly before `t_us`, then sets the clock
    /// to `t_us`. Returns the number of activations run.
    pub fn run_until(&mut self, t_us: u64) -> Result<usize, E> {
        self.started = true;
        let mut count = 0;
        while let Some(&Reverse((due, priority, index))) = self.queue.peek() {
            if due >= t_us {
                break;
            }
            self.queue.pop();
            let module = &mut self.modules[index];
            self.queue
                .push(Reverse((due + module.period_us, priority, index)));
            self.now_us = due;
            self.transcript.push(Activation {
                time_us: due,
                name: module.name.clone(),
            });
            (module.callback)(due)?;
            count += 1;
        }
        self.now_us = self.now_us.max(t_us);
        Ok(count)
    }

    /// Every activation run so far, in execution order.
    pub fn transcript(&self) -> &[Activation] {
        &self.transcript
    }
}
