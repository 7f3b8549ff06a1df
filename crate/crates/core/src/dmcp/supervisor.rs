use std::collections::BTreeMap;
use std::fmt;

use super::{ConfigStore, DmcpError, DmcpMessage, MessageKind};

/// Silence longer than this many heartbeat periods marks a module DEAD.
pub const DEAD_AFTER_PERIODS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModuleState {
    Unknown,
    Configured,
    Running,
    Dead,
    Stopped,
}

impl fmt::Display for ModuleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModuleState::Unknown => "UNKNOWN",
            ModuleState::Configured => "CONFIGURED",
            ModuleState::Running => "RUNNING",
            ModuleState::Dead => "DEAD",
            ModuleState::Stopped => "STOPPED",
        })
    }
}

impl ModuleState {
    pub fn can_become(self, to: ModuleState) -> bool {
        use ModuleState::*;
        matches!(
            (self, to),
            (Unknown, Configured)
                | (Configured, Running)
                | (Running, Dead)
                | (Running, Stopped)
                | (Dead, Running)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleRecord {
    pub name: String,
    state: ModuleState,
    pub last_seen_ms: Option<u64>,
    pub period_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub module: String,
    pub from: ModuleState,
    pub to: ModuleState,
    pub at_ms: u64,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} -> {} at {} ms", self.module, self.from, self.to, self.at_ms)
    }
}

/// A message the current state does not allow. Reported, never fatal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub module: String,
    pub kind: MessageKind,
    pub state: ModuleState,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} from {} while {}", self.kind, self.module, self.state)
    }
}

impl ModuleRecord {
    pub fn new(name: &str) -> Self {
        ModuleRecord {
            name: name.to_string(),
            state: ModuleState::Unknown,
            last_seen_ms: None,
            period_ms: 0,
        }
    }

    pub fn state(&self) -> ModuleState {
        self.state
    }

    fn go(&mut self, to: ModuleState, at_ms: u64) -> Transition {
        debug_assert!(self.state.can_become(to), "{} -> {to}", self.state);
        let t = Transition {
            module: self.name.clone(),
            from: self.state,
            to,
            at_ms,
        };
        self.state = to;
        t
    }

    fn violation(&self, kind: MessageKind) -> Violation {
        Violation {
            module: self.name.clone(),
            kind,
            state: self.state,
        }
    }
}

/// The OFFER answering `name`'s DISCOVER.
pub fn handle_discover(store: &ConfigStore, name: &str) -> Result<DmcpMessage, DmcpError> {
    if name.is_empty() {
        return Err(DmcpError::Invalid("empty module name".into()));
    }
    Ok(DmcpMessage {
        kind: MessageKind::Offer,
        module: name.to_string(),
        entries: store.subset_for(name),
    })
}

pub fn handle_ack(r: &mut ModuleRecord, period_ms: u64, now_ms: u64) -> Result<Transition, Violation> {
    if r.state != ModuleState::Configured || period_ms == 0 {
        return Err(r.violation(MessageKind::Ack));
    }
    r.period_ms = period_ms;
    r.last_seen_ms = Some(now_ms);
    Ok(r.go(ModuleState::Running, now_ms))
}

/// Refreshes a running module; revives a dead one.
pub fn handle_heartbeat(r: &mut ModuleRecord, now_ms: u64) -> Result<Option<Transition>, Violation> {
    match r.state {
        ModuleState::Running => {
            r.last_seen_ms = Some(now_ms);
            Ok(None)
        }
        ModuleState::Dead => {
            r.last_seen_ms = Some(now_ms);
            Ok(Some(r.go(ModuleState::Running, now_ms)))
        }
        _ => Err(r.violation(MessageKind::Heartbeat)),
    }
}

pub fn handle_bye(r: &mut ModuleRecord, now_ms: u64) -> Result<Transition, Violation> {
    if r.state != ModuleState::Running {
        return Err(r.violation(MessageKind::Bye));
    }
    Ok(r.go(ModuleState::Stopped, now_ms))
}

/// Marks running modules silent for more than three periods as DEAD.
pub fn supervise_tick<'a, I>(records: I, now_ms: u64) -> Vec<Transition>
where
    I: IntoIterator<Item = &'a mut ModuleRecord>,
{
    let mut out = Vec::new();
    for r in records {
        if r.state != ModuleState::Running {
            continue;
        }
        let last = r.last_seen_ms.unwrap_or(0);
        if now_ms.saturating_sub(last) > DEAD_AFTER_PERIODS * r.period_ms {
            out.push(r.go(ModuleState::Dead, now_ms));
        }
    }
    out
}

/// Protocol state of the supercomponent, independent of transport.
#[derive(Debug, Default)]
pub struct Supervisor {
    store: ConfigStore,
    records: BTreeMap<String, ModuleRecord>,
    violations: Vec<Violation>,
    transitions: Vec<Transition>,
}

impl Supervisor {
    pub fn new(store: ConfigStore) -> Self {
        Supervisor {
            store,
            ..Default::default()
        }
    }

    pub fn record(&self, name: &str) -> Option<&ModuleRecord> {
        self.records.get(name)
    }

    pub fn records(&self) -> impl Iterator<Item = &ModuleRecord> {
        self.records.values()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    /// Every state change so far, in order.
    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    fn outcome<T>(&mut self, r: Result<T, Violation>) -> Option<T> {
        match r {
            Ok(t) => Some(t),
            Err(v) => {
                log::warn!("dmcp protocol violation: {v}");
                self.violations.push(v);
                None
            }
        }
    }

    /// Processes one message from a module; returns the reply, if any.
    pub fn handle(&mut self, msg: &DmcpMessage, now_ms: u64) -> Result<Option<DmcpMessage>, DmcpError> {
        let name = msg.module.as_str();
        if name.is_empty() {
            return Err(DmcpError::Malformed("empty module name".into()));
        }
        let rec = self
            .records
            .entry(name.to_string())
            .or_insert_with(|| ModuleRecord::new(name));
        match msg.kind {
            MessageKind::Discover => {
                let offer = handle_discover(&self.store, name)?;
                if rec.state == ModuleState::Unknown {
                    let t = rec.go(ModuleState::Configured, now_ms);
                    self.transitions.push(t);
                }
                Ok(Some(offer))
            }
            MessageKind::Ack => {
                let period = msg.heartbeat_ms().unwrap_or(0);
                let r = handle_ack(rec, period, now_ms);
                if let Some(t) = self.outcome(r) {
                    self.transitions.push(t);
                }
                Ok(None)
            }
            MessageKind::Heartbeat => {
                let r = handle_heartbeat(rec, now_ms);
                if let Some(Some(t)) = self.outcome(r) {
                    self.transitions.push(t);
                }
                Ok(None)
            }
            MessageKind::Bye => {
                let r = handle_bye(rec, now_ms);
                if let Some(t) = self.outcome(r) {
                    self.transitions.push(t);
                }
                Ok(None)
            }
            MessageKind::Offer => {
                let v = rec.violation(MessageKind::Offer);
                self.outcome::<()>(Err(v));
                Ok(None)
            }
        }
    }

    pub fn tick(&mut self, now_ms: u64) -> Vec<Transition> {
        let t = supervise_tick(self.records.values_mut(), now_ms);
        self.transitions.extend(t.iter().cloned());
        t
    }
}
