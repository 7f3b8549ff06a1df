//! In-process publish/subscribe conference.
//!
//! Every subscription owns a queue. Publishing pushes a copy of the message
//! into each matching queue under that queue's lock, so messages from one
//! publisher thread arrive in publish order at every subscriber. Monitors
//! see every channel and can never publish.

mod bridge;
mod log_format;
mod recorder;

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock, Weak};
use std::time::{Duration, Instant};

use thiserror::Error;

pub use bridge::{forward_to_endpoint, receive_from_endpoint};
pub use log_format::{decode_frame, encode_frame, LogReader, LogWriter, LOG_MAGIC};
pub use recorder::{record, replay, RecorderHandle, ReplayMode};

use crate::transport::TransportError;

/// Largest payload a log frame can carry.
pub const MAX_PAYLOAD: usize = (u32::MAX - 15) as usize;

#[derive(Debug, Error)]
pub enum BusError {
    #[error("invalid message: {0}")]
    InvalidMessage(String),
    #[error("subscription has been cancelled")]
    Cancelled,
    #[error("monitor subscriptions cannot publish")]
    MonitorCannotPublish,
    #[error("bus has been dropped")]
    BusGone,
    #[error("corrupt log at frame {frame_index} (byte offset {offset}): {reason}")]
    Corrupt {
        frame_index: u64,
        offset: u64,
        reason: String,
    },
    #[error("recorder failed: {0}")]
    Recorder(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// One unit of conference traffic.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BusMessage {
    channel: String,
    pub timestamp_us: u64,
    pub payload_type: u8,
    pub payload: Vec<u8>,
}

impl BusMessage {
    pub fn new(
        channel: impl Into<String>,
        timestamp_us: u64,
        payload_type: u8,
        payload: Vec<u8>,
    ) -> Result<Self, BusError> {
        let channel = channel.into();
        if channel.is_empty() {
            return Err(BusError::InvalidMessage("empty channel".into()));
        }
        if channel.len() > usize::from(u16::MAX) {
            return Err(BusError::InvalidMessage(format!(
                "channel is {} bytes, limit is 65535",
                channel.len()
            )));
        }
        if payload.len() > MAX_PAYLOAD {
            return Err(BusError::InvalidMessage(format!(
                "payload is {} bytes, limit is {MAX_PAYLOAD}",
                payload.len()
            )));
        }
        Ok(BusMessage {
            channel,
            timestamp_us,
            payload_type,
            payload,
        })
    }

    pub fn channel(&self) -> &str {
        &self.channel
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelFilter {
    Exact(String),
    All,
}

impl ChannelFilter {
    pub fn matches(&self, channel: &str) -> bool {
        match self {
            ChannelFilter::All => true,
            ChannelFilter::Exact(name) => name == channel,
        }
    }
}

impl From<&str> for ChannelFilter {
    fn from(s: &str) -> Self {
        if s == "*" {
            ChannelFilter::All
        } else {
            ChannelFilter::Exact(s.to_string())
        }
    }
}

/// Queue policy for a subscription.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueuePolicy {
    #[default]
    Unbounded,
    /// Keep at most this many messages, dropping the oldest.
    DropOldest(usize),
}

struct SubShared {
    id: u64,
    filter: ChannelFilter,
    reactive: bool,
    policy: QueuePolicy,
    queue: Mutex<VecDeque<BusMessage>>,
    ready: Condvar,
    cancelled: AtomicBool,
    dropped: AtomicU64,
}

impl SubShared {
    fn deliver(&self, msg: &BusMessage) {
        let mut q = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        if let QueuePolicy::DropOldest(cap) = self.policy {
            while q.len() >= cap.max(1) {
                q.pop_front();
                self.dropped.fetch_add(1, Ordering::Relaxed);
            }
        }
        q.push_back(msg.clone());
        drop(q);
        self.ready.notify_one();
    }
}

#[derive(Default)]
struct BusInner {
    subs: RwLock<Vec<Arc<SubShared>>>,
    next_id: AtomicU64,
}

/// Handle to a conference. Cloning shares the same bus.
#[derive(Clone, Default)]
pub struct Bus {
    inner: Arc<BusInner>,
}

impl std::fmt::Debug for Bus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bus")
            .field("subscriptions", &self.subscription_count())
            .finish()
    }
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Delivers `msg` to every matching subscription. Having no subscriber
    /// is not an error.
    pub fn publish(&self, msg: &BusMessage) {
        let subs = self.inner.subs.read().unwrap_or_else(|e| e.into_inner());
        for sub in subs.iter() {
            if sub.filter.matches(&msg.channel) {
                sub.deliver(msg);
            }
        }
    }

    pub fn subscribe(&self, filter: impl Into<ChannelFilter>) -> Subscription {
        self.attach(filter.into(), true, QueuePolicy::Unbounded)
    }

    pub fn subscribe_with(
        &self,
        filter: impl Into<ChannelFilter>,
        policy: QueuePolicy,
    ) -> Subscription {
        self.attach(filter.into(), true, policy)
    }

    /// Non-reactive subscription to all channels.
    pub fn attach_monitor(&self) -> Subscription {
        self.attach(ChannelFilter::All, false, QueuePolicy::Unbounded)
    }

    pub fn subscription_count(&self) -> usize {
        self.inner
            .subs
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .len()
    }

    fn attach(&self, filter: ChannelFilter, reactive: bool, policy: QueuePolicy) -> Subscription {
        let shared = Arc::new(SubShared {
            id: self.inner.next_id.fetch_add(1, Ordering::Relaxed),
            filter,
            reactive,
            policy,
            queue: Mutex::new(VecDeque::new()),
            ready: Condvar::new(),
            cancelled: AtomicBool::new(false),
            dropped: AtomicU64::new(0),
        });
        self.inner
            .subs
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .push(Arc::clone(&shared));
        Subscription {
            shared,
            bus: Arc::downgrade(&self.inner),
        }
    }

    fn detach(inner: &BusInner, id: u64) {
        inner
            .subs
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .retain(|s| s.id != id);
    }
}

/// A single-consumer view of the bus.
pub struct Subscription {
    shared: Arc<SubShared>,
    bus: Weak<BusInner>,
}

impl std::fmt::Debug for Subscription {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Subscription")
            .field("filter", &self.shared.filter)
            .field("reactive", &self.shared.reactive)
            .finish()
    }
}

impl Subscription {
    pub fn is_monitor(&self) -> bool {
        !self.shared.reactive
    }

    pub fn filter(&self) -> &ChannelFilter {
        &self.shared.filter
    }

    /// Messages discarded by a bounded queue so far.
    pub fn dropped(&self) -> u64 {
        self.shared.dropped.load(Ordering::Relaxed)
    }

    pub fn pending(&self) -> usize {
        self.shared
            .queue
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .len()
    }

    /// Next message, waiting at most `timeout`. A zero timeout never blocks.
    pub fn poll(&self, timeout: Duration) -> Result<Option<BusMessage>, BusError> {
        if self.shared.cancelled.load(Ordering::Acquire) {
            return Err(BusError::Cancelled);
        }
        let mut q = self.shared.queue.lock().unwrap_or_else(|e| e.into_inner());
        if q.is_empty() && !timeout.is_zero() {
            let deadline = Instant::now() + timeout;
            while q.is_empty() {
                let now = Instant::now();
                if now >= deadline {
                    break;
                }
                q = self
                    .shared
                    .ready
                    .wait_timeout(q, deadline - now)
                    .unwrap_or_else(|e| e.into_inner())
                    .0;
            }
        }
        Ok(q.pop_front())
    }

    /// Takes everything queued right now.
    pub fn drain(&self) -> Result<Vec<BusMessage>, BusError> {
        if self.shared.cancelled.load(Ordering::Acquire) {
            return Err(BusError::Cancelled);
        }
        let mut q = self.shared.queue.lock().unwrap_or_else(|e| e.into_inner());
        Ok(q.drain(..).collect())
    }

    /// Publishes through this subscription's bus. Monitors are refused.
    pub fn publish(&self, msg: &BusMessage) -> Result<(), BusError> {
        if !self.shared.reactive {
            return Err(BusError::MonitorCannotPublish);
        }
        if self.shared.cancelled.load(Ordering::Acquire) {
            return Err(BusError::Cancelled);
        }
        let inner = self.bus.upgrade().ok_or(BusError::BusGone)?;
        Bus { inner }.publish(msg);
        Ok(())
    }

    /// Detaches from the bus. Further polls fail.
    pub fn cancel(&self) {
        if self.shared.cancelled.swap(true, Ordering::AcqRel) {
            return;
        }
        if let Some(inner) = self.bus.upgrade() {
            Bus::detach(&inner, self.shared.id);
        }
        self.shared.ready.notify_all();
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        self.cancel();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(ch: &str, t: u64, p: &[u8]) -> BusMessage {
        BusMessage::new(ch, t, 1, p.to_vec()).unwrap()
    }

    #[test]
    fn fan_out_to_subscribers_and_monitor() {
        let bus = Bus::new();
        let a = bus.subscribe("scan");
        let b = bus.subscribe("scan");
        let m = bus.attach_monitor();
        let m0 = msg("scan", 5, &[1, 2, 3]);
        bus.publish(&m0);
        for s in [&a, &b, &m] {
            assert_eq!(s.poll(Duration::ZERO).unwrap(), Some(m0.clone()));
        }
    }

    #[test]
    fn publish_without_subscribers_is_fine() {
        Bus::new().publish(&msg("void", 0, &[]));
    }

    #[test]
    fn fifo_per_publisher() {
        let bus = Bus::new();
        let s = bus.subscribe("c");
        for i in 0..100u64 {
            bus.publish(&msg("c", i, &[]));
        }
        let ts: Vec<_> = s.drain().unwrap().iter().map(|m| m.timestamp_us).collect();
        assert_eq!(ts, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn fifo_per_publisher_under_concurrency() {
        let bus = Bus::new();
        let s = bus.subscribe(ChannelFilter::All);
        let threads: Vec<_> = (0..4)
            .map(|p| {
                let bus = bus.clone();
                std::thread::spawn(move || {
                    for i in 0..500u64 {
                        bus.publish(&msg(&format!("p{p}"), i, &[]));
                    }
                })
            })
            .collect();
        for t in threads {
            t.join().unwrap();
        }
        let all = s.drain().unwrap();
        assert_eq!(all.len(), 2000);
        for p in 0..4 {
            let ch = format!("p{p}");
            let ts: Vec<_> = all
                .iter()
                .filter(|m| m.channel() == ch)
                .map(|m| m.timestamp_us)
                .collect();
            assert_eq!(ts, (0..500).collect::<Vec<_>>());
        }
    }

    #[test]
    fn monitor_sees_every_channel() {
        let bus = Bus::new();
        let m = bus.attach_monitor();
        bus.publish(&msg("scan", 1, &[]));
        bus.publish(&msg("idis", 2, &[]));
        let chans: Vec<_> = m
            .drain()
            .unwrap()
            .iter()
            .map(|m| m.channel().to_string())
            .collect();
        assert_eq!(chans, vec!["scan", "idis"]);
    }

    #[test]
    fn zero_timeout_poll_is_nonblocking() {
        let bus = Bus::new();
        let s = bus.subscribe("x");
        let start = Instant::now();
        assert_eq!(s.poll(Duration::ZERO).unwrap(), None);
        assert!(start.elapsed() < Duration::from_millis(20));
    }

    #[test]
    fn detaching_monitor_keeps_subscriber_counts() {
        let with = {
            let bus = Bus::new();
            let s = bus.subscribe("c");
            let m = bus.attach_monitor();
            for i in 0..10 {
                bus.publish(&msg("c", i, &[]));
                if i == 4 {
                    m.cancel();
                }
            }
            s.drain().unwrap().len()
        };
        let without = {
            let bus = Bus::new();
            let s = bus.subscribe("c");
            for i in 0..10 {
                bus.publish(&msg("c", i, &[]));
            }
            s.drain().unwrap().len()
        };
        assert_eq!(with, without);
        assert_eq!(with, 10);
    }

    #[test]
    fn cancelled_poll_is_an_error() {
        let bus = Bus::new();
        let s = bus.subscribe("c");
        s.cancel();
        assert!(matches!(s.poll(Duration::ZERO), Err(BusError::Cancelled)));
        assert_eq!(bus.subscription_count(), 0);
    }

    #[test]
    fn monitors_cannot_publish() {
        let bus = Bus::new();
        let m = bus.attach_monitor();
        assert!(matches!(
            m.publish(&msg("c", 0, &[])),
            Err(BusError::MonitorCannotPublish)
        ));
        let s = bus.subscribe("c");
        s.publish(&msg("c", 0, &[])).unwrap();
        assert_eq!(m.pending(), 1);
    }

    #[test]
    fn bounded_queue_drops_oldest() {
        let bus = Bus::new();
        let s = bus.subscribe_with("c", QueuePolicy::DropOldest(3));
        for i in 0..5 {
            bus.publish(&msg("c", i, &[]));
        }
        assert_eq!(s.dropped(), 2);
        let ts: Vec<_> = s.drain().unwrap().iter().map(|m| m.timestamp_us).collect();
        assert_eq!(ts, vec![2, 3, 4]);
    }

    #[test]
    fn message_validation() {
        assert!(BusMessage::new("", 0, 0, vec![]).is_err());
        assert!(BusMessage::new("x".repeat(65536), 0, 0, vec![]).is_err());
        assert!(BusMessage::new("x".repeat(65535), 0, 0, vec![]).is_ok());
    }
}
