use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::bus::{Bus, BusMessage, Subscription};

use super::{
    ConfigStore, DmcpError, DmcpMessage, MessageKind, Supervisor, Transition, DMCP_DOWN, DMCP_UP,
    PAYLOAD_DMCP,
};

fn send(bus: &Bus, channel: &str, msg: &DmcpMessage, now_ms: u64) -> Result<(), DmcpError> {
    bus.publish(&BusMessage::new(
        channel,
        now_ms.saturating_mul(1000),
        PAYLOAD_DMCP,
        msg.encode()?,
    )?);
    Ok(())
}

/// Serves configuration on `dmcp.up` / `dmcp.down` and supervises modules.
pub struct Supercomponent {
    sup: Supervisor,
    bus: Bus,
    sub: Subscription,
}

impl Supercomponent {
    pub fn new(bus: &Bus, store: ConfigStore) -> Self {
        Supercomponent {
            sup: Supervisor::new(store),
            bus: bus.clone(),
            sub: bus.subscribe(DMCP_UP),
        }
    }

    pub fn supervisor(&self) -> &Supervisor {
        &self.sup
    }

    /// Handles every queued module message. Returns how many were handled.
    pub fn pump(&mut self, now_ms: u64) -> Result<usize, DmcpError> {
        let mut n = 0;
        for m in self.sub.drain()? {
            let msg = match DmcpMessage::decode(&m.payload) {
                Ok(msg) => msg,
                Err(e) => {
                    log::warn!("dropping DMCP message: {e}");
                    continue;
                }
            };
            if let Some(reply) = self.sup.handle(&msg, now_ms)? {
                send(&self.bus, DMCP_DOWN, &reply, now_ms)?;
            }
            n += 1;
        }
        Ok(n)
    }

    pub fn tick(&mut self, now_ms: u64) -> Vec<Transition> {
        self.sup.tick(now_ms)
    }
}

/// The module side of the handshake.
pub struct DmcpClient {
    name: String,
    bus: Bus,
    sub: Subscription,
}

impl DmcpClient {
    pub fn new(bus: &Bus, name: &str) -> Result<Self, DmcpError> {
        if name.is_empty() {
            return Err(DmcpError::Invalid("empty module name".into()));
        }
        Ok(DmcpClient {
            name: name.to_string(),
            bus: bus.clone(),
            sub: bus.subscribe(DMCP_DOWN),
        })
    }

    fn send(&self, msg: DmcpMessage, now_ms: u64) -> Result<(), DmcpError> {
        send(&self.bus, DMCP_UP, &msg, now_ms)
    }

    pub fn discover(&self, now_ms: u64) -> Result<(), DmcpError> {
        self.send(DmcpMessage::new(MessageKind::Discover, &self.name), now_ms)
    }

    /// Waits for the OFFER addressed to this module.
    pub fn wait_offer(&self, timeout: Duration) -> Result<BTreeMap<String, String>, DmcpError> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let Some(m) = self.sub.poll(left)? else {
                return Err(DmcpError::Timeout("OFFER"));
            };
            match DmcpMessage::decode(&m.payload) {
                Ok(msg) if msg.kind == MessageKind::Offer && msg.module == self.name => {
                    return Ok(msg.entries)
                }
                Ok(_) => {}
                Err(e) => log::warn!("dropping DMCP message: {e}"),
            }
        }
    }

    pub fn ack(&self, heartbeat_ms: u64, now_ms: u64) -> Result<(), DmcpError> {
        self.send(DmcpMessage::ack(&self.name, heartbeat_ms), now_ms)
    }

    pub fn heartbeat(&self, now_ms: u64) -> Result<(), DmcpError> {
        self.send(DmcpMessage::new(MessageKind::Heartbeat, &self.name), now_ms)
    }

    pub fn bye(&self, now_ms: u64) -> Result<(), DmcpError> {
        self.send(DmcpMessage::new(MessageKind::Bye, &self.name), now_ms)
    }
}
