use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock, Weak};
use std::time::Duration;

use super::loopback::Mailbox;
use super::{can_decode_write, can_encode_read, Device, TransportError};

const DEFAULT_BUS: &str = "can0";

#[derive(Default)]
struct SimBus {
    members: Mutex<Vec<(u64, Weak<Mailbox>)>>,
}

fn buses() -> &'static Mutex<HashMap<String, Weak<SimBus>>> {
    static BUSES: OnceLock<Mutex<HashMap<String, Weak<SimBus>>>> = OnceLock::new();
    BUSES.get_or_init(Default::default)
}

static NEXT_MEMBER: AtomicU64 = AtomicU64::new(1);

/// Endpoint on an in-process simulated CAN bus.
///
/// Options name the bus (default `can0`). Writes take the encoded frame
/// form (`[id lo][id hi][payload]`) and are delivered to every other
/// endpoint on the same bus; reads return one encoded frame per call.
pub struct CanSimDevice {
    member: u64,
    bus: Arc<SimBus>,
    inbox: Arc<Mailbox>,
}

impl CanSimDevice {
    pub fn open(options: &str) -> Self {
        let name = match options.trim() {
            "" => DEFAULT_BUS,
            n => n,
        };
        let bus = {
            let mut map = buses().lock().unwrap_or_else(|e| e.into_inner());
            map.retain(|_, weak| weak.strong_count() > 0);
            match map.get(name).and_then(Weak::upgrade) {
                Some(bus) => bus,
                None => {
                    let bus = Arc::new(SimBus::default());
                    map.insert(name.to_string(), Arc::downgrade(&bus));
                    bus
                }
            }
        };
        let inbox = Arc::new(Mailbox::default());
        let member = NEXT_MEMBER.fetch_add(1, Ordering::Relaxed);
        bus.members
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push((member, Arc::downgrade(&inbox)));
        CanSimDevice { member, bus, inbox }
    }
}

impl Device for CanSimDevice {
    /// A frame that does not fit in `max_len` stays queued and the read
    /// fails with a capacity error.
    fn read(&mut self, max_len: usize, wait: Option<Duration>) -> Result<Vec<u8>, TransportError> {
        let popped = self.inbox.pop_with(wait, |front| {
            if front.len() > max_len {
                Err(TransportError::Capacity {
                    needed: front.len(),
                    available: max_len,
                })
            } else {
                Ok(())
            }
        })?;
        Ok(popped.unwrap_or_default())
    }

    fn write(&mut self, data: &[u8]) -> Result<usize, TransportError> {
        let frame = can_decode_write(data)?;
        let encoded = can_encode_read(&frame, data.len())?;
        let mut members = self.bus.members.lock().unwrap_or_else(|e| e.into_inner());
        members.retain(|(_, inbox)| inbox.strong_count() > 0);
        for (id, inbox) in members.iter() {
            if *id == self.member {
                continue;
            }
            if let Some(inbox) = inbox.upgrade() {
                inbox.push(encoded.clone());
            }
        }
        Ok(data.len())
    }

    fn close(&mut self) -> Result<(), TransportError> {
        self.bus
            .members
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .retain(|(id, _)| *id != self.member);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{CanFrame, Endpoint};

    fn ep(bus: &str) -> Endpoint {
        Endpoint::from_device(Box::new(CanSimDevice::open(bus)), false)
    }

    #[test]
    fn frames_fan_out_to_other_members() {
        let mut a = ep("cansim-fanout");
        let mut b = ep("cansim-fanout");
        let mut c = ep("cansim-fanout");
        let f = CanFrame::new(0x310, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        a.write(&can_encode_read(&f, 10).unwrap()).unwrap();
        for rx in [&mut b, &mut c] {
            let got = rx.read(18).unwrap();
            assert_eq!(can_decode_write(&got).unwrap(), f);
        }
    }

    #[test]
    fn small_buffer_is_a_capacity_error_and_frame_survives() {
        let mut a = ep("cansim-capacity");
        let mut b = ep("cansim-capacity");
        a.write(&[0xFF, 0x07, 1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        assert!(matches!(
            b.read(9),
            Err(TransportError::Capacity {
                needed: 10,
                available: 9
            })
        ));
        assert_eq!(b.read(10).unwrap().len(), 10);
    }

    #[test]
    fn invalid_writes_rejected() {
        let mut a = ep("cansim-invalid");
        assert!(a.write(&[1]).is_err());
        assert!(a.write(&[0, 0x80]).is_err());
    }

    #[test]
    fn separate_buses_are_isolated() {
        let mut a = ep("cansim-iso-1");
        let mut b = ep("cansim-iso-2");
        a.write(&[1, 0]).unwrap();
        assert!(b.read(16).unwrap().is_empty());
    }
}
