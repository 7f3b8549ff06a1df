//! Bus to endpoint pump. Each message travels as one datagram holding one
//! log frame, so any datagram transport (udp, named loopback) can carry a
//! channel between processes.

use super::{decode_frame, encode_frame, Bus, BusError, Subscription};
use crate::transport::Endpoint;

/// Largest datagram the pump will read.
const MAX_DATAGRAM: usize = 65_507;

/// Writes every message queued on `sub` to `ep`. Returns the count sent.
pub fn forward_to_endpoint(sub: &Subscription, ep: &mut Endpoint) -> Result<usize, BusError> {
    let batch = sub.drain()?;
    for msg in &batch {
        ep.write(&encode_frame(msg))?;
    }
    Ok(batch.len())
}

/// Reads datagrams from `ep` until none is pending and publishes each on
/// `bus`. Returns the count published.
pub fn receive_from_endpoint(ep: &mut Endpoint, bus: &Bus) -> Result<usize, BusError> {
    let blocking = ep.is_blocking();
    ep.set_blocking(false);
    let mut count = 0;
    let result = loop {
        let data = match ep.read(MAX_DATAGRAM) {
            Ok(d) => d,
            Err(e) => break Err(e.into()),
        };
        if data.is_empty() {
            break Ok(count);
        }
        match decode_frame(&data) {
            Ok(msg) => {
                bus.publish(&msg);
                count += 1;
            }
            Err(e) => break Err(e),
        }
    };
    ep.set_blocking(blocking);
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::BusMessage;
    use crate::transport::{open, parse_endpoint_spec};

    #[test]
    fn channel_crosses_a_loopback_pipe() {
        let spec = parse_endpoint_spec("loopback,bridge-test").unwrap();
        let mut tx = open(&spec, false).unwrap();
        let mut rx = open(&spec, false).unwrap();
        let a = Bus::new();
        let b = Bus::new();
        let out = a.subscribe("scan");
        let seen = b.attach_monitor();
        let msgs: Vec<_> = (0..3)
            .map(|i| BusMessage::new("scan", i, 2, vec![i as u8; 3]).unwrap())
            .collect();
        for m in &msgs {
            a.publish(m);
        }
        assert_eq!(forward_to_endpoint(&out, &mut tx).unwrap(), 3);
        assert_eq!(receive_from_endpoint(&mut rx, &b).unwrap(), 3);
        assert_eq!(seen.drain().unwrap(), msgs);
    }
}
