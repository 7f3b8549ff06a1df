use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::bus::{Bus, BusMessage, Subscription};
use crate::clock::TimeSource;

use super::{
    decode_laser_scan, decode_obstacle_report, Driver, Sample, SensorError, PAYLOAD_LASER_SCAN,
    PAYLOAD_OBSTACLE_REPORT,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SensorServerConfig {
    pub channel: String,
    /// Driver kind expected behind this server, e.g. "hella".
    pub kind: String,
    pub poll_interval: Duration,
}

impl SensorServerConfig {
    pub fn new(channel: &str, kind: &str) -> Result<Self, SensorError> {
        if channel.is_empty() {
            return Err(SensorError::Invalid("empty channel".into()));
        }
        Ok(SensorServerConfig {
            channel: channel.to_string(),
            kind: kind.to_string(),
            poll_interval: Duration::from_millis(5),
        })
    }
}

/// Reads a driver and publishes each new sample, stamped by `clock`.
pub struct SensorServer {
    driver: Box<dyn Driver>,
    bus: Bus,
    clock: Arc<dyn TimeSource>,
    cfg: SensorServerConfig,
    published: u64,
}

impl SensorServer {
    pub fn new(
        driver: Box<dyn Driver>,
        bus: &Bus,
        clock: Arc<dyn TimeSource>,
        cfg: SensorServerConfig,
    ) -> Result<Self, SensorError> {
        if cfg.channel.is_empty() {
            return Err(SensorError::Invalid("empty channel".into()));
        }
        if !cfg.kind.is_empty() && cfg.kind != driver.kind() {
            return Err(SensorError::Invalid(format!(
                "config expects a '{}' driver, got '{}'",
                cfg.kind,
                driver.kind()
            )));
        }
        Ok(SensorServer {
            driver,
            bus: bus.clone(),
            clock,
            cfg,
            published: 0,
        })
    }

    /// Publishes at most one sample. Returns whether one was published.
    pub fn pump(&mut self) -> Result<bool, SensorError> {
        let Some(sample) = self.driver.read_sample()? else {
            return Ok(false);
        };
        let msg = BusMessage::new(
            self.cfg.channel.as_str(),
            self.clock.now_us()?,
            sample.payload_type(),
            sample.encode()?,
        )?;
        self.bus.publish(&msg);
        self.published += 1;
        Ok(true)
    }

    pub fn published(&self) -> u64 {
        self.published
    }
}

/// A server running on its own thread.
pub struct ServerHandle {
    stop: Arc<AtomicBool>,
    error: Arc<Mutex<Option<String>>>,
    thread: Option<JoinHandle<u64>>,
}

impl ServerHandle {
    /// The error that stopped the server, if any.
    pub fn error(&self) -> Option<String> {
        self.error.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Stops the thread and returns the number of published samples.
    pub fn stop(mut self) -> Result<u64, SensorError> {
        self.stop.store(true, Ordering::SeqCst);
        let n = self.thread.take().map(|t| t.join().unwrap_or(0)).unwrap_or(0);
        match self.error() {
            Some(e) => Err(SensorError::Invalid(format!("server failed: {e}"))),
            None => Ok(n),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn serve(
    driver: Box<dyn Driver>,
    bus: &Bus,
    clock: Arc<dyn TimeSource>,
    cfg: SensorServerConfig,
) -> Result<ServerHandle, SensorError> {
    let poll = cfg.poll_interval;
    let mut server = SensorServer::new(driver, bus, clock, cfg)?;
    let stop = Arc::new(AtomicBool::new(false));
    let error = Arc::new(Mutex::new(None));
    let (stop2, error2) = (stop.clone(), error.clone());
    let thread = std::thread::spawn(move || {
        while !stop2.load(Ordering::SeqCst) {
            match server.pump() {
                Ok(true) => {}
                Ok(false) => std::thread::sleep(poll),
                Err(e) => {
                    log::error!("sensor server on '{}': {e}", server.cfg.channel);
                    *error2.lock().unwrap_or_else(|e| e.into_inner()) = Some(e.to_string());
                    break;
                }
            }
        }
        server.published
    });
    Ok(ServerHandle {
        stop,
        error,
        thread: Some(thread),
    })
}

/// Decodes samples from one channel.
pub struct SensorClient {
    sub: Subscription,
    scan_max_range_m: f32,
}

impl SensorClient {
    pub fn new(bus: &Bus, channel: &str, scan_max_range_m: f32) -> Self {
        SensorClient {
            sub: bus.subscribe(channel),
            scan_max_range_m,
        }
    }

    pub fn decode(&self, msg: &BusMessage) -> Result<Sample, SensorError> {
        match msg.payload_type {
            PAYLOAD_OBSTACLE_REPORT => Ok(Sample::Obstacles(decode_obstacle_report(&msg.payload)?)),
            PAYLOAD_LASER_SCAN => Ok(Sample::Scan(decode_laser_scan(
                &msg.payload,
                self.scan_max_range_m,
            )?)),
            t => Err(SensorError::Payload(format!("unexpected payload type {t}"))),
        }
    }

    /// Next sample with its timestamp, or `None` on timeout.
    pub fn next(&self, timeout: Duration) -> Result<Option<(u64, Sample)>, SensorError> {
        match self.sub.poll(timeout)? {
            None => Ok(None),
            Some(m) => Ok(Some((m.timestamp_us, self.decode(&m)?))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualTime;
    use crate::sensors::{idis_encode_slot, open_driver, IdisSlot, ObstacleReport, Obstacle};
    use crate::transport::{can_encode_read, open, parse_endpoint_spec};

    fn hella(bus_name: &str) -> (crate::transport::Endpoint, Box<dyn Driver>) {
        let spec = parse_endpoint_spec(&format!("cansim,{bus_name}")).unwrap();
        let tx = open(&spec, false).unwrap();
        (tx, open_driver("hella", open(&spec, false).unwrap(), "").unwrap())
    }

    fn send(tx: &mut crate::transport::Endpoint, range_m: f32, seq: u8) {
        let f = idis_encode_slot(&IdisSlot {
            slot: 0,
            range_m,
            lateral_m: 1.25,
            width_m: 2.0,
            valid: true,
            sequence: seq,
        })
        .unwrap();
        tx.write(&can_encode_read(&f, 10).unwrap()).unwrap();
    }

    #[test]
    fn pump_publishes_timestamped_report() {
        let bus = Bus::new();
        let clock = Arc::new(ManualTime::new(1234));
        let (mut tx, d) = hella("srv-pump");
        let client = SensorClient::new(&bus, "radar", 80.0);
        let mut srv = SensorServer::new(d, &bus, clock.clone(), SensorServerConfig::new("radar", "hella").unwrap()).unwrap();
        assert!(!srv.pump().unwrap());
        send(&mut tx, 42.0, 1);
        assert!(srv.pump().unwrap());
        let (ts, s) = client.next(Duration::from_millis(100)).unwrap().unwrap();
        assert_eq!(ts, 1234);
        assert_eq!(
            s,
            Sample::Obstacles(ObstacleReport {
                obstacles: vec![Obstacle { range_m: 42.0, lateral_m: 1.25, width_m: 2.0 }],
                sequence: 1
            })
        );
        assert!(!srv.pump().unwrap());
    }

    #[test]
    fn kind_mismatch_rejected() {
        let (_tx, d) = hella("srv-kind");
        let cfg = SensorServerConfig::new("x", "simscan").unwrap();
        assert!(SensorServer::new(d, &Bus::new(), Arc::new(ManualTime::new(0)), cfg).is_err());
        assert!(SensorServerConfig::new("", "hella").is_err());
    }

    #[test]
    fn threaded_servers_fan_in() {
        let bus = Bus::new();
        let mon = bus.attach_monitor();
        let clock: Arc<dyn TimeSource> = Arc::new(ManualTime::new(7));
        let (mut tx1, d1) = hella("srv-a");
        let (mut tx2, d2) = hella("srv-b");
        let h1 = serve(d1, &bus, clock.clone(), SensorServerConfig::new("front", "hella").unwrap()).unwrap();
        let h2 = serve(d2, &bus, clock, SensorServerConfig::new("rear", "hella").unwrap()).unwrap();
        send(&mut tx1, 10.0, 1);
        send(&mut tx2, 20.0, 1);
        let mut seen = Vec::new();
        while seen.len() < 2 {
            let m = mon.poll(Duration::from_secs(2)).unwrap().expect("timed out");
            seen.push((m.channel().to_string(), m.payload_type));
        }
        seen.sort();
        assert_eq!(seen, vec![("front".into(), 1), ("rear".into(), 1)]);
        assert_eq!(h1.stop().unwrap(), 1);
        assert_eq!(h2.stop().unwrap(), 1);
    }
}
