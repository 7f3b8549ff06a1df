use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::transport::Endpoint;

use super::{
    encode_laser_scan, encode_obstacle_report, HellaDriver, LaserScan, ObstacleReport, ScanDriver,
    SensorError, PAYLOAD_LASER_SCAN, PAYLOAD_OBSTACLE_REPORT,
};

const DEFAULT_SCAN_MAX_RANGE_M: f32 = 80.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Obstacles(ObstacleReport),
    Scan(LaserScan),
}

impl Sample {
    pub fn payload_type(&self) -> u8 {
        match self {
            Sample::Obstacles(_) => PAYLOAD_OBSTACLE_REPORT,
            Sample::Scan(_) => PAYLOAD_LASER_SCAN,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, SensorError> {
        match self {
            Sample::Obstacles(r) => encode_obstacle_report(r),
            Sample::Scan(s) => encode_laser_scan(s),
        }
    }
}

/// Common interface of sensor drivers.
pub trait Driver: Send {
    fn kind(&self) -> &'static str;

    /// Drains the input and returns the newest sample, or `None` if nothing
    /// arrived since the previous call.
    fn read_sample(&mut self) -> Result<Option<Sample>, SensorError>;
}

impl Driver for HellaDriver {
    fn kind(&self) -> &'static str {
        "hella"
    }

    fn read_sample(&mut self) -> Result<Option<Sample>, SensorError> {
        let r = self.read()?;
        Ok(self.take_fresh().then_some(Sample::Obstacles(r)))
    }
}

impl Driver for ScanDriver {
    fn kind(&self) -> &'static str {
        "simscan"
    }

    fn read_sample(&mut self) -> Result<Option<Sample>, SensorError> {
        let s = self.read()?;
        Ok(if self.take_fresh() { s.map(Sample::Scan) } else { None })
    }
}

/// Builds a driver over an endpoint; the string holds driver options.
pub type DriverFactory =
    Arc<dyn Fn(Endpoint, &str) -> Result<Box<dyn Driver>, SensorError> + Send + Sync>;

fn registry() -> &'static RwLock<HashMap<String, DriverFactory>> {
    static REG: OnceLock<RwLock<HashMap<String, DriverFactory>>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut m: HashMap<String, DriverFactory> = HashMap::new();
        m.insert(
            "hella".into(),
            Arc::new(|ep, _| Ok(Box::new(HellaDriver::new(ep)) as Box<dyn Driver>)),
        );
        m.insert(
            "simscan".into(),
            Arc::new(|ep, opts| {
                let max = if opts.trim().is_empty() {
                    DEFAULT_SCAN_MAX_RANGE_M
                } else {
                    opts.trim()
                        .parse()
                        .map_err(|_| SensorError::Invalid(format!("bad max range '{opts}'")))?
                };
                Ok(Box::new(ScanDriver::new(ep, max)) as Box<dyn Driver>)
            }),
        );
        RwLock::new(m)
    })
}

/// Adds or replaces a driver kind.
pub fn register_driver<F>(kind: &str, factory: F)
where
    F: Fn(Endpoint, &str) -> Result<Box<dyn Driver>, SensorError> + Send + Sync + 'static,
{
    let mut reg = registry().write().unwrap_or_else(|e| e.into_inner());
    if reg.insert(kind.to_string(), Arc::new(factory)).is_some() {
        log::warn!("driver '{kind}' re-registered");
    }
}

pub fn open_driver(kind: &str, ep: Endpoint, options: &str) -> Result<Box<dyn Driver>, SensorError> {
    let f = registry()
        .read()
        .unwrap_or_else(|e| e.into_inner())
        .get(kind)
        .cloned()
        .ok_or_else(|| SensorError::UnknownDriver(kind.to_string()))?;
    f(ep, options)
}
