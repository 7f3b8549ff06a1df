//! Sensor drivers and the server/client glue that puts their samples on
//! the bus.

mod codec;
mod driver;
mod idis;
mod scan;
mod server;

use thiserror::Error;

use crate::bus::BusError;
use crate::transport::TransportError;

pub use codec::{
    decode_laser_scan, decode_obstacle_report, encode_laser_scan, encode_obstacle_report,
    PAYLOAD_LASER_SCAN, PAYLOAD_OBSTACLE_REPORT,
};
pub use driver::{open_driver, register_driver, Driver, DriverFactory, Sample};
pub use idis::{
    idis_encode_slot, idis_parse_frame, idis_read, HellaDriver, IdisSlot, IDIS_BASE_ID,
    IDIS_FLAG_VALID, IDIS_MAX_RANGE_M, IDIS_MIN_RANGE_M, IDIS_SLOTS,
};
pub use scan::{scan_read, segment_scan, ScanDriver, Segment};
pub use server::{serve, SensorClient, SensorServer, SensorServerConfig, ServerHandle};

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("malformed frame {id:#x}: {reason}")]
    MalformedFrame { id: u16, reason: String },
    #[error("malformed payload: {0}")]
    Payload(String),
    #[error("driver endpoint is closed")]
    Closed,
    #[error("unknown driver '{0}'")]
    UnknownDriver(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("clock: {0}")]
    Clock(#[from] crate::clock::ClockError),
    #[error(transparent)]
    Transport(TransportError),
    #[error(transparent)]
    Bus(#[from] BusError),
}

impl From<TransportError> for SensorError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Closed => SensorError::Closed,
            e => SensorError::Transport(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub range_m: f32,
    /// Positive to the left.
    pub lateral_m: f32,
    pub width_m: f32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObstacleReport {
    pub obstacles: Vec<Obstacle>,
    pub sequence: u32,
}

/// One sweep of a single-layer scanner. Beams with no echo carry
/// `max_range_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserScan {
    pub start_angle_rad: f32,
    pub angle_step_rad: f32,
    pub ranges_m: Vec<f32>,
    pub max_range_m: f32,
}

impl LaserScan {
    pub fn new(
        start_angle_rad: f32,
        angle_step_rad: f32,
        ranges_m: Vec<f32>,
        max_range_m: f32,
    ) -> Result<Self, SensorError> {
        if !(angle_step_rad > 0.0) {
            return Err(SensorError::Invalid("angle step must be > 0".into()));
        }
        if !(max_range_m > 0.0) {
            return Err(SensorError::Invalid("max range must be > 0".into()));
        }
        if let Some(r) = ranges_m.iter().find(|r| !(**r > 0.0 && **r <= max_range_m)) {
            return Err(SensorError::Invalid(format!(
                "range {r} outside (0, {max_range_m}]"
            )));
        }
        Ok(LaserScan {
            start_angle_rad,
            angle_step_rad,
            ranges_m,
            max_range_m,
        })
    }

    pub fn is_no_return(&self, i: usize) -> bool {
        self.ranges_m[i] >= self.max_range_m
    }
}
