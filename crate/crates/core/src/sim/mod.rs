//! Synthetic sensor data from one scene description.
//!
//! Everything a simulated sensor reports is derived from the same
//! [`Scene`]: laser scans by ray casting, obstacle lists by range and
//! field-of-view gating, camera observations by projecting landmarks.

mod camera;
mod idis;
mod raycast;
mod run;
mod scene;
mod vehicle;

use thiserror::Error;

pub use camera::{
    camera_from_world, project_landmarks, synthesize_correspondences, LandmarkProjection,
};
pub use idis::{idis_detect, idis_sim_encode};
pub use raycast::raycast_scan;
pub use run::{
    decode_landmark_payload, encode_landmark_payload, run_simulation, SimConfig,
    PAYLOAD_LANDMARKS, PAYLOAD_VEHICLE,
};
pub use scene::{
    parse_scene, BoxObstacle, CameraModel, IdisModel, Landmark, Pose, ScannerModel, Scene,
    VehicleModel, REFERENCE_SCENE,
};
pub use vehicle::{step_vehicle, VehicleState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scene line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("sensor '{0}' is inside a box")]
    InsideBox(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sensor(#[from] crate::sensors::SensorError),
    #[error(transparent)]
    Bus(#[from] crate::bus::BusError),
    #[error(transparent)]
    Transport(#[from] crate::transport::TransportError),
    #[error(transparent)]
    Calib(#[from] crate::calib::CalibError),
}
