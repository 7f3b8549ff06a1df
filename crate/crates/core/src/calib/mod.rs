//! Camera to rangefinder extrinsic calibration.
//!
//! Pixels are back-projected to rays, three-point samples are lifted to
//! camera-frame points by solving for their depths, and the rigid motion
//! between the rangefinder points and those camera points is found in
//! closed form. RANSAC picks the sample whose motion explains the most
//! correspondences, and a final alignment over its inliers gives the result.

mod camera;
mod horn;
mod io;
mod p3p;
mod quartic;
mod ransac;
mod transform;

use thiserror::Error;

pub use camera::{backproject, project, CameraIntrinsics};
pub use horn::horn_align;
pub use io::{format_report, parse_correspondences, parse_intrinsics};
pub use p3p::p3p_depths;
pub use quartic::solve_quartic;
pub use ransac::{
    ransac_extrinsics, reproject_cloud, CalibrationResult, Correspondence, RansacParams, Reprojection,
};
pub use transform::RigidTransform;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("point is not in front of the camera (z = {0})")]
    BehindCamera(f64),
    #[error("back-projection did not converge")]
    NoConvergence,
    #[error("polynomial has all-zero coefficients")]
    ZeroPolynomial,
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("mismatched point sets: {0} vs {1}")]
    Mismatch(usize, usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no consensus: best model has {best} inliers, {required} required")]
    NoConsensus { best: usize, required: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}
