//! Python bindings. Built as the `sensorkit` extension module.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use sensorkit::bus::{self, Bus, LogReader};
use sensorkit::calib::{self, Correspondence, RansacParams, Vec2, Vec3};
use sensorkit::dmcp::ConfigStore;
use sensorkit::sim::{self, SimConfig};
use sensorkit::transport::{can_decode_write, can_encode_read, CanFrame, CAN_MAX_ENCODED};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn v3(p: [f64; 3]) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}

fn a3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Rigid motion `p -> R p + t`.
#[pyclass(frozen, skip_from_py_object, name = "RigidTransform", module = "sensorkit")]
#[derive(Clone)]
struct PyRigidTransform(calib::RigidTransform);

#[pymethods]
impl PyRigidTransform {
    #[new]
    #[pyo3(signature = (quaternion_wxyz = [1.0, 0.0, 0.0, 0.0], translation = [0.0, 0.0, 0.0]))]
    fn new(quaternion_wxyz: [f64; 4], translation: [f64; 3]) -> PyResult<Self> {
        let n = quaternion_wxyz.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(value_err("quaternion must be non-zero and finite"));
        }
        Ok(Self(calib::RigidTransform::from_wxyz(quaternion_wxyz, v3(translation))))
    }

    #[staticmethod]
    fn from_axis_angle(axis: [f64; 3], angle_rad: f64, translation: [f64; 3]) -> PyResult<Self> {
        if v3(axis).norm() == 0.0 {
            return Err(value_err("axis must be non-zero"));
        }
        Ok(Self(calib::RigidTransform::from_axis_angle(&v3(axis), angle_rad, v3(translation))))
    }

    #[getter]
    fn quaternion(&self) -> [f64; 4] {
        self.0.quaternion_wxyz()
    }

    #[getter]
    fn translation(&self) -> [f64; 3] {
        a3(self.0.translation())
    }

    fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        a3(&self.0.apply(&v3(p)))
    }

    fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    /// `self ∘ other`: applies `other` first.
    fn compose(&self, other: &Self) -> Self {
        Self(self.0.compose(&other.0))
    }

    fn rotation_angle_to(&self, other: &Self) -> f64 {
        self.0.rotation_angle_to(&other.0)
    }

    fn __repr__(&self) -> String {
        let q = self.0.quaternion_wxyz();
        let t = self.0.translation();
        format!(
            "RigidTransform(quaternion_wxyz=[{}, {}, {}, {}], translation=[{}, {}, {}])",
            q[0], q[1], q[2], q[3], t.x, t.y, t.z
        )
    }
}

/// Pinhole camera with optional radial distortion.
#[pyclass(frozen, skip_from_py_object, name = "CameraIntrinsics", module = "sensorkit")]
#[derive(Clone)]
struct PyCameraIntrinsics(calib::CameraIntrinsics);

#[pymethods]
impl PyCameraIntrinsics {
    #[new]
    #[pyo3(signature = (fx, fy, cx, cy, k1 = 0.0, k2 = 0.0))]
    fn new(fx: f64, fy: f64, cx: f64, cy: f64, k1: f64, k2: f64) -> PyResult<Self> {
        calib::CameraIntrinsics::with_distortion(fx, fy, cx, cy, k1, k2)
            .map(Self)
            .map_err(value_err)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        calib::parse_intrinsics(text).map(Self).map_err(value_err)
    }

    fn project(&self, p: [f64; 3]) -> PyResult<(f64, f64)> {
        let px = self.0.project(&v3(p)).map_err(value_err)?;
        Ok((px.x, px.y))
    }

    fn backproject(&self, u: f64, v: f64) -> PyResult<[f64; 3]> {
        self.0.backproject(&Vec2::new(u, v)).map(|r| a3(&r)).map_err(value_err)
    }
}

#[pyclass(frozen, name = "CalibrationResult", module = "sensorkit")]
struct PyCalibrationResult {
    #[pyo3(get)]
    transform: PyRigidTransform,
    #[pyo3(get)]
    inliers: Vec<usize>,
    #[pyo3(get)]
    mean_error_px: f64,
}

#[pyfunction]
fn solve_quartic(c4: f64, c3: f64, c2: f64, c1: f64, c0: f64) -> PyResult<Vec<f64>> {
    calib::solve_quartic(c4, c3, c2, c1, c0).map_err(value_err)
}

/// Depth triples along three rays given the inter-point distances.
#[pyfunction]
fn p3p_depths(rays: [[f64; 3]; 3], d12: f64, d13: f64, d23: f64) -> PyResult<Vec<[f64; 3]>> {
    calib::p3p_depths(&rays.map(v3), d12, d13, d23).map_err(value_err)
}

/// Least-squares rigid motion taking `p[i]` to `q[i]`.
#[pyfunction]
fn horn_align(p: Vec<[f64; 3]>, q: Vec<[f64; 3]>) -> PyResult<PyRigidTransform> {
    let p: Vec<Vec3> = p.into_iter().map(v3).collect();
    let q: Vec<Vec3> = q.into_iter().map(v3).collect();
    calib::horn_align(&p, &q).map(PyRigidTransform).map_err(value_err)
}

/// Rangefinder-to-camera extrinsics from `(u, v, X, Y, Z)` rows.
#[pyfunction]
#[pyo3(signature = (rows, intrinsics, iterations = 500, threshold_px = 2.0, seed = 0, min_inliers = 6, adaptive = false))]
fn calibrate(
    py: Python<'_>,
    rows: Vec<[f64; 5]>,
    intrinsics: &PyCameraIntrinsics,
    iterations: usize,
    threshold_px: f64,
    seed: u64,
    min_inliers: usize,
    adaptive: bool,
) -> PyResult<PyCalibrationResult> {
    let corrs = rows
        .iter()
        .map(|r| Correspondence::new(Vec2::new(r[0], r[1]), Vec3::new(r[2], r[3], r[4])))
        .collect::<Result<Vec<_>, _>>()
        .map_err(value_err)?;
    let params = RansacParams {
        iterations,
        threshold_px,
        seed,
        min_inliers,
        adaptive,
    };
    let k = intrinsics.0.clone();
    let r = py
        .detach(move || calib::ransac_extrinsics(&corrs, &k, &params))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(PyCalibrationResult {
        transform: PyRigidTransform(r.transform),
        inliers: r.inliers,
        mean_error_px: r.mean_error_px,
    })
}

#[pyfunction]
fn parse_correspondences(text: &str) -> PyResult<Vec<[f64; 5]>> {
    let c = calib::parse_correspondences(text).map_err(value_err)?;
    Ok(c
        .iter()
        .map(|c| [c.pixel.x, c.pixel.y, c.point.x, c.point.y, c.point.z])
        .collect())
}

/// Encodes a CAN frame as `[id lo][id hi][data]`.
#[pyfunction]
fn can_encode<'py>(py: Python<'py>, id: u32, data: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let f = CanFrame::new(id, data).map_err(value_err)?;
    let b = can_encode_read(&f, CAN_MAX_ENCODED).map_err(value_err)?;
    Ok(PyBytes::new(py, &b))
}

#[pyfunction]
fn can_decode<'py>(py: Python<'py>, encoded: &[u8]) -> PyResult<(u16, Bound<'py, PyBytes>)> {
    let f = can_decode_write(encoded).map_err(value_err)?;
    Ok((f.id(), PyBytes::new(py, f.data())))
}

/// Checks a scene description; returns the object counts.
#[pyfunction]
fn parse_scene(text: &str) -> PyResult<BTreeMap<&'static str, usize>> {
    let s = sim::parse_scene(text).map_err(value_err)?;
    Ok(BTreeMap::from([
        ("boxes", s.boxes.len()),
        ("scanners", s.scanners.len()),
        ("idis", s.idis_sensors.len()),
        ("cameras", s.cameras.len()),
        ("landmarks", s.landmarks.len()),
        ("vehicles", usize::from(s.vehicle.is_some())),
    ]))
}

/// Runs the simulation and writes every message to a log at `out`.
/// Returns the number of messages.
#[pyfunction]
#[pyo3(signature = (out, scene = None, duration_s = 1.0, seed = 0, noise = 0.0, pixel_noise = 0.0))]
fn simulate(
    py: Python<'_>,
    out: std::path::PathBuf,
    scene: Option<&str>,
    duration_s: f64,
    seed: u64,
    noise: f64,
    pixel_noise: f64,
) -> PyResult<u64> {
    if !(duration_s >= 0.0 && duration_s.is_finite()) {
        return Err(value_err("duration_s must be >= 0"));
    }
    let scene = sim::parse_scene(scene.unwrap_or(sim::REFERENCE_SCENE)).map_err(value_err)?;
    let cfg = SimConfig {
        duration_us: (duration_s * 1e6).round() as u64,
        seed,
        range_noise_sigma_m: noise,
        pixel_noise_sigma_px: pixel_noise,
        ..Default::default()
    };
    let file = File::create(&out).map_err(|e| PyIOError::new_err(e.to_string()))?;
    py.detach(move || {
        let bus = Bus::new();
        let rec = bus::record(&bus, BufWriter::new(file)).map_err(value_err)?;
        let run = sim::run_simulation(&scene, &cfg, &bus);
        let (mut w, n) = rec.stop().map_err(value_err)?;
        w.flush().map_err(|e| PyIOError::new_err(e.to_string()))?;
        run.map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(n)
    })
}

/// `(timestamp_us, channel, payload_type, payload)` for every logged message.
#[pyfunction]
fn read_log<'py>(
    py: Python<'py>,
    path: std::path::PathBuf,
) -> PyResult<Vec<(u64, String, u8, Bound<'py, PyBytes>)>> {
    let f = File::open(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let mut r = LogReader::new(BufReader::new(f)).map_err(value_err)?;
    let mut out = Vec::new();
    while let Some(m) = r.next_message().map_err(value_err)? {
        out.push((m.timestamp_us, m.channel().to_string(), m.payload_type, PyBytes::new(py, &m.payload)));
    }
    Ok(out)
}

/// The configuration a module named `name` is offered.
#[pyfunction]
fn dmcp_offer(config: &str, name: &str) -> PyResult<BTreeMap<String, String>> {
    Ok(ConfigStore::parse(config).map_err(value_err)?.subset_for(name))
}

#[pymodule]
#[pyo3(name = "sensorkit")]
fn sensorkit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRigidTransform>()?;
    m.add_class::<PyCameraIntrinsics>()?;
    m.add_class::<PyCalibrationResult>()?;
    m.add_function(wrap_pyfunction!(solve_quartic, m)?)?;
    m.add_function(wrap_pyfunction!(p3p_depths, m)?)?;
    m.add_function(wrap_pyfunction!(horn_align, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(parse_correspondences, m)?)?;
    m.add_function(wrap_pyfunction!(can_encode, m)?)?;
    m.add_function(wrap_pyfunction!(can_decode, m)?)?;
    m.add_function(wrap_pyfunction!(parse_scene, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(read_log, m)?)?;
    m.add_function(wrap_pyfunction!(dmcp_offer, m)?)?;
    m.add("REFERENCE_SCENE", sim::REFERENCE_SCENE)?;
    Ok(())
}
