use std::cell::RefCell;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bus::{Bus, BusMessage};
use crate::calib::Vec2;
use crate::clock::{ManualTime, TimeSource, VirtualClock};
use crate::sensors::{
    encode_laser_scan, HellaDriver, ScanDriver, SensorServer, SensorServerConfig,
};
use crate::transport::{can_encode_read, open, EndpointSpec, CAN_MAX_ENCODED};

use super::{
    idis_detect, idis_sim_encode, project_landmarks, raycast_scan, step_vehicle, LandmarkProjection,
    Scene, SimError, VehicleState,
};

pub const PAYLOAD_LANDMARKS: u8 = 3;
pub const PAYLOAD_VEHICLE: u8 = 4;

const PERIOD_15HZ_US: u64 = 66_667;
const PERIOD_10HZ_US: u64 = 100_000;
/// Floor for noisy ranges so they stay strictly positive.
const MIN_NOISY_RANGE_M: f32 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub duration_us: u64,
    pub seed: u64,
    /// Standard deviation of Gaussian noise on scan returns; 0 disables it.
    pub range_noise_sigma_m: f64,
    pub pixel_noise_sigma_px: f64,
    pub steer_rad: f64,
    pub scanner_period_us: u64,
    pub idis_period_us: u64,
    pub camera_period_us: u64,
    pub vehicle_period_us: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration_us: 1_000_000,
            seed: 0,
            range_noise_sigma_m: 0.0,
            pixel_noise_sigma_px: 0.0,
            steer_rad: 0.0,
            scanner_period_us: PERIOD_15HZ_US,
            idis_period_us: PERIOD_10HZ_US,
            camera_period_us: PERIOD_15HZ_US,
            vehicle_period_us: PERIOD_10HZ_US,
        }
    }
}

/// `[u16 n][n × (u16 name_len, name, u8 flags, f64 u, f64 v)]`; flags bit0
/// = in front of the camera, bit1 = inside the image.
pub fn encode_landmark_payload(p: &[LandmarkProjection]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(p.len() as u16).to_le_bytes());
    for l in p {
        out.extend_from_slice(&(l.name.len() as u16).to_le_bytes());
        out.extend_from_slice(l.name.as_bytes());
        let flags = u8::from(l.pixel.is_some()) | (u8::from(l.in_frame) << 1);
        out.push(flags);
        let px = l.pixel.unwrap_or(Vec2::new(f64::NAN, f64::NAN));
        out.extend_from_slice(&px.x.to_le_bytes());
        out.extend_from_slice(&px.y.to_le_bytes());
    }
    out
}

pub fn decode_landmark_payload(b: &[u8]) -> Result<Vec<LandmarkProjection>, SimError> {
    let bad = || SimError::Invalid("truncated landmark payload".into());
    let mut pos = 0;
    let mut take = |n: usize| -> Result<&[u8], SimError> {
        let s = b.get(pos..pos + n).ok_or_else(bad)?;
        pos += n;
        Ok(s)
    };
    let n = u16::from_le_bytes(take(2)?.try_into().unwrap());
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(len)?.to_vec())
            .map_err(|_| SimError::Invalid("landmark name is not UTF-8".into()))?;
        let flags = take(1)?[0];
        let u = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let v = f64::from_le_bytes(take(8)?.try_into().unwrap());
        out.push(LandmarkProjection {
            name,
            pixel: (flags & 1 != 0).then_some(Vec2::new(u, v)),
            in_frame: flags & 2 != 0,
        });
    }
    if pos != b.len() {
        return Err(SimError::Invalid("trailing bytes in landmark payload".into()));
    }
    Ok(out)
}

fn encode_vehicle(s: &VehicleState) -> Vec<u8> {
    [s.x, s.y, s.yaw, s.speed]
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect()
}

/// Private in-process endpoint names, unique per run.
fn unique(kind: &str, name: &str) -> String {
    static RUN: AtomicU64 = AtomicU64::new(0);
    format!("sim{}-{kind}.{name}", RUN.fetch_add(1, Ordering::Relaxed))
}

fn endpoint_pair(protocol: &str, name: &str) -> Result<(crate::transport::Endpoint, crate::transport::Endpoint), SimError> {
    let spec = EndpointSpec::new(protocol, name)?;
    Ok((open(&spec, false)?, open(&spec, false)?))
}

/// Runs every simulated sensor on virtual time for `cfg.duration_us`,
/// publishing on `scan.<name>`, `idis.<name>`, `camera.<name>` and
/// `vehicle.<name>`. Returns the number of activations.
///
/// Scans and obstacle lists go through the regular drivers and sensor
/// servers, stamped with the virtual time.
pub fn run_simulation(scene: &Scene, cfg: &SimConfig, bus: &Bus) -> Result<usize, SimError> {
    for (p, what) in [
        (cfg.scanner_period_us, "scanner"),
        (cfg.idis_period_us, "idis"),
        (cfg.camera_period_us, "camera"),
        (cfg.vehicle_period_us, "vehicle"),
    ] {
        if p == 0 {
            return Err(SimError::Invalid(format!("{what} period must be > 0")));
        }
    }
    let range_noise = (cfg.range_noise_sigma_m > 0.0)
        .then(|| Normal::new(0.0, cfg.range_noise_sigma_m))
        .transpose()
        .map_err(|e| SimError::Invalid(e.to_string()))?;
    let pixel_noise = (cfg.pixel_noise_sigma_px > 0.0)
        .then(|| Normal::new(0.0, cfg.pixel_noise_sigma_px))
        .transpose()
        .map_err(|e| SimError::Invalid(e.to_string()))?;

    let rng = RefCell::new(ChaCha8Rng::seed_from_u64(cfg.seed));
    let time = Arc::new(ManualTime::new(0));
    let stamp: Arc<dyn TimeSource> = time.clone();
    let mut vclock: VirtualClock<'_, SimError> = VirtualClock::new();

    if let Some(v) = &scene.vehicle {
        let mut state = VehicleState::from(v);
        let channel = format!("vehicle.{}", v.name);
        let dt = cfg.vehicle_period_us as f64 * 1e-6;
        let steer = cfg.steer_rad;
        vclock
            .register(&channel.clone(), cfg.vehicle_period_us, 0, move |t| {
                bus.publish(&BusMessage::new(channel.as_str(), t, PAYLOAD_VEHICLE, encode_vehicle(&state))?);
                state = step_vehicle(&state, steer, dt)?;
                Ok(())
            })
            .map_err(|e| SimError::Invalid(e.to_string()))?;
    }

    for sc in &scene.scanners {
        let clean = raycast_scan(scene, sc)?;
        let (mut tx, rx) = endpoint_pair("loopback", &unique("scan", &sc.name))?;
        let channel = format!("scan.{}", sc.name);
        let mut server = SensorServer::new(
            Box::new(ScanDriver::new(rx, clean.max_range_m)),
            bus,
            stamp.clone(),
            SensorServerConfig::new(&channel, "simscan")?,
        )?;
        let (rng, time) = (&rng, time.clone());
        vclock
            .register(&channel, cfg.scanner_period_us, 1, move |t| {
                let mut scan = clean.clone();
                if let Some(n) = &range_noise {
                    let mut rng = rng.borrow_mut();
                    for r in scan.ranges_m.iter_mut().filter(|r| **r < clean.max_range_m) {
                        *r = (*r + n.sample(&mut *rng) as f32).clamp(MIN_NOISY_RANGE_M, clean.max_range_m);
                    }
                }
                time.set(t);
                tx.write(&encode_laser_scan(&scan)?)?;
                server.pump()?;
                Ok(())
            })
            .map_err(|e| SimError::Invalid(e.to_string()))?;
    }

    for m in &scene.idis_sensors {
        let report = idis_detect(scene, m);
        let (mut tx, rx) = endpoint_pair("cansim", &unique("idis", &m.name))?;
        let channel = format!("idis.{}", m.name);
        let mut server = SensorServer::new(
            Box::new(HellaDriver::new(rx)),
            bus,
            stamp.clone(),
            SensorServerConfig::new(&channel, "hella")?,
        )?;
        let time = time.clone();
        let mut seq: u32 = 0;
        vclock
            .register(&channel, cfg.idis_period_us, 2, move |t| {
                let mut r = report.clone();
                r.sequence = seq;
                seq = seq.wrapping_add(1);
                for f in idis_sim_encode(&r)? {
                    tx.write(&can_encode_read(&f, CAN_MAX_ENCODED)?)?;
                }
                time.set(t);
                server.pump()?;
                Ok(())
            })
            .map_err(|e| SimError::Invalid(e.to_string()))?;
    }

    for cam in &scene.cameras {
        let clean = project_landmarks(scene, cam);
        let channel = format!("camera.{}", cam.name);
        let rng = &rng;
        vclock
            .register(&channel.clone(), cfg.camera_period_us, 3, move |t| {
                let mut obs = clean.clone();
                if let Some(n) = &pixel_noise {
                    let mut rng = rng.borrow_mut();
                    for p in obs.iter_mut().filter_map(|o| o.pixel.as_mut()) {
                        p.x += n.sample(&mut *rng);
                        p.y += n.sample(&mut *rng);
                    }
                }
                bus.publish(&BusMessage::new(channel.as_str(), t, PAYLOAD_LANDMARKS, encode_landmark_payload(&obs))?);
                Ok(())
            })
            .map_err(|e| SimError::Invalid(e.to_string()))?;
    }

    vclock.run_until(cfg.duration_us)
}
