use crate::transport::Endpoint;

use super::{decode_laser_scan, LaserScan, SensorError};

/// Scans arrive one payload per datagram.
const MAX_SCAN_BYTES: usize = 1 << 20;

/// Single-layer scanner driver fed LaserScan payloads over an endpoint.
pub struct ScanDriver {
    ep: Endpoint,
    max_range_m: f32,
    latest: Option<LaserScan>,
    malformed: u64,
    fresh: bool,
}

impl ScanDriver {
    pub fn new(mut ep: Endpoint, max_range_m: f32) -> Self {
        ep.set_blocking(false);
        ScanDriver {
            ep,
            max_range_m,
            latest: None,
            malformed: 0,
            fresh: false,
        }
    }

    pub fn malformed_payloads(&self) -> u64 {
        self.malformed
    }

    /// Drains pending scans and returns the newest one seen so far.
    pub fn read(&mut self) -> Result<Option<LaserScan>, SensorError> {
        loop {
            let bytes = self.ep.read(MAX_SCAN_BYTES)?;
            if bytes.is_empty() {
                break;
            }
            match decode_laser_scan(&bytes, self.max_range_m) {
                Ok(s) => {
                    self.latest = Some(s);
                    self.fresh = true;
                }
                Err(e) => {
                    self.malformed += 1;
                    log::debug!("dropping scan payload: {e}");
                }
            }
        }
        Ok(self.latest.clone())
    }

    pub(crate) fn take_fresh(&mut self) -> bool {
        std::mem::take(&mut self.fresh)
    }
}

pub fn scan_read(driver: &mut ScanDriver) -> Result<Option<LaserScan>, SensorError> {
    driver.read()
}

/// A run of beams without range discontinuities. Indices are inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start_index: usize,
    pub end_index: usize,
    pub mean_range_m: f32,
}

pub fn segment_scan(
    scan: &LaserScan,
    jump_m: f32,
    min_points: usize,
) -> Result<Vec<Segment>, SensorError> {
    if !(jump_m > 0.0) || min_points == 0 {
        return Err(SensorError::Invalid(format!(
            "need jump > 0 and min_points >= 1 (got {jump_m}, {min_points})"
        )));
    }
    let r = &scan.ranges_m;
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let close = |s: usize, e: usize, out: &mut Vec<Segment>| {
        if e + 1 - s >= min_points {
            let sum: f64 = r[s..=e].iter().map(|&v| f64::from(v)).sum();
            out.push(Segment {
                start_index: s,
                end_index: e,
                mean_range_m: (sum / (e + 1 - s) as f64) as f32,
            });
        }
    };
    for i in 0..r.len() {
        if scan.is_no_return(i) {
            if let Some(s) = start.take() {
                close(s, i - 1, &mut out);
            }
            continue;
        }
        match start {
            None => start = Some(i),
            Some(s) if (r[i] - r[i - 1]).abs() > jump_m => {
                close(s, i - 1, &mut out);
                start = Some(i);
            }
            Some(_) => {}
        }
    }
    if let Some(s) = start {
        close(s, r.len() - 1, &mut out);
    }
    Ok(out)
}
