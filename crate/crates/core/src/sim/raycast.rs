use crate::sensors::LaserScan;

use super::{BoxObstacle, ScannerModel, Scene, SimError};

/// Entry distance of the ray `o + t·d` (t ≥ 0) into the box footprint, if
/// the ray's height lies within the box. `Err` when `o` is inside.
fn intersect(b: &BoxObstacle, o: (f64, f64, f64), d: (f64, f64)) -> Result<Option<f64>, ()> {
    let (zlo, zhi) = b.z_range();
    if o.2 < zlo || o.2 > zhi {
        return Ok(None);
    }
    // into box-local coordinates
    let (s, c) = b.yaw.sin_cos();
    let (px, py) = (o.0 - b.center.x, o.1 - b.center.y);
    let lo = (c * px + s * py, -s * px + c * py);
    let ld = (c * d.0 + s * d.1, -s * d.0 + c * d.1);
    let half = (b.size.x / 2.0, b.size.y / 2.0);
    if lo.0.abs() <= half.0 && lo.1.abs() <= half.1 {
        return Err(());
    }
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (p, v, h) in [(lo.0, ld.0, half.0), (lo.1, ld.1, half.1)] {
        if v == 0.0 {
            if p.abs() > h {
                return Ok(None);
            }
            continue;
        }
        let (a, b) = ((-h - p) / v, (h - p) / v);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    Ok((t0 <= t1 && t0 >= 0.0).then_some(t0))
}

/// Synthetic scan of `scanner` in `scene`. Beam angles are relative to the
/// scanner heading; beams that hit nothing report `max_range_m`.
pub fn raycast_scan(scene: &Scene, scanner: &ScannerModel) -> Result<LaserScan, SimError> {
    let n = scanner.beam_count;
    if n < 2 || !(scanner.max_range_m > 0.0) {
        return Err(SimError::Invalid(format!("scanner '{}' is misconfigured", scanner.name)));
    }
    let start = -scanner.fov_rad / 2.0;
    let step = scanner.fov_rad / (n - 1) as f64;
    let p = &scanner.pose;
    let max = scanner.max_range_m;
    let mut ranges = Vec::with_capacity(n);
    for i in 0..n {
        let a = p.yaw + start + step * i as f64;
        let d = (a.cos(), a.sin());
        let mut r = max;
        for b in &scene.boxes {
            match intersect(b, (p.x, p.y, p.z), d) {
                Ok(Some(t)) => r = r.min(t),
                Ok(None) => {}
                Err(()) => return Err(SimError::InsideBox(scanner.name.clone())),
            }
        }
        ranges.push(r as f32);
    }
    Ok(LaserScan::new(start as f32, step as f32, ranges, max as f32)?)
}
