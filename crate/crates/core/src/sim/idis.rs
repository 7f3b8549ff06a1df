use crate::sensors::{idis_encode_slot, IdisSlot, Obstacle, ObstacleReport, SensorError, IDIS_SLOTS};
use crate::transport::CanFrame;

use super::{IdisModel, Scene};

/// Distance from the origin to the segment `a`–`b`.
fn seg_dist((ax, ay): (f64, f64), (bx, by): (f64, f64)) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0)
    };
    (ax + t * dx).hypot(ay + t * dy)
}

fn inside(c: &[(f64, f64); 4]) -> bool {
    // corners are counter-clockwise
    (0..4).all(|i| {
        let (a, b) = (c[i], c[(i + 1) % 4]);
        (b.0 - a.0) * (-a.1) - (b.1 - a.1) * (-a.0) >= 0.0
    })
}

/// Boxes the radar would report, nearest first, at most 16. Sequence is 0.
pub fn idis_detect(scene: &Scene, sensor: &IdisModel) -> ObstacleReport {
    let p = &sensor.pose;
    let (s, c) = p.yaw.sin_cos();
    let to_sensor = |(x, y): (f64, f64)| {
        let (dx, dy) = (x - p.x, y - p.y);
        (c * dx + s * dy, -s * dx + c * dy)
    };
    let tan_v = (sensor.vfov_rad / 2.0).tan();
    let mut found: Vec<Obstacle> = Vec::new();
    for b in &scene.boxes {
        let corners = b.corners().map(to_sensor);
        let range = if inside(&corners) {
            0.0
        } else {
            (0..4)
                .map(|i| seg_dist(corners[i], corners[(i + 1) % 4]))
                .fold(f64::INFINITY, f64::min)
        };
        if range < sensor.min_range_m || range > sensor.max_range_m {
            continue;
        }
        let center = to_sensor((b.center.x, b.center.y));
        let bearing = center.1.atan2(center.0);
        if bearing.abs() > sensor.hfov_rad / 2.0 {
            continue;
        }
        let (zlo, zhi) = b.z_range();
        let reach = range * tan_v;
        if zhi < p.z - reach || zlo > p.z + reach {
            continue;
        }
        let (ps, pc) = bearing.sin_cos();
        let proj = corners.map(|(x, y)| -ps * x + pc * y);
        let width = proj.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
            - proj.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        found.push(Obstacle {
            range_m: range as f32,
            lateral_m: (range * bearing.sin()) as f32,
            width_m: width as f32,
        });
    }
    found.sort_by(|a, b| a.range_m.total_cmp(&b.range_m));
    found.truncate(IDIS_SLOTS);
    ObstacleReport {
        obstacles: found,
        sequence: 0,
    }
}

/// One frame per slot; slots past the obstacle count are sent invalid.
pub fn idis_sim_encode(report: &ObstacleReport) -> Result<Vec<CanFrame>, SensorError> {
    if report.obstacles.len() > IDIS_SLOTS {
        return Err(SensorError::Invalid(format!(
            "{} obstacles exceed {IDIS_SLOTS} slots",
            report.obstacles.len()
        )));
    }
    (0..IDIS_SLOTS)
        .map(|i| {
            let o = report.obstacles.get(i);
            idis_encode_slot(&IdisSlot {
                slot: i as u8,
                range_m: o.map_or(0.0, |o| o.range_m),
                lateral_m: o.map_or(0.0, |o| o.lateral_m),
                width_m: o.map_or(0.0, |o| o.width_m),
                valid: o.is_some(),
                sequence: report.sequence as u8,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::idis_parse_frame;
    use crate::sim::parse_scene;

    fn detect(text: &str) -> ObstacleReport {
        let s = parse_scene(&format!("idis r 0 0 0.7 0\n{text}")).unwrap();
        idis_detect(&s, &s.idis_sensors[0])
    }

    #[test]
    fn dead_ahead() {
        let r = detect("box car 100 0 0.75 4 2 1.5 0");
        assert_eq!(r.obstacles.len(), 1);
        let o = r.obstacles[0];
        assert!((o.range_m - 98.0).abs() < 1e-4);
        assert!(o.lateral_m.abs() < 1e-6);
        assert!((o.width_m - 2.0).abs() < 1e-5);
    }

    #[test]
    fn too_close_and_off_axis() {
        assert!(detect("box b 2.5 0 0.7 1 1 2 0").obstacles.is_empty());
        let a = 10f64.to_radians();
        assert!(detect(&format!("box b {} {} 0.7 1 1 2 0", 50.0 * a.cos(), 50.0 * a.sin()))
            .obstacles
            .is_empty());
    }

    #[test]
    fn vertical_wedge() {
        // 0.5 m tall box floating 3 m above the sensor at 20 m: outside ±1.5°
        assert!(detect("box b 20 0 3.95 1 1 0.5 0").obstacles.is_empty());
        // same box at 140 m is inside the wedge (reach ≈ 3.7 m)
        assert_eq!(detect("box b 140 0 3.95 1 1 0.5 0").obstacles.len(), 1);
    }

    #[test]
    fn lateral_sign_is_left_positive() {
        let a = 4f64.to_radians();
        let r = detect(&format!("box b {} {} 0.7 0.01 1 2 0", 50.0 * a.cos(), 50.0 * a.sin()));
        assert!(r.obstacles[0].lateral_m > 3.0);
    }

    #[test]
    fn encode_sixteen_slots() {
        let mut r = detect("box a 20 0 0.7 1 1 2 0\nbox b 40 1 0.7 1 1 2 0");
        r.sequence = 300;
        let frames = idis_sim_encode(&r).unwrap();
        assert_eq!(frames.len(), 16);
        let slots: Vec<IdisSlot> = frames.iter().map(|f| idis_parse_frame(f).unwrap().unwrap()).collect();
        assert!(slots[0].valid && slots[1].valid && !slots[2].valid);
        assert!(slots.iter().all(|s| s.sequence == 44));
        assert!((slots[0].range_m - 19.5).abs() < 0.006);
    }
}
