//! Bus payload layouts, little-endian.
//!
//! ObstacleReport: `[u8 count][count × (f32 range, f32 lateral, f32 width)][u32 sequence]`
//! LaserScan: `[f32 start][f32 step][u16 n][n × f32 range]`

use super::{LaserScan, Obstacle, ObstacleReport, SensorError};

pub const PAYLOAD_OBSTACLE_REPORT: u8 = 1;
pub const PAYLOAD_LASER_SCAN: u8 = 2;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], SensorError> {
        let end = self.pos + N;
        let s = self.buf.get(self.pos..end).ok_or_else(|| {
            SensorError::Payload(format!("truncated at byte {} (have {})", self.pos, self.buf.len()))
        })?;
        self.pos = end;
        Ok(s.try_into().expect("slice length"))
    }

    fn f32(&mut self) -> Result<f32, SensorError> {
        Ok(f32::from_le_bytes(self.take()?))
    }

    fn finish(&self) -> Result<(), SensorError> {
        if self.pos != self.buf.len() {
            return Err(SensorError::Payload(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn encode_obstacle_report(r: &ObstacleReport) -> Result<Vec<u8>, SensorError> {
    let count = u8::try_from(r.obstacles.len())
        .map_err(|_| SensorError::Invalid(format!("{} obstacles", r.obstacles.len())))?;
    let mut out = Vec::with_capacity(5 + 12 * r.obstacles.len());
    out.push(count);
    for o in &r.obstacles {
        out.extend_from_slice(&o.range_m.to_le_bytes());
        out.extend_from_slice(&o.lateral_m.to_le_bytes());
        out.extend_from_slice(&o.width_m.to_le_bytes());
    }
    out.extend_from_slice(&r.sequence.to_le_bytes());
    Ok(out)
}

pub fn decode_obstacle_report(buf: &[u8]) -> Result<ObstacleReport, SensorError> {
    let mut c = Cursor { buf, pos: 0 };
    let [count] = c.take::<1>()?;
    let mut obstacles = Vec::with_capacity(count as usize);
    for _ in 0..count {
        obstacles.push(Obstacle {
            range_m: c.f32()?,
            lateral_m: c.f32()?,
            width_m: c.f32()?,
        });
    }
    let sequence = u32::from_le_bytes(c.take()?);
    c.finish()?;
    Ok(ObstacleReport {
        obstacles,
        sequence,
    })
}

pub fn encode_laser_scan(s: &LaserScan) -> Result<Vec<u8>, SensorError> {
    let n = u16::try_from(s.ranges_m.len())
        .map_err(|_| SensorError::Invalid(format!("{} beams", s.ranges_m.len())))?;
    let mut out = Vec::with_capacity(10 + 4 * s.ranges_m.len());
    out.extend_from_slice(&s.start_angle_rad.to_le_bytes());
    out.extend_from_slice(&s.angle_step_rad.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    for r in &s.ranges_m {
        out.extend_from_slice(&r.to_le_bytes());
    }
    Ok(out)
}

/// The payload does not carry the scanner's maximum range, so the caller
/// supplies it.
pub fn decode_laser_scan(buf: &[u8], max_range_m: f32) -> Result<LaserScan, SensorError> {
    let mut c = Cursor { buf, pos: 0 };
    let start = c.f32()?;
    let step = c.f32()?;
    let n = u16::from_le_bytes(c.take()?);
    let ranges = (0..n).map(|_| c.f32()).collect::<Result<Vec<_>, _>>()?;
    c.finish()?;
    LaserScan::new(start, step, ranges, max_range_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn obstacle_layout_is_bit_exact() {
        let r = ObstacleReport {
            obstacles: vec![Obstacle {
                range_m: 1.0,
                lateral_m: -2.0,
                width_m: 0.5,
            }],
            sequence: 7,
        };
        let b = encode_obstacle_report(&r).unwrap();
        assert_eq!(
            b,
            [
                1, 0, 0, 0x80, 0x3f, 0, 0, 0, 0xc0, 0, 0, 0, 0x3f, 7, 0, 0, 0
            ]
        );
        assert_eq!(decode_obstacle_report(&b).unwrap(), r);
    }

    #[test]
    fn scan_layout_is_bit_exact() {
        let s = LaserScan::new(0.0, 1.0, vec![2.0], 80.0).unwrap();
        let b = encode_laser_scan(&s).unwrap();
        assert_eq!(b, [0, 0, 0, 0, 0, 0, 0x80, 0x3f, 1, 0, 0, 0, 0, 0x40]);
        assert_eq!(decode_laser_scan(&b, 80.0).unwrap(), s);
    }

    #[test]
    fn truncated_and_trailing_rejected() {
        assert!(decode_obstacle_report(&[1, 0, 0]).is_err());
        assert!(decode_obstacle_report(&[0, 0, 0, 0, 0, 9]).is_err());
        assert!(decode_laser_scan(&[0; 9], 10.0).is_err());
    }

    proptest! {
        #[test]
        fn obstacle_round_trip(
            obs in prop::collection::vec((3.0f32..150.0, -20.0f32..20.0, 0.0f32..5.0), 0..=16),
            seq in any::<u32>(),
        ) {
            let r = ObstacleReport {
                obstacles: obs.into_iter().map(|(range_m, lateral_m, width_m)| Obstacle { range_m, lateral_m, width_m }).collect(),
                sequence: seq,
            };
            prop_assert_eq!(decode_obstacle_report(&encode_obstacle_report(&r).unwrap()).unwrap(), r);
        }

        #[test]
        fn scan_round_trip(
            start in -3.2f32..3.2, step in 0.001f32..0.1,
            ranges in prop::collection::vec(0.01f32..=80.0, 0..400),
        ) {
            let s = LaserScan::new(start, step, ranges, 80.0).unwrap();
            prop_assert_eq!(decode_laser_scan(&encode_laser_scan(&s).unwrap(), 80.0).unwrap(), s);
        }
    }
}
