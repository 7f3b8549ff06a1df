use super::{SimError, VehicleModel};

/// Planar kinematic bicycle state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
    pub wheelbase: f64,
}

impl From<&VehicleModel> for VehicleState {
    fn from(v: &VehicleModel) -> Self {
        VehicleState {
            x: v.x,
            y: v.y,
            yaw: v.yaw,
            speed: v.speed,
            wheelbase: v.wheelbase,
        }
    }
}

pub fn step_vehicle(s: &VehicleState, steer_rad: f64, dt_s: f64) -> Result<VehicleState, SimError> {
    if !(dt_s > 0.0) {
        return Err(SimError::Invalid(format!("dt must be > 0, got {dt_s}")));
    }
    if !(s.wheelbase > 0.0) {
        return Err(SimError::Invalid("wheelbase must be > 0".into()));
    }
    if !(steer_rad.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(SimError::Invalid(format!("steering angle {steer_rad} rad")));
    }
    let (sin, cos) = s.yaw.sin_cos();
    Ok(VehicleState {
        x: s.x + s.speed * cos * dt_s,
        y: s.y + s.speed * sin * dt_s,
        yaw: s.yaw + s.speed / s.wheelbase * steer_rad.tan() * dt_s,
        ..*s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(speed: f64) -> VehicleState {
        VehicleState {
            x: 0.0,
            y: 0.0,
            yaw: 0.0,
            speed,
            wheelbase: 2.7,
        }
    }

    #[test]
    fn straight_line() {
        let s = step_vehicle(&car(10.0), 0.0, 1.0).unwrap();
        assert_eq!((s.x, s.y, s.yaw), (10.0, 0.0, 0.0));
    }

    #[test]
    fn standing_still() {
        assert_eq!(step_vehicle(&car(0.0), 0.3, 0.5).unwrap(), car(0.0));
    }

    #[test]
    fn turning_circle_radius() {
        let steer = 0.2f64;
        let want = 2.7 / steer.tan();
        let mut s = car(5.0);
        let (mut minx, mut maxx, mut miny, mut maxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..200_000 {
            s = step_vehicle(&s, steer, 1e-4).unwrap();
            minx = minx.min(s.x);
            maxx = maxx.max(s.x);
            miny = miny.min(s.y);
            maxy = maxy.max(s.y);
        }
        let r_est = ((maxx - minx) / 2.0 + (maxy - miny) / 2.0) / 2.0;
        assert!((r_est - want).abs() / want < 0.01, "{r_est} vs {want}");
    }

    #[test]
    fn bad_inputs() {
        assert!(step_vehicle(&car(1.0), 1.6, 0.1).is_err());
        assert!(step_vehicle(&car(1.0), 0.0, 0.0).is_err());
        assert!(step_vehicle(&VehicleState { wheelbase: 0.0, ..car(1.0) }, 0.0, 0.1).is_err());
    }
}
