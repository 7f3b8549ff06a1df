use super::{CalibError, Vec2, Vec3};

const MAX_UNDISTORT_ITERS: usize = 20;
const UNDISTORT_STEP_TOL: f64 = 1e-12;

/// Pinhole intrinsics with two-term radial distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, CalibError> {
        Self::with_distortion(fx, fy, cx, cy, 0.0, 0.0)
    }

    pub fn with_distortion(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        k1: f64,
        k2: f64,
    ) -> Result<Self, CalibError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(CalibError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if ![cx, cy, k1, k2, fx, fy].iter().all(|v| v.is_finite()) {
            return Err(CalibError::InvalidIntrinsics("non-finite value".into()));
        }
        Ok(CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            k1,
            k2,
        })
    }

    fn distortion(&self, r2: f64) -> f64 {
        1.0 + self.k1 * r2 + self.k2 * r2 * r2
    }

    /// Projects a camera-frame point (x right, y down, z forward) to pixels.
    pub fn project(&self, p: &Vec3) -> Result<Vec2, CalibError> {
        if !(p.z > 0.0) {
            return Err(CalibError::BehindCamera(p.z));
        }
        let x = p.x / p.z;
        let y = p.y / p.z;
        let d = self.distortion(x * x + y * y);
        Ok(Vec2::new(self.fx * d * x + self.cx, self.fy * d * y + self.cy))
    }

    /// Unit ray through `pixel`. Distortion is undone by fixed-point
    /// iteration on the normalized coordinates.
    pub fn backproject(&self, pixel: &Vec2) -> Result<Vec3, CalibError> {
        let xd = (pixel.x - self.cx) / self.fx;
        let yd = (pixel.y - self.cy) / self.fy;
        let (mut x, mut y) = (xd, yd);
        if self.k1 != 0.0 || self.k2 != 0.0 {
            let mut converged = false;
            for _ in 0..MAX_UNDISTORT_ITERS {
                let d = self.distortion(x * x + y * y);
                let (nx, ny) = (xd / d, yd / d);
                let step = (nx - x).abs().max((ny - y).abs());
                x = nx;
                y = ny;
                if !(x.is_finite() && y.is_finite()) {
                    break;
                }
                if step <= UNDISTORT_STEP_TOL * (1.0 + x.abs().max(y.abs())) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(CalibError::NoConvergence);
            }
        }
        Ok(Vec3::new(x, y, 1.0).normalize())
    }
}

pub fn project(k: &CameraIntrinsics, p: &Vec3) -> Result<Vec2, CalibError> {
    k.project(p)
}

pub fn backproject(k: &CameraIntrinsics, pixel: &Vec2) -> Result<Vec3, CalibError> {
    k.backproject(pixel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap()
    }

    #[test]
    fn axis_point_hits_principal_point() {
        assert_eq!(k().project(&Vec3::new(0.0, 0.0, 5.0)).unwrap(), Vec2::new(320.0, 240.0));
    }

    #[test]
    fn pinhole_arithmetic() {
        assert_eq!(k().project(&Vec3::new(1.0, 0.0, 5.0)).unwrap(), Vec2::new(420.0, 240.0));
    }

    #[test]
    fn backproject_inverts() {
        let ray = k().backproject(&Vec2::new(420.0, 240.0)).unwrap();
        let want = Vec3::new(0.2, 0.0, 1.0).normalize();
        assert!((ray - want).norm() < 1e-15);
    }

    #[test]
    fn behind_camera_is_a_domain_error() {
        assert!(matches!(
            k().project(&Vec3::new(0.0, 0.0, 0.0)),
            Err(CalibError::BehindCamera(_))
        ));
        assert!(k().project(&Vec3::new(0.0, 0.0, -1.0)).is_err());
    }

    #[test]
    fn rejects_bad_focal_length() {
        assert!(CameraIntrinsics::new(0.0, 500.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(500.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn divergent_undistortion_reported() {
        let k = CameraIntrinsics::with_distortion(100.0, 100.0, 0.0, 0.0, -5.0, 0.0).unwrap();
        assert_eq!(
            k.backproject(&Vec2::new(300.0, 300.0)),
            Err(CalibError::NoConvergence)
        );
    }

    #[test]
    fn distorted_round_trip_example() {
        let k = CameraIntrinsics::with_distortion(500.0, 500.0, 320.0, 240.0, -0.1, 0.0).unwrap();
        let p = Vec3::new(0.7, -0.4, 2.0);
        let ray = k.backproject(&k.project(&p).unwrap()).unwrap();
        assert!((ray - p.normalize()).norm() < 1e-9);
    }

    proptest! {
        #[test]
        fn project_backproject_are_inverse(
            x in -1.5f64..1.5, y in -1.0f64..1.0, z in 0.5f64..50.0,
            k1 in -0.1f64..0.1, k2 in -0.02f64..0.02,
        ) {
            let p = Vec3::new(x * z * 0.5, y * z * 0.5, z);
            for k in [
                CameraIntrinsics::new(600.0, 580.0, 330.0, 250.0).unwrap(),
                CameraIntrinsics::with_distortion(600.0, 580.0, 330.0, 250.0, k1, k2).unwrap(),
            ] {
                let ray = k.backproject(&k.project(&p).unwrap()).unwrap();
                prop_assert!((ray - p.normalize()).norm() <= 1e-9);
            }
        }
    }
}
