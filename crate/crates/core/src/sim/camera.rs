use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

use crate::calib::{Correspondence, RigidTransform, Vec2};

use super::{CameraModel, Scene, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkProjection {
    pub name: String,
    /// `None` when the landmark is not in front of the camera.
    pub pixel: Option<Vec2>,
    pub in_frame: bool,
}

/// World → camera frame (x right, y down, z along the heading).
pub fn camera_from_world(cam: &CameraModel) -> RigidTransform {
    let (s, c) = cam.pose.yaw.sin_cos();
    // rows are the camera axes expressed in world coordinates
    let m = Matrix3::new(s, -c, 0.0, 0.0, 0.0, -1.0, c, s, 0.0);
    let r = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    RigidTransform::new(r, -(r * cam.pose.position()))
}

pub fn project_landmarks(scene: &Scene, cam: &CameraModel) -> Vec<LandmarkProjection> {
    let t = camera_from_world(cam);
    scene
        .landmarks
        .iter()
        .map(|l| {
            let pixel = cam.intrinsics.project(&t.apply(&l.position)).ok();
            let in_frame = pixel.is_some_and(|p| {
                p.x >= 0.0 && p.y >= 0.0 && p.x < f64::from(cam.width) && p.y < f64::from(cam.height)
            });
            LandmarkProjection {
                name: l.name.clone(),
                pixel,
                in_frame,
            }
        })
        .collect()
}

/// Pixel/point pairs for extrinsic calibration: each in-frame landmark's
/// projection, paired with its position in a rangefinder frame related to
/// the camera by `camera_from_rangefinder`.
pub fn synthesize_correspondences(
    scene: &Scene,
    cam: &CameraModel,
    camera_from_rangefinder: &RigidTransform,
) -> Result<Vec<Correspondence>, SimError> {
    let to_cam = camera_from_world(cam);
    let to_rf = camera_from_rangefinder.inverse();
    let mut out = Vec::new();
    for (l, p) in scene.landmarks.iter().zip(project_landmarks(scene, cam)) {
        if let (true, Some(px)) = (p.in_frame, p.pixel) {
            out.push(Correspondence::new(px, to_rf.apply(&to_cam.apply(&l.position)))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::Vec3;
    use crate::sim::parse_scene;

    const CAM: &str = "camera c 1 2 1.5 30 500 500 320 240 640 480";

    #[test]
    fn axis_landmark_hits_principal_point() {
        let a = 30f64.to_radians();
        let s = parse_scene(&format!(
            "{CAM}\nlandmark l {} {} 1.5",
            1.0 + 7.0 * a.cos(),
            2.0 + 7.0 * a.sin()
        ))
        .unwrap();
        let p = project_landmarks(&s, &s.cameras[0]);
        assert!((p[0].pixel.unwrap() - Vec2::new(320.0, 240.0)).norm() < 1e-9);
        assert!(p[0].in_frame);
    }

    #[test]
    fn behind_and_outside() {
        let s = parse_scene(&format!("{CAM}\nlandmark back -5 2 1.5\nlandmark wide 3 40 1.5")).unwrap();
        let p = project_landmarks(&s, &s.cameras[0]);
        assert_eq!(p[0].pixel, None);
        assert!(!p[0].in_frame);
        assert!(p[1].pixel.is_some() && !p[1].in_frame);
    }

    #[test]
    fn pinhole_in_camera_frame() {
        // yaw 0: camera x right = world -y, camera z = world x
        let s = parse_scene("camera c 0 0 0 0 500 500 320 240 640 480\nlandmark l 5 -1 0").unwrap();
        let p = project_landmarks(&s, &s.cameras[0]);
        assert!((p[0].pixel.unwrap() - Vec2::new(420.0, 240.0)).norm() < 1e-12);
        let up = parse_scene("camera c 0 0 0 0 500 500 320 240 640 480\nlandmark l 5 0 1").unwrap();
        assert!(project_landmarks(&up, &up.cameras[0])[0].pixel.unwrap().y < 240.0);
    }

    #[test]
    fn backprojection_recovers_direction() {
        let s = parse_scene(&format!("{CAM}\nlandmark a 9 5 0.3\nlandmark b 6 -1 3\nlandmark c 12 9 1")).unwrap();
        let cam = &s.cameras[0];
        let t = camera_from_world(cam);
        for (l, p) in s.landmarks.iter().zip(project_landmarks(&s, cam)) {
            let ray = cam.intrinsics.backproject(&p.pixel.unwrap()).unwrap();
            let want = t.apply(&l.position).normalize();
            assert!((ray - want).norm() <= 1e-9);
        }
    }

    #[test]
    fn correspondences_map_back() {
        let s = parse_scene(&format!("{CAM}\nlandmark a 9 5 0.3\nlandmark back -9 2 1")).unwrap();
        let rf = RigidTransform::from_axis_angle(&Vec3::new(1.0, 1.0, 0.0), 0.3, Vec3::new(0.1, 0.2, 0.3));
        let c = synthesize_correspondences(&s, &s.cameras[0], &rf).unwrap();
        assert_eq!(c.len(), 1);
        let px = s.cameras[0].intrinsics.project(&rf.apply(&c[0].point)).unwrap();
        assert!((px - c[0].pixel).norm() < 1e-9);
    }
}
