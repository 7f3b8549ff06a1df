use nalgebra::{Quaternion, Rotation3, Unit, UnitQuaternion};

use super::Vec3;

/// Rotation (unit quaternion, `w >= 0`) followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vec3,
}

fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        RigidTransform {
            rotation: canonical(rotation),
            translation,
        }
    }

    /// From raw quaternion components; normalizes them.
    pub fn from_wxyz(wxyz: [f64; 4], translation: Vec3) -> Self {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Self::new(UnitQuaternion::from_quaternion(q), translation)
    }

    pub fn from_axis_angle(axis: &Vec3, angle_rad: f64, translation: Vec3) -> Self {
        Self::new(
            UnitQuaternion::from_axis_angle(&Unit::new_normalize(*axis), angle_rad),
            translation,
        )
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Rotation3<f64> {
        self.rotation.to_rotation_matrix()
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self::new(inv, -(inv * self.translation))
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    /// Angle of the relative rotation between the two transforms.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    /// Distance between quaternions, insensitive to the sign ambiguity.
    pub fn quaternion_distance(&self, other: &RigidTransform) -> f64 {
        let a = self.rotation.quaternion().coords;
        let b = other.rotation.quaternion().coords;
        (a - b).norm().min((a + b).norm())
    }
}
