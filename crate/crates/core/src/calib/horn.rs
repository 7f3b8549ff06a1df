//! Closed-form absolute orientation with unit quaternions.

use nalgebra::{Matrix3, Matrix4, Quaternion, SymmetricEigen, UnitQuaternion};

use super::{CalibError, RigidTransform, Vec3};

/// Relative size of the second scatter eigenvalue below which the point
/// set is considered collinear.
const COLLINEAR_TOL: f64 = 1e-12;

fn centroid(pts: &[Vec3]) -> Vec3 {
    pts.iter().fold(Vec3::zeros(), |a, p| a + p) / pts.len() as f64
}

/// Least-squares rigid transform `T` with `T(p[i]) ≈ q[i]`.
pub fn horn_align(p: &[Vec3], q: &[Vec3]) -> Result<RigidTransform, CalibError> {
    if p.len() != q.len() {
        return Err(CalibError::Mismatch(p.len(), q.len()));
    }
    if p.len() < 3 {
        return Err(CalibError::TooFew {
            needed: 3,
            got: p.len(),
        });
    }
    let (cp, cq) = (centroid(p), centroid(q));

    let mut scatter = Matrix3::zeros();
    let mut m = Matrix3::zeros();
    for (a, b) in p.iter().zip(q) {
        let (a, b) = (a - cp, b - cq);
        scatter += a * a.transpose();
        m += a * b.transpose();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(scatter).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    if !(ev[0] > 0.0) || ev[1] <= COLLINEAR_TOL * ev[0] {
        return Err(CalibError::Degenerate("source points are collinear".into()));
    }

    let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    #[rustfmt::skip]
    let n = Matrix4::new(
        sxx + syy + szz, syz - szy,       szx - sxz,       sxy - syx,
        syz - szy,       sxx - syy - szz, sxy + syx,       szx + sxz,
        szx - sxz,       sxy + syx,       -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,       syz + szy,       -sxx - syy + szz,
    );
    let eig = SymmetricEigen::new(n);
    let best = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(best);
    let rot = UnitQuaternion::from_quaternion(Quaternion::new(v[0], v[1], v[2], v[3]));
    let t = cq - rot * cp;
    Ok(RigidTransform::new(rot, t))
}
