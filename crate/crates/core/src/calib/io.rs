use std::fmt::Write as _;

use super::{CalibError, CalibrationResult, CameraIntrinsics, Correspondence, Vec2, Vec3};

fn numbers(s: &str, line: usize) -> Result<Vec<f64>, CalibError> {
    s.split(',')
        .map(|f| {
            let f = f.trim();
            f.parse::<f64>().map_err(|_| CalibError::Parse {
                line,
                reason: format!("not a number: '{f}'"),
            })
        })
        .collect()
}

/// Reads `u,v,X,Y,Z` rows; blank lines and `#` comments are skipped.
pub fn parse_correspondences(text: &str) -> Result<Vec<Correspondence>, CalibError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v = numbers(body, line)?;
        if v.len() != 5 {
            return Err(CalibError::Parse {
                line,
                reason: format!("expected 5 fields u,v,X,Y,Z, got {}", v.len()),
            });
        }
        let c = Correspondence::new(Vec2::new(v[0], v[1]), Vec3::new(v[2], v[3], v[4])).map_err(
            |e| CalibError::Parse {
                line,
                reason: e.to_string(),
            },
        )?;
        out.push(c);
    }
    Ok(out)
}

/// `fx,fy,cx,cy[,k1,k2]`
pub fn parse_intrinsics(s: &str) -> Result<CameraIntrinsics, CalibError> {
    let v = numbers(s, 1).map_err(|e| CalibError::InvalidIntrinsics(e.to_string()))?;
    match v.len() {
        4 => CameraIntrinsics::new(v[0], v[1], v[2], v[3]),
        6 => CameraIntrinsics::with_distortion(v[0], v[1], v[2], v[3], v[4], v[5]),
        n => Err(CalibError::InvalidIntrinsics(format!(
            "expected fx,fy,cx,cy[,k1,k2], got {n} values"
        ))),
    }
}

pub fn format_report(r: &CalibrationResult, total: usize) -> String {
    let q = r.transform.quaternion_wxyz();
    let t = r.transform.translation();
    let mut s = String::new();
    let _ = writeln!(s, "quaternion (w,x,y,z): {:.9} {:.9} {:.9} {:.9}", q[0], q[1], q[2], q[3]);
    let _ = writeln!(s, "translation (m): {:.9} {:.9} {:.9}", t.x, t.y, t.z);
    let _ = writeln!(s, "inliers: {}/{}", r.inliers.len(), total);
    let _ = writeln!(s, "mean reprojection error (px): {:.6}", r.mean_error_px);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::RigidTransform;

    #[test]
    fn csv_with_comments() {
        let text = "# u,v,X,Y,Z\n\n320, 240, 1, 2, 3\n100,50,0,0,5 # trailing\n";
        let c = parse_correspondences(text).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].point, Vec3::new(0.0, 0.0, 5.0));
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        assert_eq!(
            parse_correspondences("1,2,3,4,5\n1,2,3\n"),
            Err(CalibError::Parse {
                line: 2,
                reason: "expected 5 fields u,v,X,Y,Z, got 3".into()
            })
        );
        assert!(matches!(
            parse_correspondences("\n\n1,x,3,4,5"),
            Err(CalibError::Parse { line: 3, .. })
        ));
        assert!(parse_correspondences("1,2,3,4,inf").is_err());
    }

    #[test]
    fn intrinsics_string() {
        let k = parse_intrinsics("500,500,320,240").unwrap();
        assert_eq!((k.fx, k.k1), (500.0, 0.0));
        let k = parse_intrinsics("500, 510, 320, 240, -0.1, 0.01").unwrap();
        assert_eq!((k.fy, k.k1, k.k2), (510.0, -0.1, 0.01));
        assert!(parse_intrinsics("500,500,320").is_err());
        assert!(parse_intrinsics("0,500,320,240").is_err());
    }

    #[test]
    fn report_lines() {
        let r = CalibrationResult {
            transform: RigidTransform::identity(),
            inliers: vec![0, 1, 2],
            mean_error_px: 0.25,
        };
        let s = format_report(&r, 4);
        assert!(s.contains("quaternion (w,x,y,z): 1.000000000 0.000000000"));
        assert!(s.contains("inliers: 3/4"));
        assert!(s.contains("mean reprojection error (px): 0.250000"));
    }
}
