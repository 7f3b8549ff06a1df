//! Line-based scene language. One directive per line, `#` comments,
//! angles in degrees, lengths in meters:
//!
//! ```text
//! box NAME CX CY CZ SX SY SZ YAW
//! scanner NAME X Y Z YAW FOV BEAMS MAX_RANGE
//! idis NAME X Y Z YAW [HFOV VFOV MIN MAX]
//! camera NAME X Y Z YAW FX FY CX CY WIDTH HEIGHT
//! landmark NAME X Y Z
//! vehicle NAME X Y YAW SPEED WHEELBASE
//! ```

use std::collections::HashSet;

use crate::calib::{CameraIntrinsics, Vec3};

use super::SimError;

/// The scene used by `simulate` when no file is given.
pub const REFERENCE_SCENE: &str = "\
# reference scene: a street corridor
box wall_left 20 8 1 40 0.5 3 0
box wall_right 20 -8 1 40 0.5 3 0
box car 25 -2 0.75 4.5 1.8 1.5 0
box truck 60 2.5 1.5 8 2.5 3 5
box post 12 4 1 0.3 0.3 2 0
scanner front 0 0 0.5 0 180 181 80
scanner left 0 1 0.5 90 180 181 80
scanner right 0 -1 0.5 -90 180 181 80
idis radar 0 0 0.7 0
camera cam 0 0 1.2 0 800 800 640 360 1280 720
landmark l1 12 4 1.8
landmark l2 25 -2 1.5
landmark l3 60 2.5 2.5
landmark l4 20 7.7 2.0
landmark l5 20 -7.7 0.5
vehicle ego 0 0 0 5 2.7
";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Radians, counter-clockwise from +x.
    pub yaw: f64,
}

impl Pose {
    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxObstacle {
    pub name: String,
    pub center: Vec3,
    pub size: Vec3,
    pub yaw: f64,
}

impl BoxObstacle {
    /// Footprint corners, counter-clockwise.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hx, hy) = (self.size.x / 2.0, self.size.y / 2.0);
        [(hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy)]
            .map(|(a, b)| (self.center.x + c * a - s * b, self.center.y + s * a + c * b))
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.center.z - self.size.z / 2.0, self.center.z + self.size.z / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScannerModel {
    pub name: String,
    pub pose: Pose,
    pub fov_rad: f64,
    pub beam_count: usize,
    pub max_range_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdisModel {
    pub name: String,
    pub pose: Pose,
    pub hfov_rad: f64,
    pub vfov_rad: f64,
    pub min_range_m: f64,
    pub max_range_m: f64,
}

impl IdisModel {
    pub fn new(name: &str, pose: Pose) -> Self {
        IdisModel {
            name: name.to_string(),
            pose,
            hfov_rad: 12f64.to_radians(),
            vfov_rad: 3f64.to_radians(),
            min_range_m: 3.0,
            max_range_m: 150.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub name: String,
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub name: String,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleModel {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
    pub wheelbase: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub boxes: Vec<BoxObstacle>,
    pub scanners: Vec<ScannerModel>,
    pub idis_sensors: Vec<IdisModel>,
    pub cameras: Vec<CameraModel>,
    pub landmarks: Vec<Landmark>,
    pub vehicle: Option<VehicleModel>,
}

struct Line<'a> {
    no: usize,
    fields: Vec<&'a str>,
}

impl Line<'_> {
    fn err(&self, reason: impl Into<String>) -> SimError {
        SimError::Parse {
            line: self.no,
            reason: reason.into(),
        }
    }

    fn arity(&self, allowed: &[usize]) -> Result<(), SimError> {
        let n = self.fields.len() - 1;
        if allowed.contains(&n) {
            return Ok(());
        }
        let want: Vec<String> = allowed.iter().map(|a| a.to_string()).collect();
        Err(self.err(format!(
            "'{}' takes {} arguments, got {n}",
            self.fields[0],
            want.join(" or ")
        )))
    }

    fn num(&self, i: usize) -> Result<f64, SimError> {
        let f = self.fields[i];
        match f.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(format!("field {i} ('{f}') is not a finite number"))),
        }
    }

    fn positive(&self, i: usize) -> Result<f64, SimError> {
        let v = self.num(i)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(format!("field {i} must be > 0, got {v}")))
        }
    }

    fn count(&self, i: usize) -> Result<usize, SimError> {
        let f = self.fields[i];
        f.parse::<usize>()
            .map_err(|_| self.err(format!("field {i} ('{f}') is not a count")))
    }

    fn pose(&self, z: bool) -> Result<Pose, SimError> {
        Ok(if z {
            Pose {
                x: self.num(2)?,
                y: self.num(3)?,
                z: self.num(4)?,
                yaw: self.num(5)?.to_radians(),
            }
        } else {
            Pose {
                x: self.num(2)?,
                y: self.num(3)?,
                z: 0.0,
                yaw: self.num(4)?.to_radians(),
            }
        })
    }
}

pub fn parse_scene(text: &str) -> Result<Scene, SimError> {
    let mut scene = Scene::default();
    let mut names: HashSet<(String, String)> = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let l = Line { no: i + 1, fields };
        let kind = l.fields[0];
        if l.fields.len() < 2 {
            return Err(l.err(format!("'{kind}' needs a name")));
        }
        let name = l.fields[1].to_string();
        match kind {
            "box" => {
                l.arity(&[8])?;
                scene.boxes.push(BoxObstacle {
                    name: name.clone(),
                    center: Vec3::new(l.num(2)?, l.num(3)?, l.num(4)?),
                    size: Vec3::new(l.positive(5)?, l.positive(6)?, l.positive(7)?),
                    yaw: l.num(8)?.to_radians(),
                });
            }
            "scanner" => {
                l.arity(&[8])?;
                let fov = l.positive(6)?.to_radians();
                if fov > std::f64::consts::TAU + 1e-12 {
                    return Err(l.err("field of view exceeds 360 degrees"));
                }
                let beams = l.count(7)?;
                if beams < 2 {
                    return Err(l.err("a scanner needs at least 2 beams"));
                }
                scene.scanners.push(ScannerModel {
                    name: name.clone(),
                    pose: l.pose(true)?,
                    fov_rad: fov,
                    beam_count: beams,
                    max_range_m: l.positive(8)?,
                });
            }
            "idis" => {
                l.arity(&[5, 9])?;
                let mut m = IdisModel::new(&name, l.pose(true)?);
                if l.fields.len() == 10 {
                    m.hfov_rad = l.positive(6)?.to_radians();
                    m.vfov_rad = l.positive(7)?.to_radians();
                    m.min_range_m = l.num(8)?;
                    m.max_range_m = l.num(9)?;
                    if !(0.0 <= m.min_range_m && m.min_range_m < m.max_range_m) {
                        return Err(l.err("need 0 <= MIN < MAX"));
                    }
                }
                scene.idis_sensors.push(m);
            }
            "camera" => {
                l.arity(&[11])?;
                let k = CameraIntrinsics::new(l.num(6)?, l.num(7)?, l.num(8)?, l.num(9)?)
                    .map_err(|e| l.err(e.to_string()))?;
                let (w, h) = (l.count(10)?, l.count(11)?);
                if w == 0 || h == 0 || w > u32::MAX as usize || h > u32::MAX as usize {
                    return Err(l.err("image size must be positive"));
                }
                scene.cameras.push(CameraModel {
                    name: name.clone(),
                    pose: l.pose(true)?,
                    intrinsics: k,
                    width: w as u32,
                    height: h as u32,
                });
            }
            "landmark" => {
                l.arity(&[4])?;
                scene.landmarks.push(Landmark {
                    name: name.clone(),
                    position: Vec3::new(l.num(2)?, l.num(3)?, l.num(4)?),
                });
            }
            "vehicle" => {
                l.arity(&[6])?;
                if scene.vehicle.is_some() {
                    return Err(l.err("only one vehicle is supported"));
                }
                let p = l.pose(false)?;
                scene.vehicle = Some(VehicleModel {
                    name: name.clone(),
                    x: p.x,
                    y: p.y,
                    yaw: p.yaw,
                    speed: l.num(5)?,
                    wheelbase: l.positive(6)?,
                });
            }
            other => return Err(l.err(format!("unknown directive '{other}'"))),
        }
        if !names.insert((kind.to_string(), name.clone())) {
            return Err(l.err(format!("duplicate {kind} name '{name}'")));
        }
    }
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_directive() {
        let s = parse_scene("box b1 10 0 1 1 12 2 0").unwrap();
        assert_eq!(
            s.boxes,
            vec![BoxObstacle {
                name: "b1".into(),
                center: Vec3::new(10.0, 0.0, 1.0),
                size: Vec3::new(1.0, 12.0, 2.0),
                yaw: 0.0
            }]
        );
    }

    #[test]
    fn empty_and_comments() {
        assert_eq!(parse_scene("").unwrap(), Scene::default());
        assert_eq!(parse_scene("# nothing\n\n   # here\n").unwrap(), Scene::default());
    }

    #[test]
    fn scanner_directive() {
        let s = parse_scene("scanner s1 0 0 0.5 0 180 181 80").unwrap();
        let sc = &s.scanners[0];
        assert_eq!(sc.beam_count, 181);
        assert!((sc.fov_rad - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(sc.max_range_m, 80.0);
        assert_eq!(sc.pose.position(), Vec3::new(0.0, 0.0, 0.5));
    }

    #[test]
    fn idis_defaults_and_overrides() {
        let s = parse_scene("idis a 0 0 0 0\nidis b 0 0 0 0 20 4 1 200").unwrap();
        assert!((s.idis_sensors[0].hfov_rad - 12f64.to_radians()).abs() < 1e-15);
        assert_eq!(s.idis_sensors[0].max_range_m, 150.0);
        assert_eq!(s.idis_sensors[1].min_range_m, 1.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("\nbox b 1 2 3", 2),
            ("landmark a 1 2 x", 1),
            ("\n\n\nteleport x 1", 4),
            ("landmark a 1 2 3\nlandmark a 4 5 6", 2),
            ("box b 0 0 0 0 1 1 0", 1),
            ("scanner s 0 0 0 0 90 1 10", 1),
        ];
        for (text, line) in cases {
            match parse_scene(text) {
                Err(SimError::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn same_name_different_kind_is_fine() {
        assert!(parse_scene("box a 5 0 0 1 1 1 0\nlandmark a 1 2 3").is_ok());
    }

    #[test]
    fn reference_scene_parses() {
        let s = parse_scene(REFERENCE_SCENE).unwrap();
        assert_eq!(s.scanners.len(), 3);
        assert_eq!(s.cameras.len(), 1);
        assert!(s.vehicle.is_some());
    }
}
