use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::horn::horn_align;
use super::p3p::p3p_depths;
use super::{CalibError, CameraIntrinsics, RigidTransform, Vec2, Vec3};

/// Smallest rangefinder triangle area (m²) accepted as a sample.
const MIN_SAMPLE_AREA: f64 = 1e-9;
/// Confidence used by adaptive termination.
const ADAPTIVE_CONFIDENCE: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub pixel: Vec2,
    /// Rangefinder frame, meters.
    pub point: Vec3,
}

impl Correspondence {
    pub fn new(pixel: Vec2, point: Vec3) -> Result<Self, CalibError> {
        if !(pixel.iter().chain(point.iter()).all(|v| v.is_finite())) {
            return Err(CalibError::InvalidParams("non-finite correspondence".into()));
        }
        Ok(Correspondence { pixel, point })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub iterations: usize,
    pub threshold_px: f64,
    pub seed: u64,
    pub min_inliers: usize,
    /// Stop early once the inlier ratio makes further samples pointless.
    pub adaptive: bool,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            iterations: 500,
            threshold_px: 2.0,
            seed: 0,
            min_inliers: 6,
            adaptive: false,
        }
    }
}

impl RansacParams {
    fn validate(&self) -> Result<(), CalibError> {
        if self.iterations == 0 {
            return Err(CalibError::InvalidParams("iterations must be >= 1".into()));
        }
        if !(self.threshold_px > 0.0 && self.threshold_px.is_finite()) {
            return Err(CalibError::InvalidParams("threshold must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    /// Maps rangefinder-frame points into the camera frame.
    pub transform: RigidTransform,
    /// Indices into the input correspondences, ascending.
    pub inliers: Vec<usize>,
    pub mean_error_px: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reprojection {
    /// `None` when the point is not in front of the camera.
    pub pixel: Option<Vec2>,
    pub depth_m: f64,
    pub visible: bool,
}

/// Maps rangefinder points through `t` onto the image.
pub fn reproject_cloud(t: &RigidTransform, k: &CameraIntrinsics, points: &[Vec3]) -> Vec<Reprojection> {
    points
        .iter()
        .map(|p| {
            let c = t.apply(p);
            let pixel = k.project(&c).ok();
            Reprojection {
                pixel,
                depth_m: c.z,
                visible: pixel.is_some(),
            }
        })
        .collect()
}

struct Score {
    inliers: Vec<usize>,
    mean_error: f64,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        self.inliers.len() > other.inliers.len()
            || (self.inliers.len() == other.inliers.len() && self.mean_error < other.mean_error)
    }
}

fn score(t: &RigidTransform, k: &CameraIntrinsics, corrs: &[Correspondence], thr: f64) -> Score {
    let mut inliers = Vec::new();
    let mut sum = 0.0;
    for (i, c) in corrs.iter().enumerate() {
        let Ok(px) = k.project(&t.apply(&c.point)) else {
            continue;
        };
        let e = (px - c.pixel).norm();
        if e <= thr {
            inliers.push(i);
            sum += e;
        }
    }
    let mean_error = if inliers.is_empty() {
        f64::INFINITY
    } else {
        sum / inliers.len() as f64
    };
    Score { inliers, mean_error }
}

/// Candidate models from one minimal sample.
fn hypotheses(idx: [usize; 3], rays: &[Vec3], corrs: &[Correspondence]) -> Vec<RigidTransform> {
    let p = idx.map(|i| corrs[i].point);
    if (p[1] - p[0]).cross(&(p[2] - p[0])).norm() * 0.5 < MIN_SAMPLE_AREA {
        return Vec::new();
    }
    let r = idx.map(|i| rays[i]);
    let Ok(depths) = p3p_depths(&r, (p[0] - p[1]).norm(), (p[0] - p[2]).norm(), (p[1] - p[2]).norm())
    else {
        return Vec::new();
    };
    depths
        .iter()
        .filter_map(|s| {
            let cam: Vec<Vec3> = (0..3).map(|j| r[j] * s[j]).collect();
            horn_align(&p, &cam).ok()
        })
        .collect()
}

fn required_iterations(inliers: usize, total: usize) -> usize {
    let w = inliers as f64 / total as f64;
    let good = w.powi(3);
    if good >= 1.0 {
        return 1;
    }
    if good <= 0.0 {
        return usize::MAX;
    }
    ((1.0 - ADAPTIVE_CONFIDENCE).ln() / (1.0 - good).ln()).ceil() as usize
}

/// Robust rangefinder→camera extrinsics from pixel/point correspondences.
///
/// Iteration `i` draws its sample from stream `i` of a ChaCha8 generator
/// seeded with `params.seed`, so the result depends only on the inputs.
pub fn ransac_extrinsics(
    corrs: &[Correspondence],
    k: &CameraIntrinsics,
    params: &RansacParams,
) -> Result<CalibrationResult, CalibError> {
    params.validate()?;
    if corrs.len() < 3 {
        return Err(CalibError::TooFew {
            needed: 3,
            got: corrs.len(),
        });
    }
    let rays = corrs
        .iter()
        .map(|c| k.backproject(&c.pixel))
        .collect::<Result<Vec<_>, _>>()?;

    let mut best: Option<(RigidTransform, Score)> = None;
    let mut budget = params.iterations;
    let mut iter = 0;
    while iter < budget {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(iter as u64);
        iter += 1;
        let v = sample(&mut rng, corrs.len(), 3);
        let idx = [v.index(0), v.index(1), v.index(2)];
        for model in hypotheses(idx, &rays, corrs) {
            let s = score(&model, k, corrs, params.threshold_px);
            if best.as_ref().is_none_or(|(_, b)| s.better_than(b)) {
                if params.adaptive {
                    budget = budget.min(required_iterations(s.inliers.len(), corrs.len()).max(iter));
                }
                best = Some((model, s));
            }
        }
    }

    let Some((model, s)) = best else {
        return Err(CalibError::NoConsensus {
            best: 0,
            required: params.min_inliers,
        });
    };
    if s.inliers.len() < params.min_inliers {
        return Err(CalibError::NoConsensus {
            best: s.inliers.len(),
            required: params.min_inliers,
        });
    }

    // Second Horn pass: camera points along each inlier ray at the depth the
    // current model assigns to the rangefinder point.
    let (mut transform, mut s) = (model, s);
    if s.inliers.len() >= 3 {
        let src: Vec<Vec3> = s.inliers.iter().map(|&i| corrs[i].point).collect();
        let dst: Vec<Vec3> = s
            .inliers
            .iter()
            .map(|&i| rays[i] * rays[i].dot(&transform.apply(&corrs[i].point)))
            .collect();
        if let Ok(refit) = horn_align(&src, &dst) {
            let rs = score(&refit, k, corrs, params.threshold_px);
            if rs.inliers.len() >= s.inliers.len() {
                transform = refit;
                s = rs;
            }
        }
    }
    Ok(CalibrationResult {
        transform,
        inliers: s.inliers,
        mean_error_px: s.mean_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(800.0, 800.0, 640.0, 360.0).unwrap()
    }

    fn truth() -> RigidTransform {
        RigidTransform::from_axis_angle(
            &Vec3::new(1.0, -2.0, 0.7),
            25f64.to_radians(),
            Vec3::new(0.5, -0.2, 1.1),
        )
    }

    /// Rangefinder points placed in front of the camera, then mapped back.
    fn synth(n: usize, seed: u64) -> Vec<Correspondence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inv = truth().inverse();
        (0..n)
            .map(|_| {
                let cam = Vec3::new(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(4.0..15.0),
                );
                Correspondence::new(k().project(&cam).unwrap(), inv.apply(&cam)).unwrap()
            })
            .collect()
    }

    #[test]
    fn noiseless_recovery() {
        let c = synth(12, 3);
        let r = ransac_extrinsics(&c, &k(), &RansacParams::default()).unwrap();
        assert_eq!(r.inliers.len(), 12);
        assert!(r.transform.rotation_angle_to(&truth()) <= 1e-6);
        assert!((r.transform.translation() - truth().translation()).norm() <= 1e-6);
    }

    #[test]
    fn minimal_sample_is_exact() {
        let c = synth(3, 9);
        let p = RansacParams {
            min_inliers: 3,
            ..Default::default()
        };
        let r = ransac_extrinsics(&c, &k(), &p).unwrap();
        assert_eq!(r.inliers, vec![0, 1, 2]);
        assert!(r.mean_error_px <= 1e-6);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let mut c = synth(30, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for x in c.iter_mut().take(9) {
            x.pixel = Vec2::new(rng.random_range(0.0..1280.0), rng.random_range(0.0..720.0));
        }
        let p = RansacParams {
            seed: 42,
            ..Default::default()
        };
        let a = ransac_extrinsics(&c, &k(), &p).unwrap();
        let b = ransac_extrinsics(&c, &k(), &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.transform.quaternion_wxyz().map(f64::to_bits), b.transform.quaternion_wxyz().map(f64::to_bits));
    }

    #[test]
    fn noise_and_outliers() {
        let mut c = synth(40, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 0.5).unwrap();
        for (i, x) in c.iter_mut().enumerate() {
            if i < 12 {
                x.pixel = Vec2::new(rng.random_range(0.0..1280.0), rng.random_range(0.0..720.0));
            } else {
                x.pixel += Vec2::new(noise.sample(&mut rng), noise.sample(&mut rng));
            }
        }
        let r = ransac_extrinsics(&c, &k(), &RansacParams::default()).unwrap();
        assert!(r.transform.rotation_angle_to(&truth()) <= 0.5f64.to_radians());
        assert!((12..40).all(|i| r.inliers.contains(&i)), "{:?}", r.inliers);
        let reproj = reproject_cloud(
            &r.transform,
            &k(),
            &r.inliers.iter().map(|&i| c[i].point).collect::<Vec<_>>(),
        );
        for (rp, &i) in reproj.iter().zip(&r.inliers) {
            assert!((rp.pixel.unwrap() - c[i].pixel).norm() <= 2.0);
        }
    }

    #[test]
    fn no_consensus_and_arity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c: Vec<Correspondence> = (0..20)
            .map(|_| {
                Correspondence::new(
                    Vec2::new(rng.random_range(0.0..1280.0), rng.random_range(0.0..720.0)),
                    Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                )
                .unwrap()
            })
            .collect();
        let p = RansacParams {
            min_inliers: 15,
            ..Default::default()
        };
        assert!(matches!(ransac_extrinsics(&c, &k(), &p), Err(CalibError::NoConsensus { .. })));
        assert!(matches!(
            ransac_extrinsics(&c[..2], &k(), &p),
            Err(CalibError::TooFew { .. })
        ));
    }

    #[test]
    fn reprojection_basics() {
        let r = reproject_cloud(
            &RigidTransform::identity(),
            &k(),
            &[Vec3::new(0.0, 0.0, 5.0), Vec3::new(0.0, 0.0, -1.0)],
        );
        assert_eq!(r[0].pixel, Some(Vec2::new(640.0, 360.0)));
        assert_eq!(r[0].depth_m, 5.0);
        assert!(r[0].visible);
        assert!(!r[1].visible);
    }

    #[test]
    fn adaptive_stops_early_on_clean_data() {
        let c = synth(20, 6);
        let p = RansacParams {
            adaptive: true,
            ..Default::default()
        };
        let r = ransac_extrinsics(&c, &k(), &p).unwrap();
        assert_eq!(r.inliers.len(), 20);
    }
}
