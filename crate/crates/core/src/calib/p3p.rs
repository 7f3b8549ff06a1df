//! Depths of three points seen along known rays with known pairwise
//! distances (Grunert's reduction).
//!
//! With `s₂ = u·s₁` and `s₃ = v·s₁`, the three law-of-cosines constraints
//! reduce to one quartic in `v`; `u` follows linearly and `s₁` from the
//! `d₁₃` constraint. Every candidate is then refined with a few Newton steps
//! on the original three equations.

use super::quartic::real_roots;
use super::{CalibError, Vec3};

/// Rays whose pairwise cosine exceeds this are treated as identical.
const COLLINEAR_COS: f64 = 1.0 - 1e-12;
/// Relative law-of-cosines residual a returned triple must meet.
const RESIDUAL_TOL: f64 = 1e-6;
const NEWTON_ITERS: usize = 6;

/// Ascending-order polynomial helpers.
fn pmul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn padd(a: &[f64], b: &[f64], scale_b: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += scale_b * y;
    }
    out
}

struct Geometry {
    cos_a: f64, // between rays 2 and 3
    cos_b: f64, // between rays 1 and 3
    cos_g: f64, // between rays 1 and 2
    a2: f64,    // d23²
    b2: f64,    // d13²
    c2: f64,    // d12²
}

impl Geometry {
    /// Residuals of the three constraints, each divided by its distance².
    fn residuals(&self, s: &[f64; 3]) -> [f64; 3] {
        let [s1, s2, s3] = *s;
        [
            (s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * self.cos_g - self.c2) / self.c2,
            (s1 * s1 + s3 * s3 - 2.0 * s1 * s3 * self.cos_b - self.b2) / self.b2,
            (s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * self.cos_a - self.a2) / self.a2,
        ]
    }

    fn refine(&self, mut s: [f64; 3]) -> [f64; 3] {
        for _ in 0..NEWTON_ITERS {
            let r = self.residuals(&s);
            if r.iter().all(|v| v.abs() < 1e-15) {
                break;
            }
            let [s1, s2, s3] = s;
            let j = nalgebra::Matrix3::new(
                2.0 * (s1 - s2 * self.cos_g) / self.c2,
                2.0 * (s2 - s1 * self.cos_g) / self.c2,
                0.0,
                2.0 * (s1 - s3 * self.cos_b) / self.b2,
                0.0,
                2.0 * (s3 - s1 * self.cos_b) / self.b2,
                0.0,
                2.0 * (s2 - s3 * self.cos_a) / self.a2,
                2.0 * (s3 - s2 * self.cos_a) / self.a2,
            );
            let Some(step) = j.lu().solve(&Vec3::from(r)) else {
                break;
            };
            let next = [s1 - step[0], s2 - step[1], s3 - step[2]];
            let worse = |x: &[f64; 3]| x.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if !next.iter().all(|v| v.is_finite()) || worse(&self.residuals(&next)) > worse(&r) {
                break;
            }
            s = next;
        }
        s
    }

    /// The quartic in `v` (ascending coefficients) and the pieces needed to
    /// recover `u`: `u = N(v) / D(v)`.
    fn quartic(&self) -> (Vec<f64>, [f64; 3], [f64; 2]) {
        let k = (self.a2 - self.c2) / self.b2;
        let cb2 = self.c2 / self.b2;
        // N(v) = (1 − K)v² + 2K·cosβ·v − (1 + K)
        let n = [-(1.0 + k), 2.0 * k * self.cos_b, 1.0 - k];
        // D(v) = 2(cosα·v − cosγ)
        let d = [-2.0 * self.cos_g, 2.0 * self.cos_a];
        // Substituting u = N/D into c²(1 + v² − 2v·cosβ) = b²(1 + u² − 2u·cosγ)
        // and clearing D² gives D² + N² − 2cosγ·N·D − (c²/b²)(1 + v² − 2v·cosβ)·D² = 0.
        let dd = pmul(&d, &d);
        let nn = pmul(&n, &n);
        let nd = pmul(&n, &d);
        let w = [1.0, -2.0 * self.cos_b, 1.0];
        let wdd = pmul(&w, &dd);
        let mut q = padd(&dd, &nn, 1.0);
        q = padd(&q, &nd, -2.0 * self.cos_g);
        q = padd(&q, &wdd, -cb2);
        (q, n, d)
    }

    /// Candidate `u` values for a root `v`, best first.
    fn u_for(&self, v: f64, n: &[f64; 3], d: &[f64; 2]) -> Vec<f64> {
        let mut cands = Vec::with_capacity(3);
        let den = d[0] + d[1] * v;
        if den.abs() > 1e-12 {
            cands.push((n[0] + n[1] * v + n[2] * v * v) / den);
        }
        // fallback from the d₁₂ constraint alone: u² − 2cosγ·u + 1 − (c²/b²)w(v) = 0
        let w = 1.0 + v * v - 2.0 * v * self.cos_b;
        let disc = self.cos_g * self.cos_g - 1.0 + self.c2 / self.b2 * w;
        if disc >= 0.0 {
            let r = disc.sqrt();
            cands.push(self.cos_g + r);
            cands.push(self.cos_g - r);
        }
        cands
    }
}

/// Solves for the depths `(s₁, s₂, s₃)` of three points along unit rays,
/// given the distances between the points. Returns up to four positive
/// triples; an infeasible configuration yields an empty list.
pub fn p3p_depths(
    rays: &[Vec3; 3],
    d12: f64,
    d13: f64,
    d23: f64,
) -> Result<Vec<[f64; 3]>, CalibError> {
    for (i, d) in [d12, d13, d23].iter().enumerate() {
        if !(d.is_finite() && *d > 0.0) {
            return Err(CalibError::InvalidParams(format!(
                "distance #{i} must be positive and finite, got {d}"
            )));
        }
    }
    let mut unit = [Vec3::zeros(); 3];
    for (u, r) in unit.iter_mut().zip(rays) {
        let n = r.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(CalibError::InvalidParams("zero or non-finite ray".into()));
        }
        *u = r / n;
    }
    let geo = Geometry {
        cos_a: unit[1].dot(&unit[2]),
        cos_b: unit[0].dot(&unit[2]),
        cos_g: unit[0].dot(&unit[1]),
        a2: d23 * d23,
        b2: d13 * d13,
        c2: d12 * d12,
    };
    if [geo.cos_a, geo.cos_b, geo.cos_g]
        .iter()
        .any(|&c| c > COLLINEAR_COS)
    {
        return Err(CalibError::Degenerate("rays are nearly identical".into()));
    }
    if d12 + d13 < d23 || d12 + d23 < d13 || d13 + d23 < d12 {
        return Ok(Vec::new());
    }

    let (q, n, d) = geo.quartic();
    let desc: Vec<f64> = q.iter().rev().copied().collect();
    let roots = match real_roots(&desc) {
        Ok(r) => r,
        Err(_) => return Ok(Vec::new()),
    };

    let mut out: Vec<[f64; 3]> = Vec::new();
    for v in roots.into_iter().filter(|v| *v > 0.0) {
        let w = 1.0 + v * v - 2.0 * v * geo.cos_b;
        if w <= 0.0 {
            continue;
        }
        let s1 = (geo.b2 / w).sqrt();
        // choose the branch before polishing: Newton from a wrong branch can
        // land on a different root's solution
        let err = |s: &[f64; 3]| geo.residuals(s).iter().map(|r| r.abs()).fold(0.0, f64::max);
        let best = geo
            .u_for(v, &n, &d)
            .into_iter()
            .filter(|u| *u > 0.0)
            .map(|u| [s1, u * s1, v * s1])
            .min_by(|x, y| err(x).total_cmp(&err(y)));
        let Some(s) = best.map(|s| geo.refine(s)) else {
            continue;
        };
        if s.iter().any(|v| !(*v > 0.0)) {
            continue;
        }
        if geo.residuals(&s).iter().any(|r| r.abs() > RESIDUAL_TOL) {
            continue;
        }
        let dup = out.iter().any(|o| {
            o.iter()
                .zip(&s)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
        });
        if !dup {
            out.push(s);
        }
    }
    Ok(out)
}
