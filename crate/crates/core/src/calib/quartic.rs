//! Real roots of polynomials up to degree four.
//!
//! Roots come from the eigenvalues of the companion matrix, then get two
//! Newton steps on the original polynomial. Conjugate pairs whose imaginary
//! part is at rounding level are taken as a repeated real root.

use nalgebra::{Complex, DMatrix, Schur};

use super::CalibError;

const NEWTON_STEPS: usize = 2;
/// Imaginary parts below this (relative to the root's magnitude) are
/// treated as rounding noise around a real root.
const IMAG_TOL: f64 = 1e-6;
const SCHUR_MAX_ITERS: usize = 500;
const DK_MAX_ITERS: usize = 500;

/// Evaluates a polynomial (highest degree first) and its derivative.
fn eval(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

fn polish(coeffs: &[f64], mut x: f64) -> f64 {
    for _ in 0..NEWTON_STEPS {
        let (p, dp) = eval(coeffs, x);
        if p == 0.0 || dp == 0.0 {
            break;
        }
        let next = x - p / dp;
        // near a repeated root Newton can overshoot; only accept improvements
        if next.is_finite() && eval(coeffs, next).0.abs() <= p.abs() {
            x = next;
        } else {
            break;
        }
    }
    x
}

/// Eigenvalues via the real Schur form. Cyclic companion matrices (such as
/// that of x⁴ − 1) can stall the QR sweep, so a shifted copy is tried when
/// the first attempt does not converge.
fn companion_eigenvalues(companion: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    let n = companion.nrows();
    let scale = companion.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for shift in [0.0, 0.3183 * scale] {
        let shifted = companion + DMatrix::<f64>::identity(n, n) * shift;
        if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, SCHUR_MAX_ITERS) {
            return Some(
                schur
                    .complex_eigenvalues()
                    .iter()
                    .map(|z| Complex::new(z.re - shift, z.im))
                    .collect(),
            );
        }
    }
    log::debug!("companion Schur decomposition did not converge; using Durand-Kerner");
    None
}

/// Simultaneous root iteration, used only when Schur fails.
fn durand_kerner(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let n = coeffs.len() - 1;
    let monic: Vec<f64> = coeffs.iter().map(|c| c / coeffs[0]).collect();
    let bound = 1.0 + monic[1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex::new(0.4, 0.9);
    let mut z: Vec<Complex<f64>> = (0..n).map(|k| seed.powu(k as u32) * bound).collect();
    for _ in 0..DK_MAX_ITERS {
        let mut moved = 0.0f64;
        for i in 0..n {
            let p = monic
                .iter()
                .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z[i] + c);
            let denom = (0..n)
                .filter(|&j| j != i)
                .fold(Complex::new(1.0, 0.0), |acc, j| acc * (z[i] - z[j]));
            if denom.norm() == 0.0 {
                continue;
            }
            let step = p / denom;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved <= 1e-15 * bound {
            break;
        }
    }
    z
}

/// Real roots (with multiplicity) of `coeffs`, highest degree first.
pub(crate) fn real_roots(coeffs: &[f64]) -> Result<Vec<f64>, CalibError> {
    let first = coeffs
        .iter()
        .position(|&c| c != 0.0)
        .ok_or(CalibError::ZeroPolynomial)?;
    let coeffs = &coeffs[first..];
    let degree = coeffs.len() - 1;
    let mut roots = match degree {
        0 => Vec::new(),
        1 => vec![-coeffs[1] / coeffs[0]],
        _ => {
            let lead = coeffs[0];
            let mut companion = DMatrix::<f64>::zeros(degree, degree);
            for i in 1..degree {
                companion[(i, i - 1)] = 1.0;
            }
            for i in 0..degree {
                companion[(i, degree - 1)] = -coeffs[degree - i] / lead;
            }
            companion_eigenvalues(&companion)
                .unwrap_or_else(|| durand_kerner(coeffs))
                .iter()
                .filter(|z| z.im.abs() <= IMAG_TOL * z.re.abs().max(1.0))
                .map(|z| polish(coeffs, z.re))
                .collect()
        }
    };
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

/// Real roots of `c4 x⁴ + c3 x³ + c2 x² + c1 x + c0`, ascending, repeated
/// roots listed once per multiplicity. A zero leading coefficient reduces
/// the degree.
pub fn solve_quartic(c4: f64, c3: f64, c2: f64, c1: f64, c0: f64) -> Result<Vec<f64>, CalibError> {
    real_roots(&[c4, c3, c2, c1, c0])
}
