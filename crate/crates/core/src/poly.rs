//! Real roots of low-degree polynomials via companion-matrix eigenvalues.

use nalgebra::{DMatrix, Schur};

/// QR iteration cap; the default of nalgebra is unbounded.
const MAX_QR_ITERS: usize = 10_000;

/// Imaginary parts up to `IMAG_TOL · (1 + |re|)` are treated as rounding.
pub const IMAG_TOL: f64 = 1e-10;

/// Evaluates `Σ coeffs[k] x^{d-k}` (highest degree first) by Horner's rule.
pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    let d = coeffs.len().saturating_sub(1);
    coeffs[..d]
        .iter()
        .enumerate()
        .map(|(k, &c)| c * (d - k) as f64)
        .collect()
}

/// Real roots of the polynomial with coefficients `coeffs` (highest degree
/// first), sorted ascending. Leading zeros are dropped; the zero polynomial
/// has no roots reported. Each root is refined by a few Newton steps.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let first = coeffs
        .iter()
        .position(|c| c.abs() > scale * 1e-300)
        .unwrap_or(coeffs.len());
    let p = &coeffs[first..];
    let deg = p.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = p[0];
    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for k in 0..deg {
        companion[(0, k)] = -p[k + 1] / lead;
    }
    for k in 1..deg {
        companion[(k, k - 1)] = 1.0;
    }
    let dp = derivative(p);
    let Some(schur) = Schur::try_new(companion, f64::EPSILON, MAX_QR_ITERS) else {
        return Vec::new();
    };
    let mut roots: Vec<f64> = schur
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= IMAG_TOL * (1.0 + z.re.abs()))
        .map(|z| polish(p, &dp, z.re))
        .collect();
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

fn polish(p: &[f64], dp: &[f64], mut x: f64) -> f64 {
    let mut fx = horner(p, x).abs();
    for _ in 0..4 {
        let d = horner(dp, x);
        if d == 0.0 {
            break;
        }
        let next = x - horner(p, x) / d;
        let fn_ = horner(p, next).abs();
        if !(fn_ < fx) {
            break;
        }
        x = next;
        fx = fn_;
    }
    x
}
