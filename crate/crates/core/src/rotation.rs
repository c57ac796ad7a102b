//! Single-pair Givens rotations: the objective `h_ij(θ)`, the quantities
//! `d_ij` and `ω_ij`, and exact maximization over the rotation angle.
//!
//! With `x = tan θ` the increment of the diagonal norm is
//!
//! ```text
//! τ(x) - τ(0) = 3 / (1 + x²)² · (2d(x - x³) - ωx²)
//! ```
//!
//! and its stationary points are the real roots of the quartic
//! `d(1 - 6x² + x⁴) - ω(x - x³)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use crate::tensor::{OrthoMatrix, SymTensor3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub i: usize,
    pub j: usize,
    /// `A_iii A_iij - A_ijj A_jjj`; `h'(0) = 6d`.
    pub d: f64,
    /// `A_iii² + A_jjj² - 3A_iij² - 3A_ijj² - 2A_iii A_ijj - 2A_iij A_jjj`;
    /// `h''(0) = -6ω`.
    pub omega: f64,
}

fn check_pair(n: usize, i: usize, j: usize) -> Result<()> {
    if i < j && j < n {
        Ok(())
    } else {
        Err(Error::BadIndex {
            indices: vec![i, j],
            n,
        })
    }
}

pub fn pair_stats(a: &SymTensor3, i: usize, j: usize) -> Result<PairStats> {
    check_pair(a.n(), i, j)?;
    Ok(pair_stats_unchecked(a, i, j))
}

pub(crate) fn pair_stats_unchecked(a: &SymTensor3, i: usize, j: usize) -> PairStats {
    let aiii = a.get(i, i, i);
    let ajjj = a.get(j, j, j);
    let aiij = a.get(i, i, j);
    let aijj = a.get(i, j, j);
    PairStats {
        i,
        j,
        d: aiii * aiij - aijj * ajjj,
        omega: aiii * aiii + ajjj * ajjj
            - 3.0 * aiij * aiij
            - 3.0 * aijj * aijj
            - 2.0 * aiii * aijj
            - 2.0 * aiij * ajjj,
    }
}

/// `x = tan θ*`, possibly at infinity (`θ* = π/2`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Slope {
    Finite(f64),
    Infinite,
}

impl Slope {
    pub fn theta(self) -> f64 {
        match self {
            Slope::Finite(x) => x.atan(),
            Slope::Infinite => std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Slope::Finite(x) => Some(x),
            Slope::Infinite => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSolution {
    pub x_star: Slope,
    /// `θ* ∈ (-π/2, π/2]`.
    pub theta: f64,
    /// `τ(x*) - τ(0) ≥ 0`.
    pub gain: f64,
    /// Finite stationary points examined (roots of the quartic).
    pub candidates: Vec<f64>,
}

/// `τ(x) - τ(0)` for the pair statistics `(d, ω)`.
pub fn gain_at(d: f64, omega: f64, x: f64) -> f64 {
    let q = 1.0 + x * x;
    3.0 / (q * q) * (2.0 * d * (x - x * x * x) - omega * x * x)
}

/// `τ'(x) = 6 / (1 + x²)³ · (d(1 - 6x² + x⁴) - ω(x - x³))`.
pub fn gain_derivative(d: f64, omega: f64, x: f64) -> f64 {
    let q = 1.0 + x * x;
    6.0 / (q * q * q) * stationarity_quartic(d, omega, x)
}

/// `d(1 - 6x² + x⁴) - ω(x - x³)`.
pub fn stationarity_quartic(d: f64, omega: f64, x: f64) -> f64 {
    let x2 = x * x;
    d * (1.0 - 6.0 * x2 + x2 * x2) - omega * (x - x * x2)
}

pub fn optimal_angle(stats: &PairStats) -> AngleSolution {
    optimal_angle_with(stats, false)
}

/// Global maximizer of `τ` over `x ∈ ℝ ∪ {∞}`.
///
/// Candidates are `x = 0`, the real roots of the stationarity quartic and
/// the point at infinity (gain 0). Ties are broken toward the smallest
/// `|θ|`. With `restrict_quarter_pi` only candidates with `|x| ≤ 1` are
/// considered.
pub fn optimal_angle_with(stats: &PairStats, restrict_quarter_pi: bool) -> AngleSolution {
    let (d, omega) = (stats.d, stats.omega);
    if d == 0.0 && omega == 0.0 {
        return AngleSolution {
            x_star: Slope::Finite(0.0),
            theta: 0.0,
            gain: 0.0,
            candidates: Vec::new(),
        };
    }
    // with x = tan θ the quartic is (d cos 4θ - ω/4 sin 4θ) / cos⁴θ, so its
    // roots are θ = (atan2(4d, ω) + kπ) / 4
    let base = (4.0 * d).atan2(omega) / 4.0;
    let mut candidates: Vec<f64> = (0..4)
        .map(|k| {
            let mut t = base + k as f64 * FRAC_PI_4;
            if t > FRAC_PI_2 {
                t -= PI;
            }
            t
        })
        .filter(|t| t.cos().abs() > 1e-12)
        .map(|t| polish_root(d, omega, t.tan()))
        .collect();
    candidates.sort_by(|a, b| a.total_cmp(b));

    let mut finite: Vec<f64> = candidates
        .iter()
        .copied()
        .filter(|x| !restrict_quarter_pi || x.abs() <= 1.0 + 1e-12)
        .collect();
    finite.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(b.total_cmp(a)));

    // relative, so that tiny gains near convergence still count
    let beats = |g: f64, b: f64| g > b + 1e-12 * g.abs().max(b.abs());
    let mut best = (Slope::Finite(0.0), 0.0);
    for x in finite {
        let g = gain_at(d, omega, x);
        if beats(g, best.1) {
            best = (Slope::Finite(x), g);
        }
    }
    // the point at infinity has gain 0 and |θ| = π/2, so it never wins a tie
    AngleSolution {
        x_star: best.0,
        theta: best.0.theta(),
        gain: best.1,
        candidates,
    }
}

fn polish_root(d: f64, omega: f64, mut x: f64) -> f64 {
    let deriv = |x: f64| d * (-12.0 * x + 4.0 * x * x * x) - omega * (1.0 - 3.0 * x * x);
    let mut fx = stationarity_quartic(d, omega, x).abs();
    for _ in 0..3 {
        let dp = deriv(x);
        if dp == 0.0 {
            break;
        }
        let next = x - stationarity_quartic(d, omega, x) / dp;
        let fn_ = stationarity_quartic(d, omega, next).abs();
        if !(fn_ < fx) {
            break;
        }
        x = next;
        fx = fn_;
    }
    x
}

/// `W_iii` and `W_jjj` after rotating by `G(i, j, θ)` given `(cos θ, sin θ)`.
fn rotated_pair_diagonal(a: &SymTensor3, i: usize, j: usize, c: f64, s: f64) -> (f64, f64) {
    let aiii = a.get(i, i, i);
    let aiij = a.get(i, i, j);
    let aijj = a.get(i, j, j);
    let ajjj = a.get(j, j, j);
    let wi = c * c * c * aiii + 3.0 * c * c * s * aiij + 3.0 * c * s * s * aijj + s * s * s * ajjj;
    let wj = -s * s * s * aiii + 3.0 * s * s * c * aiij - 3.0 * s * c * c * aijj + c * c * c * ajjj;
    (wi, wj)
}

/// `h_ij(θ) = ‖diag(A •₁ Gᵀ •₂ Gᵀ •₃ Gᵀ)‖²` with `G = G(i, j, θ)`.
pub fn rotation_objective(a: &SymTensor3, i: usize, j: usize, theta: f64) -> Result<f64> {
    check_pair(a.n(), i, j)?;
    let (s, c) = theta.sin_cos();
    let (wi, wj) = rotated_pair_diagonal(a, i, j, c, s);
    let rest: f64 = (0..a.n())
        .filter(|&k| k != i && k != j)
        .map(|k| a.get(k, k, k).powi(2))
        .sum();
    Ok(rest + wi * wi + wj * wj)
}

/// `contract_all(A, G(i, j, θ))`, touching only entries with an index in
/// `{i, j}`.
pub fn apply_rotation(a: &SymTensor3, i: usize, j: usize, theta: f64) -> Result<SymTensor3> {
    check_pair(a.n(), i, j)?;
    let mut out = a.clone();
    let (s, c) = theta.sin_cos();
    rotate_in_place(&mut out, i, j, c, s);
    Ok(out)
}

/// In-place `A ← A •₁ Gᵀ •₂ Gᵀ •₃ Gᵀ` for `G = G(i, j, θ)`, `(c, s) = (cos θ, sin θ)`.
/// Returns the overwritten entries so the update can be undone bit-exactly.
pub(crate) fn rotate_in_place(
    a: &mut SymTensor3,
    i: usize,
    j: usize,
    c: f64,
    s: f64,
) -> Vec<(usize, usize, usize, f64)> {
    let n = a.n();
    let terms = |idx: usize| -> ([(usize, f64); 2], usize) {
        if idx == i {
            ([(i, c), (j, s)], 2)
        } else if idx == j {
            ([(i, -s), (j, c)], 2)
        } else {
            ([(idx, 1.0), (idx, 0.0)], 1)
        }
    };
    let value = |a: &SymTensor3, x: usize, y: usize, z: usize| -> f64 {
        let (tx, nx) = terms(x);
        let (ty, ny) = terms(y);
        let (tz, nz) = terms(z);
        let mut acc = 0.0;
        for &(p, cp) in &tx[..nx] {
            for &(q, cq) in &ty[..ny] {
                for &(r, cr) in &tz[..nz] {
                    acc += cp * cq * cr * a.get(p, q, r);
                }
            }
        }
        acc
    };

    let mut updates: Vec<(usize, usize, usize, f64)> = Vec::with_capacity(n * n + 4);
    let others: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
    for (bi, &b) in others.iter().enumerate() {
        for &cc in &others[bi..] {
            updates.push((i, b, cc, 0.0));
            updates.push((j, b, cc, 0.0));
        }
        updates.push((i, i, b, 0.0));
        updates.push((i, j, b, 0.0));
        updates.push((j, j, b, 0.0));
    }
    updates.extend([(i, i, i, 0.0), (i, i, j, 0.0), (i, j, j, 0.0), (j, j, j, 0.0)]);
    for u in updates.iter_mut() {
        u.3 = value(a, u.0, u.1, u.2);
    }
    let mut old = Vec::with_capacity(updates.len());
    for (x, y, z, v) in updates {
        old.push((x, y, z, a.get(x, y, z)));
        a.set(x, y, z, v);
    }
    old
}

/// Writes back entries saved by [`rotate_in_place`].
pub(crate) fn restore(a: &mut SymTensor3, saved: &[(usize, usize, usize, f64)]) {
    for &(x, y, z, v) in saved {
        a.set(x, y, z, v);
    }
}

/// Givens matrix for a solved pair.
pub fn givens_for(n: usize, i: usize, j: usize, theta: f64) -> Result<OrthoMatrix> {
    OrthoMatrix::givens(n, i, j, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::generate;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn stats(d: f64, omega: f64) -> PairStats {
        PairStats { i: 0, j: 1, d, omega }
    }

    /// Best gain over `m` equispaced angles in `(-π/2, π/2]`.
    fn grid_max(d: f64, omega: f64, m: usize) -> f64 {
        (1..=m)
            .map(|k| {
                let theta = -FRAC_PI_2 + std::f64::consts::PI * k as f64 / m as f64;
                let (s, c) = theta.sin_cos();
                // τ(x) - τ(0) in angle form, avoids tan blow-up near π/2
                3.0 * (2.0 * d * (s * c * c * c - s * s * s * c) - omega * s * s * c * c)
            })
            .fold(0.0, f64::max)
    }

    /// `max_θ` of `(3/8)(4d sin 4θ + ω cos 4θ - ω)`.
    fn closed_form_max(d: f64, omega: f64) -> f64 {
        0.375 * ((16.0 * d * d + omega * omega).sqrt() - omega)
    }

    #[test]
    fn diagonal_pair_stats() {
        let a = generate::from_weights_and_basis(&[2.0, -3.0, 0.5], &OrthoMatrix::identity(3))
            .unwrap();
        let s = pair_stats(&a, 0, 1).unwrap();
        assert_eq!(s.d, 0.0);
        assert_eq!(s.omega, 13.0);
        assert!(pair_stats(&a, 1, 1).is_err());
        assert!(pair_stats(&a, 1, 3).is_err());
    }

    #[test]
    fn omega_in_terms_of_stationary_ratio() {
        for &(a, b, g) in &[(1.0, 2.0, 0.3), (-0.7, 1.1, -0.9), (2.0, 0.0, 1.5)] {
            let t = generate::sd2(a, b, g);
            let s = pair_stats(&t, 0, 1).unwrap();
            let expected = -(3.0 * g * g + 2.0 * g - 1.0) * (a * a + b * b);
            assert!((s.omega - expected).abs() < 1e-12);
            assert!(s.d.abs() < 1e-15);
        }
    }

    #[test]
    fn d_and_omega_match_finite_differences() {
        for seed in 0..20 {
            let a = generate::random_symmetric(4, seed).unwrap();
            let (i, j) = (1, 3);
            let s = pair_stats(&a, i, j).unwrap();
            let h = |t: f64| rotation_objective(&a, i, j, t).unwrap();
            let eps = 1e-5;
            let d1 = (h(eps) - h(-eps)) / (2.0 * eps);
            let eps2 = 1e-4;
            let d2 = (h(eps2) - 2.0 * h(0.0) + h(-eps2)) / (eps2 * eps2);
            assert!((d1 / 6.0 - s.d).abs() <= 1e-6 * (1.0 + s.d.abs()), "{d1} {}", s.d);
            assert!(
                (-d2 / 6.0 - s.omega).abs() <= 1e-6 * (1.0 + s.omega.abs()),
                "{d2} {}",
                s.omega
            );
        }
    }

    #[test]
    fn objective_at_zero_is_diag_norm() {
        let a = generate::random_symmetric(5, 3).unwrap();
        assert!((rotation_objective(&a, 0, 4, 0.0).unwrap() - a.diag_norm_sq()).abs() < 1e-13);
    }

    #[test]
    fn objective_matches_full_contraction() {
        let a = generate::random_symmetric(5, 4).unwrap();
        for &theta in &[0.3, -1.2, FRAC_PI_2, 2.5] {
            let g = OrthoMatrix::givens(5, 1, 4, theta).unwrap();
            let w = a.contract_all(&g).unwrap();
            let h = rotation_objective(&a, 1, 4, theta).unwrap();
            assert!((h - w.diag_norm_sq()).abs() < 1e-12);
        }
    }

    #[test]
    fn increment_formula_holds() {
        for seed in 0..20 {
            let a = generate::random_symmetric(3, 100 + seed).unwrap();
            let s = pair_stats(&a, 0, 2).unwrap();
            let h0 = rotation_objective(&a, 0, 2, 0.0).unwrap();
            for k in 0..40 {
                let theta = -1.5 + 3.0 * k as f64 / 39.0;
                let lhs = rotation_objective(&a, 0, 2, theta).unwrap() - h0;
                let rhs = gain_at(s.d, s.omega, theta.tan());
                assert!((lhs - rhs).abs() < 1e-10, "θ = {theta}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn diagonal_tensor_objective_never_increases() {
        let a = generate::from_weights_and_basis(&[1.5, -0.4, 2.0], &OrthoMatrix::identity(3))
            .unwrap();
        let h0 = a.diag_norm_sq();
        for k in 1..=2000 {
            let theta = -FRAC_PI_2 + std::f64::consts::PI * k as f64 / 2000.0;
            assert!(rotation_objective(&a, 0, 1, theta).unwrap() <= h0 + 1e-12);
        }
    }

    #[test]
    fn flat_and_jacobi_stationary_cases_return_zero() {
        let sol = optimal_angle(&stats(0.0, 0.0));
        assert_eq!((sol.x_star, sol.gain), (Slope::Finite(0.0), 0.0));
        for omega in [0.0, 1e-3, 2.0, 50.0] {
            let sol = optimal_angle(&stats(0.0, omega));
            assert_eq!(sol.x_star, Slope::Finite(0.0));
            assert_eq!(sol.gain, 0.0);
        }
    }

    #[test]
    fn negative_omega_with_zero_d_rotates_by_quarter_pi() {
        for omega in [-1.0, -0.01, -7.5] {
            let sol = optimal_angle(&stats(0.0, omega));
            let x = sol.x_star.finite().unwrap();
            assert!(x != 0.0);
            assert!((sol.gain + 0.75 * omega).abs() < 1e-12);
            let grid = grid_max(0.0, omega, 1_000_000);
            assert!((sol.gain - grid).abs() < 1e-8);
        }
    }

    #[test]
    fn gain_matches_closed_form_and_grid() {
        let mut rng = generate::rng_from_seed(17);
        use rand::Rng;
        for _ in 0..200 {
            let d: f64 = rng.gen_range(-3.0..3.0);
            let omega: f64 = rng.gen_range(-3.0..3.0);
            let sol = optimal_angle(&stats(d, omega));
            let exact = closed_form_max(d, omega);
            assert!((sol.gain - exact).abs() < 1e-12 * (1.0 + exact), "{d} {omega}");
            assert!(sol.gain >= grid_max(d, omega, 20_000) - 1e-9);
            if let Slope::Finite(x) = sol.x_star {
                assert!(x.abs() <= 1.0 + 1e-12);
                assert!(gain_derivative(d, omega, x).abs() <= 1e-9 * (1.0 + d.abs() + omega.abs()));
            }
        }
    }

    #[test]
    fn positive_gain_whenever_d_nonzero() {
        for &(d, omega) in &[(1e-6, 5.0), (-2.0, 100.0), (0.3, -0.1)] {
            assert!(optimal_angle(&stats(d, omega)).gain > 0.0);
        }
    }

    #[test]
    fn restricted_search_stays_in_quarter_pi() {
        let sol = optimal_angle_with(&stats(0.8, -1.3), true);
        let x = sol.x_star.finite().unwrap();
        assert!(x.abs() <= 1.0 + 1e-12);
        assert!((sol.gain - optimal_angle(&stats(0.8, -1.3)).gain).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_at_optimum() {
        let mut rng = generate::rng_from_seed(23);
        use rand::Rng;
        for _ in 0..50 {
            let d: f64 = rng.gen_range(-2.0..2.0);
            let omega: f64 = rng.gen_range(-2.0..2.0);
            let sol = optimal_angle(&stats(d, omega));
            let Some(x) = sol.x_star.finite() else { continue };
            let denom = 1.0 - 6.0 * x * x + x.powi(4);
            if denom.abs() < 1e-3 || x == 0.0 {
                continue;
            }
            let eps = 1e-4;
            let fd = (gain_at(d, omega, x + eps) - 2.0 * gain_at(d, omega, x)
                + gain_at(d, omega, x - eps))
                / (eps * eps);
            let expected = -6.0 * omega / denom;
            assert!((fd - expected).abs() < 1e-5 * (1.0 + expected.abs()), "{fd} {expected}");
        }
    }

    #[test]
    fn apply_rotation_matches_contraction() {
        for seed in 0..10 {
            let a = generate::random_symmetric(5, 200 + seed).unwrap();
            let theta = 0.37 * seed as f64 - 1.3;
            let g = OrthoMatrix::givens(5, 1, 3, theta).unwrap();
            let expected = a.contract_all(&g).unwrap();
            let got = apply_rotation(&a, 1, 3, theta).unwrap();
            assert!(got.max_abs_diff(&expected) < 1e-12);
        }
        let a = generate::random_symmetric(4, 1).unwrap();
        assert_eq!(apply_rotation(&a, 0, 2, 0.0).unwrap(), a);
        let back = apply_rotation(&apply_rotation(&a, 0, 2, 0.9).unwrap(), 0, 2, -0.9).unwrap();
        assert!(back.max_abs_diff(&a) < 1e-12);
    }

    proptest! {
        #[test]
        fn gain_agrees_with_direct_objective(seed in any::<u64>(), i in 0usize..4, dj in 1usize..4) {
            let n = 5;
            let j = (i + dj).min(n - 1);
            prop_assume!(i < j);
            let a = generate::random_symmetric(n, seed).unwrap();
            let s = pair_stats(&a, i, j).unwrap();
            let sol = optimal_angle(&s);
            prop_assert!(sol.gain >= 0.0);
            let direct = rotation_objective(&a, i, j, sol.theta).unwrap()
                - rotation_objective(&a, i, j, 0.0).unwrap();
            prop_assert!((direct - sol.gain).abs() < 1e-10);
            let rotated = apply_rotation(&a, i, j, sol.theta).unwrap();
            prop_assert!((rotated.norm_sq() - a.norm_sq()).abs() <= 1e-10 * a.norm_sq());
            if let Slope::Finite(x) = sol.x_star {
                let scale = s.d.abs() + s.omega.abs();
                prop_assert!(stationarity_quartic(s.d, s.omega, x).abs() <= 1e-9 * (1.0 + scale));
            }
        }
    }
}
