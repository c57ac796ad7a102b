//! Numeric certificates around the symmetrizer tensor (`A_012 = 1`).
//!
//! Its symmetric objective is `f(Q) = 36ρ(Q)` with
//! `ρ(Q) = Σ_i Q_i0² Q_i1² Q_i2²`, which stays below `1/12`, while three
//! independent permutation factors reach `F = 3`. The bound on `ρ` goes
//! through the factorization `Qᵀ = Q₁(x) Q₂(y) Q₃(z)`, the substitution
//! `u = x - 1/x`, `v = z - 1/z`, and the auxiliary functions `Φ`, `ψ`, `φ`.
//!
//! For `n = 2` the three-factor maximum equals the symmetric one at `I` for
//! every JD tensor; [`verify_dim2_gmd_equals_md`] checks the sign of the
//! certificate polynomial `σ(x, y, z)` on a grid.

use nalgebra::{DMatrix, Matrix3, Rotation3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{cost_f, jacobi_multistart, JacobiConfig};
use crate::parallel::map_indexed;
use crate::poly;
use crate::rotation::Slope;
use crate::tensor::generate::{derive_seed, rng_from_seed, sd2, symmetrizer_123};
use crate::tensor::OrthoMatrix;

/// `1/12`.
pub const RHO_BOUND: f64 = 1.0 / 12.0;

/// `ρ(Q) = Σ_i Q_i0² Q_i1² Q_i2²` for a 3 × 3 orthogonal `Q`.
pub fn rho(q: &OrthoMatrix) -> Result<f64> {
    if q.n() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: q.n(),
        });
    }
    let m = q.matrix();
    Ok(rho_rows(&Matrix3::from_fn(|i, j| m[(i, j)])))
}

fn rho_rows(m: &Matrix3<f64>) -> f64 {
    (0..3)
        .map(|i| (m[(i, 0)] * m[(i, 1)] * m[(i, 2)]).powi(2))
        .sum()
}

fn rot_x(c: f64, s: f64) -> Matrix3<f64> {
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_z(c: f64, s: f64) -> Matrix3<f64> {
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y(c: f64, s: f64) -> Matrix3<f64> {
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

fn cos_sin(t: Slope) -> (f64, f64) {
    match t {
        Slope::Finite(x) => {
            let r = (1.0 + x * x).sqrt();
            (1.0 / r, x / r)
        }
        Slope::Infinite => (0.0, 1.0),
    }
}

/// Rotation in the plane of coordinates 1 and 2 with slope `x`.
pub fn factor_q1(x: Slope) -> Matrix3<f64> {
    let (c, s) = cos_sin(x);
    rot_x(c, s)
}

/// Rotation in the plane of coordinates 0 and 1 with slope `y`.
pub fn factor_q2(y: Slope) -> Matrix3<f64> {
    let (c, s) = cos_sin(y);
    rot_z(c, s)
}

/// Rotation in the plane of coordinates 0 and 2 with slope `z`.
pub fn factor_q3(z: Slope) -> Matrix3<f64> {
    let (c, s) = cos_sin(z);
    rot_y(c, s)
}

/// Closed form of `ρ(Q)` for `Qᵀ = Q₁(x) Q₂(y) Q₃(z)`.
pub fn rho_xyz(x: f64, y: f64, z: f64) -> f64 {
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let (y4, z4) = (y2 * y2, z2 * z2);
    let num = (y4 * z2 + y2 * z2) * (x2 * x2 + 1.0)
        + 2.0 * (y2 + 1.0).sqrt() * y2 * y * (z2 * z - z) * (x2 * x - x)
        + (y4 * z4 - 4.0 * y4 * z2 + y4 + y2 * z4 + y2 + z2) * x2;
    num / ((1.0 + x2).powi(2) * (1.0 + y2).powi(3) * (1.0 + z2).powi(2))
}

/// `ρ` in the variables `u = x - 1/x`, `v = z - 1/z` and `y`.
#[allow(non_snake_case)]
pub fn Phi(u: f64, v: f64, y: f64) -> f64 {
    let (u2, v2, y2) = (u * u, v * v, y * y);
    let y4 = y2 * y2;
    let num = (y4 + y2) * u2
        + 2.0 * (y2 + 1.0).sqrt() * y2 * y * v * u
        + (y4 + y2) * (v2 + 4.0)
        + 1.0
        - 4.0 * y4;
    num / ((u2 + 4.0) * (v2 + 4.0) * (1.0 + y2).powi(3))
}

/// `Φ(u, ±u, y)` with the sign that maximizes it.
pub fn psi(u: f64, y: f64) -> f64 {
    let (u2, y2) = (u * u, y * y);
    let num = 2.0 * (y2 * y2 + y2 + (y2 + 1.0).sqrt() * y2 * y.abs()) * u2 + 4.0 * y2 + 1.0;
    num / ((u2 + 4.0).powi(2) * (1.0 + y2).powi(3))
}

/// Upper bound of `ψ` used for the final maximization.
pub fn phi(u: f64, y: f64) -> f64 {
    let (u2, y2) = (u * u, y * y);
    (4.0 * y2 * u2 * (1.0 + y2) + 4.0 * y2 + 1.0) / ((u2 + 4.0).powi(2) * (1.0 + y2).powi(3))
}

/// `φ` in the squared variables `s = u²`, `t = y²`.
fn phi_sq(s: f64, t: f64) -> f64 {
    (4.0 * t * s * (1.0 + t) + 4.0 * t + 1.0) / ((s + 4.0).powi(2) * (1.0 + t).powi(3))
}

/// Factorization `Qᵀ = Q₁(x) Q₂(y) Q₃(z) S` with `S` a diagonal sign matrix
/// of determinant +1. Slopes use angles in `(-π/2, π/2]`, so `S = I` holds
/// only on half of `SO(3)`; `ρ` ignores `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerFactors {
    pub x: Slope,
    pub y: Slope,
    pub z: Slope,
    pub signs: [f64; 3],
    /// `cos y` is below `1e-9`: `x` and `z` are then not individually
    /// determined, only the reconstruction is.
    pub gimbal: bool,
    /// `max |Qᵀ - Q₁ Q₂ Q₃ S|`.
    pub residual: f64,
}

impl EulerFactors {
    pub fn reconstruct(&self) -> Matrix3<f64> {
        factor_q1(self.x)
            * factor_q2(self.y)
            * factor_q3(self.z)
            * Matrix3::from_diagonal(&Vector3::from(self.signs))
    }
}

const GIMBAL_TOL: f64 = 1e-9;

fn wrap_half(angle: f64) -> (f64, bool) {
    use std::f64::consts::{FRAC_PI_2, PI};
    if angle > FRAC_PI_2 {
        (angle - PI, true)
    } else if angle <= -FRAC_PI_2 {
        (angle + PI, true)
    } else {
        (angle, false)
    }
}

fn slope_of(angle: f64) -> Slope {
    if angle == std::f64::consts::FRAC_PI_2 {
        Slope::Infinite
    } else {
        Slope::Finite(angle.tan())
    }
}

pub fn euler_factor(q: &OrthoMatrix) -> Result<EulerFactors> {
    if q.n() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: q.n(),
        });
    }
    if q.det_sign() != 1 {
        return Err(Error::NotSpecial { det: -1.0 });
    }
    let qm = q.matrix();
    let m = Matrix3::from_fn(|i, j| qm[(j, i)]);
    // m = X(α) Z(β) Y(γ) with m00 = cos β cos γ, m02 = -cos β sin γ.
    // γ is read first; N = m Y(γ)ᵀ = X(α) Z(β) holds exactly whatever the
    // accuracy of γ, so the reconstruction stays at rounding level even
    // near cos β = 0.
    let mut gamma = f64::atan2(-m[(0, 2)], m[(0, 0)]);
    let (cg, sg) = (gamma.cos(), gamma.sin());
    let nm = m * rot_y(cg, sg).transpose();
    let mut alpha = f64::atan2(-nm[(1, 2)], nm[(2, 2)]);
    let mut beta = f64::atan2(-nm[(0, 1)], nm[(0, 0)]);
    let gimbal = m[(0, 0)].hypot(m[(0, 2)]) < GIMBAL_TOL;
    let mut signs = [1.0, 1.0, 1.0];
    // X(α) = X(α ∓ π) X(π) and X(π) Z(β) Y(γ) = Z(-β) Y(-γ) X(π)
    let (a2, flipped) = wrap_half(alpha);
    if flipped {
        alpha = a2;
        beta = -beta;
        gamma = -gamma;
        signs[1] = -signs[1];
        signs[2] = -signs[2];
    }
    // Z(β) = Z(β ∓ π) Z(π) and Z(π) Y(γ) = Y(-γ) Z(π)
    let (b2, flipped) = wrap_half(beta);
    if flipped {
        beta = b2;
        gamma = -gamma;
        signs[0] = -signs[0];
        signs[1] = -signs[1];
    }
    // Y(γ) = Y(γ ∓ π) Y(π)
    let (g2, flipped) = wrap_half(gamma);
    if flipped {
        gamma = g2;
        signs[0] = -signs[0];
        signs[2] = -signs[2];
    }
    let mut out = EulerFactors {
        x: slope_of(alpha),
        y: slope_of(beta),
        z: slope_of(gamma),
        signs,
        gimbal,
        residual: 0.0,
    };
    out.residual = (out.reconstruct() - m).abs().max();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoSearchConfig {
    pub starts: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub max_iters: usize,
}

impl Default for RhoSearchConfig {
    fn default() -> Self {
        Self {
            starts: 10_000,
            seed: 0,
            threads: None,
            max_iters: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryBranch {
    /// `t = y²`, a positive root of `16t³ - 11t + 2`.
    pub t: f64,
    /// `u² = (8t² + 4t - 1) / (2t(t + 1))`.
    pub u2: f64,
    pub phi: f64,
    /// Residuals of `∂φ/∂y = 0` and `∂φ/∂u = 0` in polynomial form.
    pub residuals: [f64; 2],
}

/// Result of the stationary-point analysis and the numeric search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoAnalysis {
    pub label: String,
    pub bound: f64,
    pub branches: Vec<StationaryBranch>,
    /// `φ` at `u = y = 0` and at `u = 0, y² = 1/8`.
    pub degenerate_phi: Vec<f64>,
    pub phi_max: f64,
    pub best_rho: f64,
    pub best_q: Vec<Vec<f64>>,
    pub best_factors: EulerFactors,
    /// `|ρ(Q) - ρ(x, y, z)|` at the best point.
    pub recheck: f64,
    pub starts: usize,
    pub seed: u64,
    /// Every branch value, degenerate value and the search result lie
    /// below `1/12`, and the search stays under `phi_max + 1e-9`.
    pub pass: bool,
}

/// Positive roots of `16t³ - 11t + 2`, ascending.
pub fn stationary_cubic_roots() -> Vec<f64> {
    poly::real_roots(&[16.0, 0.0, -11.0, 2.0])
        .into_iter()
        .filter(|&t| t > 0.0)
        .collect()
}

pub fn stationary_branches() -> Vec<StationaryBranch> {
    stationary_cubic_roots()
        .into_iter()
        .map(|t| {
            let u2 = (8.0 * t * t + 4.0 * t - 1.0) / (2.0 * t * (t + 1.0));
            let (y, u) = (t.sqrt(), u2.max(0.0).sqrt());
            let r1 = y * (4.0 * u2 * t * t - 4.0 * u2 + 8.0 * t - 1.0);
            let r2 = u * (2.0 * u2 * t * t + 2.0 * u2 * t - 8.0 * t * t - 4.0 * t + 1.0);
            StationaryBranch {
                t,
                u2,
                phi: phi_sq(u2, t),
                residuals: [r1, r2],
            }
        })
        .collect()
}

/// Euclidean gradient of `ρ` (row form) with respect to the entries.
fn rho_grad(m: &Matrix3<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| {
        let others: f64 = (0..3).filter(|&k| k != j).map(|k| m[(i, k)].powi(2)).product();
        2.0 * m[(i, j)] * others
    })
}

/// Riemannian ascent on `SO(3)` along `Q exp(tΩ)` with backtracking.
fn rho_ascent(mut q: Matrix3<f64>, max_iters: usize) -> Matrix3<f64> {
    let mut val = rho_rows(&q);
    let mut step: f64 = 1.0;
    for _ in 0..max_iters {
        let g = rho_grad(&q);
        let a = q.transpose() * g;
        let omega = 0.5 * (a - a.transpose());
        let w = Vector3::new(omega[(2, 1)], omega[(0, 2)], omega[(1, 0)]);
        let slope = 2.0 * w.norm_squared();
        if slope.sqrt() < 1e-13 {
            break;
        }
        step = (step * 2.0).min(64.0);
        let mut moved = false;
        while step > 1e-12 {
            let cand = q * Rotation3::new(w * step).into_inner();
            let cv = rho_rows(&cand);
            if cv >= val + 1e-4 * step * slope {
                q = cand;
                val = cv;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    q
}

fn haar_so3(seed: u64) -> Matrix3<f64> {
    let o = OrthoMatrix::random_special(3, &mut rng_from_seed(seed));
    let m = o.matrix();
    Matrix3::from_fn(|i, j| m[(i, j)])
}

fn to_ortho(m: &Matrix3<f64>) -> OrthoMatrix {
    OrthoMatrix::with_tol(DMatrix::from_fn(3, 3, |i, j| m[(i, j)]), 1e-10)
        .expect("ascent stays on SO(3)")
}

/// Best `ρ` over a seeded multi-start ascent; ties go to the lower start.
pub fn rho_search(cfg: &RhoSearchConfig) -> (f64, Matrix3<f64>) {
    let runs = map_indexed(cfg.starts.max(1), cfg.threads, |s| {
        let q = rho_ascent(haar_so3(derive_seed(cfg.seed, s as u64)), cfg.max_iters);
        (rho_rows(&q), q)
    });
    runs.into_iter()
        .fold(None::<(f64, Matrix3<f64>)>, |best, (v, q)| match best {
            Some((bv, _)) if bv >= v => best,
            _ => Some((v, q)),
        })
        .expect("at least one start")
}

pub fn appendix_maximize(cfg: &RhoSearchConfig) -> Result<RhoAnalysis> {
    let branches = stationary_branches();
    let degenerate_phi = vec![phi_sq(0.0, 0.0), phi_sq(0.0, 0.125)];
    let phi_max = branches
        .iter()
        .map(|b| b.phi)
        .chain(degenerate_phi.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let (best_rho, best) = rho_search(cfg);
    let q = to_ortho(&best);
    let factors = euler_factor(&q)?;
    let recheck = match (factors.x, factors.y, factors.z) {
        (Slope::Finite(x), Slope::Finite(y), Slope::Finite(z)) => (rho(&q)? - rho_xyz(x, y, z)).abs(),
        _ => (rho(&q)? - rho_rows(&factors.reconstruct().transpose())).abs(),
    };
    let pass = branches.iter().all(|b| b.phi < RHO_BOUND)
        && degenerate_phi.iter().all(|&p| p < RHO_BOUND)
        && best_rho < RHO_BOUND
        && best_rho <= phi_max + 1e-9;
    Ok(RhoAnalysis {
        label: "numeric certificate".into(),
        bound: RHO_BOUND,
        branches,
        degenerate_phi,
        phi_max,
        best_rho,
        best_q: (0..3).map(|i| (0..3).map(|j| best[(i, j)]).collect()).collect(),
        best_factors: factors,
        recheck,
        starts: cfg.starts.max(1),
        seed: cfg.seed,
        pass,
    })
}

/// The permutation triple with `F(P*, Q*, R*) = 3` for the symmetrizer.
pub fn symmetrizer_factors() -> [OrthoMatrix; 3] {
    let perm = |rows: [[f64; 3]; 3]| {
        OrthoMatrix::new(DMatrix::from_fn(3, 3, |i, j| rows[i][j])).expect("permutation")
    };
    [
        OrthoMatrix::identity(3),
        perm([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
        perm([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    /// Random orthogonal matrices for the `f = 36ρ` identity.
    pub identity_samples: usize,
    /// Jacobi multi-start count for the supremum of `f`.
    pub starts: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub rho: RhoSearchConfig,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            identity_samples: 1000,
            starts: 10_000,
            seed: 0,
            threads: None,
            rho: RhoSearchConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    #[serde(rename = "F_star")]
    pub f_star: f64,
    /// `max |f(Q) - 36ρ(Q)|` over the samples (half of them improper).
    pub identity_max_err: f64,
    pub identity_samples: usize,
    /// Best `f` from Jacobi multi-start and from `36 ·` the `ρ` search.
    pub f_sup_found: f64,
    pub f_sup_jacobi: f64,
    pub rho_sup_found: f64,
    pub bound: f64,
    pub cubic_roots: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub rho_analysis: RhoAnalysis,
    pub pass: bool,
}

pub fn verify_counterexample(cfg: &CounterexampleConfig) -> Result<CounterexampleReport> {
    let a = symmetrizer_123();
    let [p, q, r] = symmetrizer_factors();
    let f_star = a.contract_modes(&p, &q, &r)?.diag_norm_sq();

    let mut rng = rng_from_seed(derive_seed(cfg.seed, u64::MAX));
    let mut identity_max_err: f64 = 0.0;
    for s in 0..cfg.identity_samples {
        let qs = if s % 2 == 0 {
            OrthoMatrix::random_special(3, &mut rng)
        } else {
            OrthoMatrix::random(3, &mut rng)
        };
        let err = (cost_f(&a, &qs)? - 36.0 * rho(&qs)?).abs();
        identity_max_err = identity_max_err.max(err);
    }

    let jcfg = JacobiConfig {
        record_trace: false,
        ..Default::default()
    };
    let ms = jacobi_multistart(&a, &jcfg, cfg.starts, cfg.seed, cfg.threads)?;
    let rho_analysis = appendix_maximize(&cfg.rho)?;
    let f_sup_found = ms.best.f_final.max(36.0 * rho_analysis.best_rho);
    let pass = (f_star - 3.0).abs() <= 1e-12
        && identity_max_err <= 1e-12
        && f_sup_found < 3.0
        && rho_analysis.pass;
    Ok(CounterexampleReport {
        f_star,
        identity_max_err,
        identity_samples: cfg.identity_samples,
        f_sup_found,
        f_sup_jacobi: ms.best.f_final,
        rho_sup_found: rho_analysis.best_rho,
        bound: RHO_BOUND,
        cubic_roots: rho_analysis.branches.iter().map(|b| b.t).collect(),
        phi_values: rho_analysis.branches.iter().map(|b| b.phi).collect(),
        rho_analysis,
        pass,
    })
}

/// `σ(x, y, z)` for ratio `γ`.
pub fn sigma(gamma: f64, x: f64, y: f64, z: f64) -> f64 {
    let sq = x * x + y * y + z * z + x * x * y * y + y * y * z * z + z * z * x * x;
    let mixed = x * x * y * z + x * y * y * z + x * y * z * z + x * y + y * z + z * x;
    (gamma - 1.0) * sq + 2.0 * gamma * mixed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dim2Config {
    /// Grid points per axis over `[-range, range]`.
    pub grid: usize,
    pub range: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for Dim2Config {
    fn default() -> Self {
        Self {
            grid: 50,
            range: 5.0,
            samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dim2Report {
    pub a: f64,
    pub d: f64,
    pub gamma: f64,
    pub points: usize,
    pub max_sigma: f64,
    /// `max F(x, y, z) - (a² + d²)`.
    pub max_excess: f64,
    /// `max |F_direct - F_formula|`.
    pub formula_err: f64,
    pub holds: bool,
}

/// Checks that `(I, I, I)` maximizes `F` for the 2-dimensional JD tensor
/// with `A_000 = a`, `A_111 = d` and ratio `γ`.
pub fn verify_dim2_gmd_equals_md(a: f64, d: f64, gamma: f64, cfg: &Dim2Config) -> Result<Dim2Report> {
    if !(-1.0..=1.0 / 3.0).contains(&gamma) {
        return Err(Error::NotJacobiDiagonal {
            reason: format!("ratio {gamma} outside [-1, 1/3]"),
        });
    }
    let t = sd2(a, d, gamma).to_dense();
    let base = a * a + d * d;
    let rot = |x: f64| {
        let r = (1.0 + x * x).sqrt();
        [[1.0 / r, -x / r], [x / r, 1.0 / r]]
    };
    let f_direct = |x: f64, y: f64, z: f64| -> f64 {
        let (p, q, r) = (rot(x), rot(y), rot(z));
        (0..2)
            .map(|i| {
                let mut w = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        for c in 0..2 {
                            w += t.get(a, b, c) * p[a][i] * q[b][i] * r[c][i];
                        }
                    }
                }
                w * w
            })
            .sum()
    };

    let mut points = Vec::with_capacity(cfg.grid.pow(3) + cfg.samples);
    let axis: Vec<f64> = (0..cfg.grid)
        .map(|k| {
            if cfg.grid == 1 {
                0.0
            } else {
                -cfg.range + 2.0 * cfg.range * k as f64 / (cfg.grid - 1) as f64
            }
        })
        .collect();
    for &x in &axis {
        for &y in &axis {
            for &z in &axis {
                points.push((x, y, z));
            }
        }
    }
    let mut rng = rng_from_seed(cfg.seed);
    for _ in 0..cfg.samples {
        points.push((
            rng.gen_range(-cfg.range..=cfg.range),
            rng.gen_range(-cfg.range..=cfg.range),
            rng.gen_range(-cfg.range..=cfg.range),
        ));
    }

    let mut max_sigma = f64::NEG_INFINITY;
    let mut max_excess = f64::NEG_INFINITY;
    let mut formula_err: f64 = 0.0;
    for &(x, y, z) in &points {
        let s = sigma(gamma, x, y, z);
        let fd = f_direct(x, y, z);
        let ff = base + base * (gamma + 1.0) * s / ((1.0 + x * x) * (1.0 + y * y) * (1.0 + z * z));
        max_sigma = max_sigma.max(s);
        max_excess = max_excess.max(fd - base);
        formula_err = formula_err.max((fd - ff).abs());
    }
    Ok(Dim2Report {
        a,
        d,
        gamma,
        points: points.len(),
        max_sigma,
        max_excess,
        formula_err,
        holds: max_sigma <= 1e-12 && max_excess <= 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_of_identity_is_zero() {
        assert_eq!(rho(&OrthoMatrix::identity(3)).unwrap(), 0.0);
        assert!(rho(&OrthoMatrix::identity(4)).is_err());
    }

    #[test]
    fn x_zero_slice() {
        for &(y, z) in &[(0.3f64, -2.0f64), (1.0, 1.0), (5.0, 0.1)] {
            let want = (y * z) * (y * z) / ((1.0 + y * y).powi(2) * (1.0 + z * z).powi(2));
            assert!((rho_xyz(0.0, y, z) - want).abs() < 1e-15);
            assert!(want <= 1.0 / 16.0);
        }
    }

    #[test]
    fn euler_recovers_factors() {
        let m = factor_q1(Slope::Finite(0.3)) * factor_q2(Slope::Finite(-0.7)) * factor_q3(Slope::Finite(1.1));
        let q = OrthoMatrix::new(DMatrix::from_fn(3, 3, |i, j| m[(j, i)])).unwrap();
        let e = euler_factor(&q).unwrap();
        assert_eq!(e.signs, [1.0; 3]);
        for (got, want) in [(e.x, 0.3), (e.y, -0.7), (e.z, 1.1)] {
            assert!((got.finite().unwrap() - want).abs() < 1e-12);
        }
        let id = euler_factor(&OrthoMatrix::identity(3)).unwrap();
        assert_eq!((id.x, id.y, id.z), (Slope::Finite(0.0), Slope::Finite(0.0), Slope::Finite(0.0)));
    }

    #[test]
    fn euler_reconstructs_random_and_gimbal() {
        let mut rng = rng_from_seed(2);
        for _ in 0..200 {
            let q = OrthoMatrix::random_special(3, &mut rng);
            let e = euler_factor(&q).unwrap();
            assert!(e.residual < 1e-10, "{e:?}");
            if let (Slope::Finite(x), Slope::Finite(y), Slope::Finite(z)) = (e.x, e.y, e.z) {
                assert!((rho(&q).unwrap() - rho_xyz(x, y, z)).abs() < 1e-10);
            }
        }
        let m = factor_q1(Slope::Finite(0.4)) * factor_q2(Slope::Infinite) * factor_q3(Slope::Finite(-0.2));
        let q = OrthoMatrix::new(DMatrix::from_fn(3, 3, |i, j| m[(j, i)])).unwrap();
        let e = euler_factor(&q).unwrap();
        assert!(e.gimbal);
        assert_eq!(e.y, Slope::Infinite);
        assert!(e.residual < 1e-10);
    }

    #[test]
    fn phi_dominates_psi_and_psi_matches_big_phi() {
        let mut rng = rng_from_seed(3);
        for _ in 0..1000 {
            let u: f64 = rng.gen_range(-10.0..10.0);
            let y: f64 = rng.gen_range(-3.0..3.0);
            let p = psi(u, y);
            assert!(p <= phi(u, y) + 1e-15);
            assert!((p - Phi(u, u, y).max(Phi(u, -u, y))).abs() < 1e-14);
        }
    }

    #[test]
    fn big_phi_matches_rho_xyz() {
        for &(x, y, z) in &[(0.5, 0.7, -1.3), (2.0, -0.4, 3.0), (-0.8, 1.9, 0.6)] {
            let (u, v) = (x - 1.0 / x, z - 1.0 / z);
            assert!((Phi(u, v, y) - rho_xyz(x, y, z)).abs() < 1e-14);
        }
    }

    #[test]
    fn branches_are_stationary() {
        let b = stationary_branches();
        assert_eq!(b.len(), 2);
        for br in &b {
            assert!(br.residuals.iter().all(|r| r.abs() < 1e-9));
            assert!(br.phi < RHO_BOUND);
        }
    }

    #[test]
    fn small_search_stays_below_bound() {
        let cfg = RhoSearchConfig {
            starts: 200,
            ..Default::default()
        };
        let r = appendix_maximize(&cfg).unwrap();
        assert!(r.pass);
        assert!(r.recheck < 1e-10);
        assert!(r.best_rho > 0.06);
    }

    #[test]
    fn symmetrizer_permutations_reach_three() {
        let [p, q, r] = symmetrizer_factors();
        let f = symmetrizer_123().contract_modes(&p, &q, &r).unwrap().diag_norm_sq();
        assert_eq!(f, 3.0);
    }

    #[test]
    fn dim2_rejects_non_jd_ratio() {
        assert!(verify_dim2_gmd_equals_md(1.0, 1.0, 0.5, &Dim2Config::default()).is_err());
        let small = Dim2Config {
            grid: 11,
            samples: 100,
            ..Default::default()
        };
        let r = verify_dim2_gmd_equals_md(1.0, -2.0, 0.0, &small).unwrap();
        assert!(r.holds);
        assert!(r.formula_err < 1e-12);
    }
}
