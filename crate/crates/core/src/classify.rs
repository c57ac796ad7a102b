//! Membership tests for the approximate-diagonality classes and the
//! second-order certificate for local maximality of `Q = I`.
//!
//! Classes, from strongest to weakest: diagonal, pseudo diagonal (PD: all
//! `A_iij = A_ijj = 0`), stationary diagonal (SD: all `d_ij = 0`), Jacobi
//! diagonal (JD: SD and all `ω_ij ≥ 0`). Local maximality (LMD) is decided
//! from the Riemannian Hessian at the identity when it is definite, and
//! reported as inconclusive at the semidefinite boundary.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{jacobi_multistart, JacobiConfig};
use crate::rotation::pair_stats_unchecked;
use crate::tensor::{pair_index, row_pairs, OrthoMatrix, SkewMatrix, SymTensor3};

/// Tolerances shared by every verdict.
///
/// Residuals are compared against `rel_tol` scaled by `‖A‖` (entries) or
/// `‖A‖²` (products of entries). Hessian eigenvalues within
/// `eig_rel · ‖H‖₂` of zero are treated as zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub eig_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-9,
            eig_rel: 1e-8,
        }
    }
}

impl Tolerances {
    /// Threshold for residuals that scale like `‖A‖²`.
    fn quad(&self, a: &SymTensor3) -> f64 {
        self.abs_tol + self.rel_tol * a.norm_sq()
    }
}

/// A boolean verdict with the residual and threshold it was decided at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: bool,
    pub residual: f64,
    pub threshold: f64,
}

impl Verdict {
    fn at_most(residual: f64, threshold: f64) -> Self {
        Self {
            holds: residual <= threshold,
            residual,
            threshold,
        }
    }
}

/// Largest `|A_ijk|` over non-diagonal triples.
fn max_offdiag(a: &SymTensor3) -> f64 {
    a.entries()
        .filter(|&(i, j, k, _)| !(i == j && j == k))
        .map(|(.., v)| v.abs())
        .fold(0.0, f64::max)
}

/// Largest `max(|A_iij|, |A_ijj|)` over pairs.
fn max_pd_pattern(a: &SymTensor3) -> f64 {
    row_pairs(a.n())
        .map(|(i, j)| a.get(i, i, j).abs().max(a.get(i, j, j).abs()))
        .fold(0.0, f64::max)
}

pub fn is_diagonal(a: &SymTensor3, tol: f64) -> Verdict {
    Verdict::at_most(max_offdiag(a), tol * a.norm())
}

/// PD test: `max(|A_iij|, |A_ijj|) ≤ tol · ‖A‖` for every pair.
pub fn is_pseudo_diagonal(a: &SymTensor3, tol: f64) -> bool {
    pseudo_diagonal_verdict(a, tol).holds
}

pub fn pseudo_diagonal_verdict(a: &SymTensor3, tol: f64) -> Verdict {
    Verdict::at_most(max_pd_pattern(a), tol * a.norm())
}

/// SD test: residual `max |d_ij|`, accepted when `≤ tol · ‖A‖²`.
pub fn is_stationary_diagonal(a: &SymTensor3, tol: f64) -> (bool, f64) {
    let v = stationary_verdict(a, tol);
    (v.holds, v.residual)
}

pub fn stationary_verdict(a: &SymTensor3, tol: f64) -> Verdict {
    let residual = row_pairs(a.n())
        .map(|(i, j)| pair_stats_unchecked(a, i, j).d.abs())
        .fold(0.0, f64::max);
    Verdict::at_most(residual, tol * a.norm_sq())
}

/// Stationary diagonal ratio of one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum StationaryRatio {
    /// The 2-dimensional subtensor vanishes; the ratio is taken as 0.
    Zero,
    /// `A_iii = A_jjj = 0` while `(A_iij, A_ijj) ≠ 0`.
    Infinite,
    Finite(f64),
}

impl StationaryRatio {
    /// `γ` as a number, with the zero marker mapped to 0.
    pub fn value(self) -> Option<f64> {
        match self {
            StationaryRatio::Zero => Some(0.0),
            StationaryRatio::Infinite => None,
            StationaryRatio::Finite(g) => Some(g),
        }
    }
}

/// Pair indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub i: usize,
    pub j: usize,
    pub ratio: StationaryRatio,
}

/// Ratio `γ` with `A_ijj ≈ γ A_iii` and `A_iij ≈ γ A_jjj`, by least squares.
fn pair_ratio(a: &SymTensor3, i: usize, j: usize, tol: f64) -> StationaryRatio {
    let scale = tol * a.norm();
    let (aiii, ajjj) = (a.get(i, i, i), a.get(j, j, j));
    let (aiij, aijj) = (a.get(i, i, j), a.get(i, j, j));
    let sub_norm = (aiii * aiii + ajjj * ajjj + 3.0 * aiij * aiij + 3.0 * aijj * aijj).sqrt();
    if sub_norm <= scale {
        StationaryRatio::Zero
    } else if aiii.abs() <= scale && ajjj.abs() <= scale {
        StationaryRatio::Infinite
    } else {
        StationaryRatio::Finite((aijj * aiii + aiij * ajjj) / (aiii * aiii + ajjj * ajjj))
    }
}

/// Stationary diagonal ratios for every pair; refuses tensors that are not SD.
pub fn stationary_ratios(a: &SymTensor3, tol: f64) -> Result<Vec<PairRatio>> {
    let sd = stationary_verdict(a, tol);
    if !sd.holds {
        return Err(Error::NotStationaryDiagonal {
            residual: sd.residual,
        });
    }
    Ok(row_pairs(a.n())
        .map(|(i, j)| PairRatio {
            i,
            j,
            ratio: pair_ratio(a, i, j, tol),
        })
        .collect())
}

/// Per-pair quantities behind the JD verdict. Indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEvidence {
    pub i: usize,
    pub j: usize,
    pub d: f64,
    pub omega: f64,
    pub ratio: Option<StationaryRatio>,
    /// `ω ≥ -threshold`.
    pub omega_ok: bool,
    /// `γ ∈ [-1, 1/3]` widened by the image of the ω threshold; `None`
    /// when the tensor is not SD.
    pub gamma_ok: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JdEvidence {
    pub holds: bool,
    pub sd: Verdict,
    /// Threshold on `-ω`.
    pub threshold: f64,
    pub min_omega: f64,
    pub omega_route: bool,
    pub gamma_route: Option<bool>,
    /// Both routes agree on every pair whose ratio is finite.
    pub routes_agree: bool,
    pub pairs: Vec<PairEvidence>,
}

/// JD test: SD within `tol · ‖A‖²` and `ω_ij ≥ -tol · ‖A‖²` for all pairs.
///
/// The γ route checks `γ ∈ [-1, 1/3]` with the interval widened by
/// `threshold / (4(A_iii² + A_jjj²))`, the first-order image of the ω
/// threshold under `-ω = (3γ² + 2γ - 1)(A_iii² + A_jjj²)`.
pub fn is_jacobi_diagonal(a: &SymTensor3, tol: f64) -> (bool, JdEvidence) {
    let sd = stationary_verdict(a, tol);
    let threshold = tol * a.norm_sq();
    let mut pairs = Vec::new();
    let mut omega_route = true;
    let mut gamma_route = sd.holds;
    let mut routes_agree = true;
    let mut min_omega = f64::INFINITY;
    for (i, j) in row_pairs(a.n()) {
        let st = pair_stats_unchecked(a, i, j);
        let omega_ok = st.omega >= -threshold;
        min_omega = min_omega.min(st.omega);
        omega_route &= omega_ok;
        let (ratio, gamma_ok) = if sd.holds {
            let r = pair_ratio(a, i, j, tol);
            let ok = match r {
                StationaryRatio::Zero => true,
                StationaryRatio::Infinite => false,
                StationaryRatio::Finite(g) => {
                    let s = a.get(i, i, i).powi(2) + a.get(j, j, j).powi(2);
                    let widen = threshold / (4.0 * s);
                    (-1.0 - widen..=1.0 / 3.0 + widen).contains(&g)
                }
            };
            if !matches!(r, StationaryRatio::Infinite) && ok != omega_ok {
                routes_agree = false;
            }
            gamma_route &= ok;
            (Some(r), Some(ok))
        } else {
            (None, None)
        };
        pairs.push(PairEvidence {
            i,
            j,
            d: st.d,
            omega: st.omega,
            ratio,
            omega_ok,
            gamma_ok,
        });
    }
    let holds = sd.holds && omega_route;
    let ev = JdEvidence {
        holds,
        sd,
        threshold,
        min_omega: if pairs.is_empty() { 0.0 } else { min_omega },
        omega_route,
        gamma_route: sd.holds.then_some(gamma_route),
        routes_agree,
        pairs,
    };
    (holds, ev)
}

/// Hessian of `f` at `Q = I` as a quadratic form on skew coordinates.
///
/// Coordinates are the strictly-upper entries of `Δ` in row-major order
/// `(0,1), (0,2), …, (0,n-1), (1,2), …`.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianForm {
    pub n: usize,
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub min_eig: f64,
    pub max_eig: f64,
}

impl HessianForm {
    /// `ξᵀ H ξ` for the coordinates `ξ` of `Δ`.
    pub fn value(&self, delta: &SkewMatrix) -> f64 {
        let xi = nalgebra::DVector::from_column_slice(delta.params());
        (xi.transpose() * &self.matrix * &xi)[(0, 0)]
    }

    /// Largest `|λ|`.
    pub fn spectral_norm(&self) -> f64 {
        self.min_eig.abs().max(self.max_eig.abs())
    }
}

/// Builds `H` from the full-index sum
/// `6 Σ_ijk (3A_ijj A_kjj + 2A_jjj A_ikj - A_kii A_iii) Δ_ij Δ_kj`,
/// folding `Δ_ji = -Δ_ij` into the coordinates.
pub fn hessian_form_at_identity(a: &SymTensor3) -> HessianForm {
    let n = a.n();
    let m = n * n.saturating_sub(1) / 2;
    let mut h = DMatrix::<f64>::zeros(m, m);
    let coord = |i: usize, j: usize| -> (usize, f64) {
        if i < j {
            (pair_index(n, i, j), 1.0)
        } else {
            (pair_index(n, j, i), -1.0)
        }
    };
    for j in 0..n {
        for i in 0..n {
            if i == j {
                continue;
            }
            let (p, sp) = coord(i, j);
            for k in 0..n {
                if k == j {
                    continue;
                }
                let (q, sq) = coord(k, j);
                let c = 6.0
                    * (3.0 * a.get(i, j, j) * a.get(k, j, j)
                        + 2.0 * a.get(j, j, j) * a.get(i, k, j)
                        - a.get(k, i, i) * a.get(i, i, i));
                let v = 0.5 * c * sp * sq;
                h[(p, q)] += v;
                h[(q, p)] += v;
            }
        }
    }
    from_matrix(n, h)
}

fn from_matrix(n: usize, matrix: DMatrix<f64>) -> HessianForm {
    let eigenvalues: Vec<f64> = if matrix.nrows() == 0 {
        Vec::new()
    } else {
        let mut e: Vec<f64> = SymmetricEigen::new(matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(f64::total_cmp);
        e
    };
    let min_eig = eigenvalues.first().copied().unwrap_or(0.0);
    let max_eig = eigenvalues.last().copied().unwrap_or(0.0);
    HessianForm {
        n,
        matrix,
        eigenvalues,
        min_eig,
        max_eig,
    }
}

/// Evaluator of `Hess f(Q)(QΔ, QΔ)`.
///
/// With `U = A •₃ Qᵀ`, `V = A •₂ Qᵀ •₃ Qᵀ`, `X = V •₁ (QΔ)ᵀ`,
/// `Y = U •₁ (QΔ)ᵀ •₂ (QΔ)ᵀ` and `Z = V •₁ (QΔ²)ᵀ`,
/// the form is `6 Σ_j (3X_jjj² + 2Y_jjj W_jjj + Z_jjj W_jjj)`.
#[derive(Clone, Debug)]
pub struct HessianAt {
    q: DMatrix<f64>,
    u: crate::tensor::DenseTensor3,
    /// `V_pjj` stored as an `n × n` matrix indexed `(p, j)`.
    v: DMatrix<f64>,
    w_diag: Vec<f64>,
}

pub fn hessian_form_at(a: &SymTensor3, q: &OrthoMatrix) -> Result<HessianAt> {
    let n = a.n();
    if q.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: q.n(),
        });
    }
    let qm = q.matrix().clone();
    let u = a.to_dense().mode_product(&qm, 2);
    let mut v = DMatrix::zeros(n, n);
    let mut w_diag = vec![0.0; n];
    for j in 0..n {
        let col: Vec<f64> = qm.column(j).iter().copied().collect();
        let vj = a.apply2(&col, &col);
        for p in 0..n {
            v[(p, j)] = vj[p];
        }
        w_diag[j] = vj.iter().zip(&col).map(|(x, y)| x * y).sum();
    }
    Ok(HessianAt { q: qm, u, v, w_diag })
}

impl HessianAt {
    pub fn value(&self, delta: &SkewMatrix) -> f64 {
        let n = self.w_diag.len();
        let dm = delta.to_matrix();
        let b = &self.q * &dm;
        let b2 = &self.q * (&dm * &dm);
        let mut acc = 0.0;
        for j in 0..n {
            let mut x = 0.0;
            let mut z = 0.0;
            for p in 0..n {
                x += b[(p, j)] * self.v[(p, j)];
                z += b2[(p, j)] * self.v[(p, j)];
            }
            let mut y = 0.0;
            for p in 0..n {
                for r in 0..n {
                    y += b[(p, j)] * b[(r, j)] * self.u.get(p, r, j);
                }
            }
            let w = self.w_diag[j];
            acc += 3.0 * x * x + 2.0 * y * w + z * w;
        }
        6.0 * acc
    }
}

/// `M_A` of a JD tensor of dimension 3 together with its eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanHessian3 {
    pub m: Matrix3<f64>,
    pub eigenvalues: [f64; 3],
}

/// `M_A` in terms of `a, b, c = A_000, A_111, A_222`, `g = A_012` and the
/// ratios `γ₁₂, γ₁₃, γ₂₃` of pairs `(0,1), (0,2), (1,2)`. On skew
/// coordinates `ξ = (u, v, w)` the Hessian form at `I` is `6 ξᵀ M_A ξ`.
pub fn euclidean_hessian_matrix_3(a: &SymTensor3, tol: f64) -> Result<EuclideanHessian3> {
    if a.n() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: a.n(),
        });
    }
    let (jd, ev) = is_jacobi_diagonal(a, tol);
    if !jd {
        return Err(Error::NotJacobiDiagonal {
            reason: format!(
                "sd residual {:e}, min omega {:e}, threshold {:e}",
                ev.sd.residual, ev.min_omega, ev.threshold
            ),
        });
    }
    let gam = |p: usize| -> Result<f64> {
        ev.pairs[p]
            .ratio
            .and_then(StationaryRatio::value)
            .ok_or_else(|| Error::NotJacobiDiagonal {
                reason: "infinite stationary ratio".into(),
            })
    };
    let (g12, g13, g23) = (gam(0)?, gam(1)?, gam(2)?);
    let (ea, eb, ec, g) = (a.get(0, 0, 0), a.get(1, 1, 1), a.get(2, 2, 2), a.get(0, 1, 2));
    let p = |t: f64| 3.0 * t * t + 2.0 * t - 1.0;
    let m12 = 2.0 * g * ea + (3.0 * g12 * g13 - g23) * eb * ec;
    let m13 = -2.0 * g * eb - (3.0 * g23 * g12 - g13) * ec * ea;
    let m23 = 2.0 * g * ec + (3.0 * g13 * g23 - g12) * ea * eb;
    let m = Matrix3::new(
        p(g12) * (ea * ea + eb * eb),
        m12,
        m13,
        m12,
        p(g13) * (ec * ec + ea * ea),
        m23,
        m13,
        m23,
        p(g23) * (eb * eb + ec * ec),
    );
    let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    Ok(EuclideanHessian3 {
        m,
        eigenvalues: [e[0], e[1], e[2]],
    })
}

/// Evidence that `Q = I` is not a local maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A single rotation on pair `(i, j)` (0-based) increases `f`.
    FirstOrder { i: usize, j: usize, d: f64, omega: f64 },
    /// Skew direction with `Hess f(I)(Δ, Δ) > 0`; `params` are the
    /// strictly-upper entries in row-major order.
    Direction { params: Vec<f64>, value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum LmdCertificate {
    DefiniteYes { max_eig: f64, eig_tol: f64 },
    DefiniteNo { witness: Witness, eig_tol: f64 },
    Inconclusive { max_eig: f64, eig_tol: f64 },
}

impl LmdCertificate {
    pub fn label(&self) -> &'static str {
        match self {
            LmdCertificate::DefiniteYes { .. } => "definite-yes",
            LmdCertificate::DefiniteNo { .. } => "definite-no",
            LmdCertificate::Inconclusive { .. } => "inconclusive",
        }
    }
}

pub fn lmd_certificate(a: &SymTensor3, tols: &Tolerances) -> LmdCertificate {
    let (jd, ev) = is_jacobi_diagonal(a, tols.rel_tol);
    if !jd {
        // the pair with the largest first-order or second-order violation
        let worst = ev
            .pairs
            .iter()
            .max_by(|x, y| {
                let key = |p: &PairEvidence| {
                    if ev.sd.holds {
                        -p.omega
                    } else {
                        p.d.abs()
                    }
                };
                key(x).total_cmp(&key(y))
            })
            .expect("JD fails only when a pair exists");
        return LmdCertificate::DefiniteNo {
            witness: Witness::FirstOrder {
                i: worst.i,
                j: worst.j,
                d: worst.d,
                omega: worst.omega,
            },
            eig_tol: 0.0,
        };
    }
    let h = hessian_form_at_identity(a);
    certificate_from_form(&h, tols)
}

fn certificate_from_form(h: &HessianForm, tols: &Tolerances) -> LmdCertificate {
    let eig_tol = tols.eig_rel * h.spectral_norm();
    if h.matrix.nrows() == 0 {
        return LmdCertificate::Inconclusive {
            max_eig: 0.0,
            eig_tol,
        };
    }
    if h.max_eig < -eig_tol {
        LmdCertificate::DefiniteYes {
            max_eig: h.max_eig,
            eig_tol,
        }
    } else if h.max_eig > eig_tol {
        let eig = SymmetricEigen::new(h.matrix.clone());
        let (idx, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .expect("nonempty");
        let params: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let delta = SkewMatrix::new(h.n, params.clone()).expect("sized from n");
        let value = h.value(&delta);
        LmdCertificate::DefiniteNo {
            witness: Witness::Direction { params, value },
            eig_tol,
        }
    } else {
        LmdCertificate::Inconclusive {
            max_eig: h.max_eig,
            eig_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZEigenReport {
    pub holds: bool,
    /// `λ_i = A(u_i, u_i, u_i)`.
    pub eigenvalues: Vec<f64>,
    /// Largest `|A(u_i, u_i, u_j)|`, `i ≠ j`.
    pub max_cross: f64,
    pub threshold: f64,
    /// `contract_all(A, U)` passes the PD test at the same tolerance.
    pub contracted_pd: bool,
}

/// Checks that the columns of `U` are Z-eigenvectors: `A•u_i•u_i•u_j = 0`
/// for `i ≠ j`, within `tol · ‖A‖`.
pub fn verify_z_eigenbasis(a: &SymTensor3, u: &OrthoMatrix, tol: f64) -> Result<ZEigenReport> {
    let w = a.contract_all(u)?;
    let max_cross = max_pd_pattern(&w);
    let threshold = tol * a.norm();
    Ok(ZEigenReport {
        holds: max_cross <= threshold,
        eigenvalues: w.diag(),
        max_cross,
        threshold,
        contracted_pd: is_pseudo_diagonal(&w, tol),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdecoReport {
    pub holds: bool,
    pub z: ZEigenReport,
    /// Largest `|W_ijk|` over distinct `i < j < k`.
    pub max_distinct: f64,
}

/// Odeco test for a given basis: Z-eigenbasis and `W_ijk ≈ 0` for distinct
/// indices, where `W = contract_all(A, U)`.
pub fn verify_odeco_given_basis(a: &SymTensor3, u: &OrthoMatrix, tol: f64) -> Result<OdecoReport> {
    let z = verify_z_eigenbasis(a, u, tol)?;
    let w = a.contract_all(u)?;
    let max_distinct = w
        .entries()
        .filter(|&(i, j, k, _)| i < j && j < k)
        .map(|(.., v)| v.abs())
        .fold(0.0, f64::max);
    Ok(OdecoReport {
        holds: z.holds && max_distinct <= z.threshold,
        max_distinct,
        z,
    })
}

/// Multi-start search for a rotation beating `Q = I`. Heuristic only: a
/// negative result does not prove global maximality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdSearch {
    pub label: String,
    pub starts: usize,
    pub seed: u64,
    pub f_identity: f64,
    pub best_f: f64,
    pub best_start: usize,
    /// Some start ended above `f(I)` by more than the tolerance.
    pub found_better: bool,
    pub threshold: f64,
}

pub fn md_search(
    a: &SymTensor3,
    tols: &Tolerances,
    starts: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<MdSearch> {
    let cfg = JacobiConfig {
        record_trace: false,
        ..Default::default()
    };
    let ms = jacobi_multistart(a, &cfg, starts, seed, threads)?;
    let f_identity = a.diag_norm_sq();
    let threshold = tols.quad(a);
    Ok(MdSearch {
        label: "heuristic".into(),
        starts: starts.max(1),
        seed,
        f_identity,
        best_f: ms.best.f_final,
        best_start: ms.best_index,
        found_better: ms.best.f_final > f_identity + threshold,
        threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianSummary {
    /// Row-major rows of `H`.
    pub matrix: Vec<Vec<f64>>,
    pub min_eig: f64,
    pub max_eig: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub n: usize,
    pub norm: f64,
    pub tolerances: Tolerances,
    pub diagonal: Verdict,
    pub pd: Verdict,
    pub sd: Verdict,
    pub jd: JdEvidence,
    pub ratios: Option<Vec<PairRatio>>,
    pub hessian: HessianSummary,
    pub lmd: LmdCertificate,
    pub md_search: Option<MdSearch>,
}

/// Runs every test and checks `pd ⇒ sd`, `jd ⇒ sd`, `definite-yes ⇒ jd`
/// and the agreement of the two JD routes.
///
/// The entry-level tests (diagonal, PD) run at half the relative tolerance
/// so that `|d| ≤ |A_iii||A_iij| + |A_ijj||A_jjj|` carries a PD verdict
/// into the SD threshold.
pub fn class_report(a: &SymTensor3, tols: &Tolerances) -> Result<ClassReport> {
    let entry_tol = 0.5 * tols.rel_tol;
    let diagonal = is_diagonal(a, entry_tol);
    let pd = pseudo_diagonal_verdict(a, entry_tol);
    let (jd_holds, jd) = is_jacobi_diagonal(a, tols.rel_tol);
    let sd = jd.sd;
    let ratios = stationary_ratios(a, tols.rel_tol).ok();
    let h = hessian_form_at_identity(a);
    let lmd = if jd_holds {
        certificate_from_form(&h, tols)
    } else {
        lmd_certificate(a, tols)
    };
    let hessian = HessianSummary {
        matrix: h
            .matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        min_eig: h.min_eig,
        max_eig: h.max_eig,
    };

    let mut problems = Vec::new();
    if pd.holds && !sd.holds {
        problems.push("pd without sd");
    }
    if diagonal.holds && !pd.holds {
        problems.push("diagonal without pd");
    }
    if jd_holds && !sd.holds {
        problems.push("jd without sd");
    }
    if matches!(lmd, LmdCertificate::DefiniteYes { .. }) && !jd_holds {
        problems.push("definite-yes without jd");
    }
    if !jd.routes_agree {
        problems.push("gamma and omega routes disagree");
    }
    if !problems.is_empty() {
        return Err(Error::Inconsistent(problems.join(", ")));
    }
    Ok(ClassReport {
        n: a.n(),
        norm: a.norm(),
        tolerances: *tols,
        diagonal,
        pd,
        sd,
        jd,
        ratios,
        hessian,
        lmd,
        md_search: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::cost_f;
    use crate::tensor::expm_skew;
    use crate::tensor::generate::{
        lmd3, pd4_three_quarters, random_odeco_parts, random_pd, random_symmetric, rng_from_seed,
        sd3, symmetrizer_123,
    };

    const TOL: f64 = 1e-9;

    #[test]
    fn pd_examples() {
        assert!(is_pseudo_diagonal(&symmetrizer_123(), TOL));
        let mut a = SymTensor3::zeros(3);
        a.set(0, 0, 1, 1.0);
        assert!(!is_pseudo_diagonal(&a, TOL));
        let mut d = SymTensor3::zeros(3);
        d.set(1, 1, 1, 2.0);
        assert!(is_pseudo_diagonal(&d, TOL));
    }

    #[test]
    fn sd_examples() {
        let (ok, res) = is_stationary_diagonal(&random_pd(4, 1).unwrap(), TOL);
        assert!(ok);
        assert_eq!(res, 0.0);
        let mut a = SymTensor3::zeros(2);
        a.set(0, 0, 0, 1.0);
        a.set(1, 1, 1, 1.0);
        a.set(0, 0, 1, 1e-3);
        assert!(!is_stationary_diagonal(&a, TOL).0);
    }

    #[test]
    fn ratio_markers() {
        let pd = random_pd(4, 2).unwrap();
        for r in stationary_ratios(&pd, TOL).unwrap() {
            assert_eq!(r.ratio.value(), Some(0.0));
        }
        let a = sd3([1.0, 1.0, 0.0], [0.37, 0.0, 0.0], 0.0);
        assert_eq!(stationary_ratios(&a, TOL).unwrap()[0].ratio, StationaryRatio::Finite(0.37));
        let mut b = SymTensor3::zeros(2);
        b.set(0, 0, 1, 1.0);
        b.set(0, 1, 1, 1.0);
        assert_eq!(stationary_ratios(&b, TOL).unwrap()[0].ratio, StationaryRatio::Infinite);
        let mut c = SymTensor3::zeros(2);
        c.set(0, 0, 0, 1.0);
        c.set(0, 0, 1, 0.5);
        assert!(matches!(
            stationary_ratios(&c, TOL),
            Err(Error::NotStationaryDiagonal { .. })
        ));
    }

    #[test]
    fn jd_boundary_and_outside() {
        let a = sd3([1.0, 2.0, -1.5], [1.0 / 3.0; 3], 0.2);
        let (jd, ev) = is_jacobi_diagonal(&a, TOL);
        assert!(jd);
        assert!(ev.routes_agree);
        let b = sd3([1.0, 2.0, -1.5], [0.5, 0.0, 0.0], 0.2);
        let (jd, ev) = is_jacobi_diagonal(&b, TOL);
        assert!(!jd);
        assert_eq!(ev.gamma_route, Some(false));
        assert!(ev.routes_agree);
    }

    #[test]
    fn pd4_hessian_value_is_eighteen() {
        let h = hessian_form_at_identity(&pd4_three_quarters());
        let delta = SkewMatrix::new(4, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((h.value(&delta) - 18.0).abs() < 1e-12);
        match lmd_certificate(&pd4_three_quarters(), &Tolerances::default()) {
            LmdCertificate::DefiniteNo {
                witness: Witness::Direction { value, .. },
                ..
            } => assert!(value > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_form_matches_evaluator() {
        let mut rng = rng_from_seed(4);
        for seed in 0..5 {
            let a = random_symmetric(5, seed).unwrap();
            let h = hessian_form_at_identity(&a);
            let ev = hessian_form_at(&a, &OrthoMatrix::identity(5)).unwrap();
            for _ in 0..5 {
                let d = SkewMatrix::random(5, &mut rng);
                let (x, y) = (h.value(&d), ev.value(&d));
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn evaluator_matches_second_differences() {
        let mut rng = rng_from_seed(5);
        for seed in 0..5 {
            let a = random_symmetric(4, seed).unwrap();
            let q = OrthoMatrix::random_special(4, &mut rng);
            let d = SkewMatrix::random(4, &mut rng);
            let ev = hessian_form_at(&a, &q).unwrap().value(&d);
            let t = 1e-4;
            let f = |s: f64| cost_f(&a, &q.mul(&expm_skew(&d.scaled(s))).unwrap()).unwrap();
            let fd = (f(t) - 2.0 * f(0.0) + f(-t)) / (t * t);
            assert!((fd - ev).abs() <= 1e-5 * ev.abs().max(1.0), "{fd} vs {ev}");
        }
    }

    #[test]
    fn elementary_direction_gives_minus_six_omega() {
        let a = random_symmetric(4, 8).unwrap();
        let h = hessian_form_at_identity(&a);
        for (i, j) in row_pairs(4) {
            let st = pair_stats_unchecked(&a, i, j);
            let v = h.value(&SkewMatrix::elementary(4, i, j));
            assert!((v + 6.0 * st.omega).abs() < 1e-10);
        }
    }

    #[test]
    fn euclidean_matrix_matches_form() {
        let mut rng = rng_from_seed(6);
        for &(g, gm) in &[(0.3, [0.1, -0.5, 0.2]), (-0.2, [1.0 / 3.0, -1.0, 0.0])] {
            let a = sd3([1.2, -0.7, 2.0], gm, g);
            let m = euclidean_hessian_matrix_3(&a, TOL).unwrap().m;
            let h = hessian_form_at_identity(&a);
            for _ in 0..5 {
                let d = SkewMatrix::random(3, &mut rng);
                let xi = nalgebra::Vector3::from_column_slice(d.params());
                let want = 6.0 * (xi.transpose() * m * xi)[(0, 0)];
                assert!((h.value(&d) - want).abs() < 1e-9 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn euclidean_matrix_rejections() {
        assert!(euclidean_hessian_matrix_3(&random_pd(4, 1).unwrap(), TOL).is_err());
        let a = sd3([1.0, 1.0, 1.0], [0.5, 0.0, 0.0], 0.0);
        assert!(matches!(
            euclidean_hessian_matrix_3(&a, TOL),
            Err(Error::NotJacobiDiagonal { .. })
        ));
        let d = sd3([1.0, 2.0, 3.0], [0.0; 3], 0.0);
        let m = euclidean_hessian_matrix_3(&d, TOL).unwrap().m;
        assert_eq!(m, Matrix3::from_diagonal(&nalgebra::Vector3::new(-5.0, -10.0, -13.0)));
    }

    #[test]
    fn lmd_interval_for_g() {
        let t = Tolerances::default();
        let yes = |g: f64| matches!(lmd_certificate(&lmd3(g, 0.0), &t), LmdCertificate::DefiniteYes { .. });
        let no = |g: f64| matches!(lmd_certificate(&lmd3(g, 0.0), &t), LmdCertificate::DefiniteNo { .. });
        assert!(yes(0.0) && yes(0.9) && yes(-0.4));
        assert!(no(1.5) && no(-0.6));
        assert!(matches!(lmd_certificate(&lmd3(1.0, 0.0), &t), LmdCertificate::Inconclusive { .. }));
    }

    #[test]
    fn z_eigenbasis_and_odeco() {
        let o = random_odeco_parts(4, 3).unwrap();
        let z = verify_z_eigenbasis(&o.tensor, &o.basis, TOL).unwrap();
        assert!(z.holds);
        for (l, w) in z.eigenvalues.iter().zip(&o.weights) {
            assert!((l - w).abs() < 1e-10);
        }
        assert!(verify_odeco_given_basis(&o.tensor, &o.basis, TOL).unwrap().holds);
        let s = symmetrizer_123();
        let id = OrthoMatrix::identity(3);
        assert!(verify_z_eigenbasis(&s, &id, TOL).unwrap().holds);
        assert!(!verify_odeco_given_basis(&s, &id, TOL).unwrap().holds);
        assert!(!verify_z_eigenbasis(&random_symmetric(3, 1).unwrap(), &id, TOL).unwrap().holds);
    }

    #[test]
    fn report_examples() {
        let t = Tolerances::default();
        let d = sd3([1.0, 2.0, 3.0], [0.0; 3], 0.0);
        let r = class_report(&d, &t).unwrap();
        assert!(r.diagonal.holds && r.pd.holds && r.sd.holds && r.jd.holds);
        assert!(matches!(r.lmd, LmdCertificate::DefiniteYes { .. }));
        let r = class_report(&lmd3(0.75, 0.0), &t).unwrap();
        assert!(r.jd.holds && !r.diagonal.holds);
        assert!(matches!(r.lmd, LmdCertificate::DefiniteYes { .. }));
        let r = class_report(&random_symmetric(4, 3).unwrap(), &t).unwrap();
        assert!(!r.sd.holds && !r.pd.holds && !r.jd.holds);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["sd"]["threshold"].as_f64().unwrap() > 0.0);
    }
}
