//! Jacobi-type maximization of the diagonal norm.
//!
//! [`jacobi_com`] runs cyclic (or greedy) sweeps of single-pair Givens
//! rotations on a symmetric tensor, each rotation the global maximizer of its
//! one-dimensional objective. [`maximize_trifactor`] does the same for the
//! three-factor objective `F(P, Q, R) = ‖diag(A •₁ Pᵀ •₂ Qᵀ •₃ Rᵀ)‖²`.
//!
//! A rotation is committed only when the recomputed objective does not drop,
//! so the recorded `f_k` is nondecreasing in floating point. When rounding
//! hides a very small gain the solver retries with a handful of angles just
//! below the optimum (the gain is flat there to second order).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classify::{lmd_certificate, LmdCertificate, Tolerances};
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::rotation::{optimal_angle_with, pair_stats_unchecked, restore, rotate_in_place, Slope};
use crate::tensor::generate::{derive_seed, rng_from_seed};
use crate::tensor::{row_pairs, DenseTensor3, OrthoMatrix, SymTensor3};

/// Re-orthonormalize the accumulated `Q` after this many rotations.
const REORTHO_EVERY: usize = 1000;

/// Relative angle shrink factors tried when rounding rejects the optimum.
const RETRY_SHRINK: [f64; 6] = [1e-6, 2e-6, 5e-6, 1e-5, 3e-5, 1e-4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairRule {
    /// `(0,1), (0,2), …, (0,n-1), (1,2), …` repeated.
    Cyclic,
    /// Pair with the largest `|d|` at every step; `n(n-1)/2` steps per sweep.
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiConfig {
    pub max_sweeps: usize,
    /// Stop once every pair has `|d| ≤ stop_tol · max(1, ‖A‖²)` and
    /// `ω ≥ -stop_tol · max(1, ‖A‖²)`.
    pub stop_tol: f64,
    pub pair_rule: PairRule,
    pub restrict_quarter_pi: bool,
    pub record_trace: bool,
}

impl Default for JacobiConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            stop_tol: 1e-12,
            pair_rule: PairRule::Cyclic,
            restrict_quarter_pi: false,
            record_trace: true,
        }
    }
}

impl JacobiConfig {
    fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be at least 1".into()));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidArgument("stop_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Tolerance actually applied for a tensor of squared norm `norm_sq`.
pub fn effective_tol(stop_tol: f64, norm_sq: f64) -> f64 {
    stop_tol * norm_sq.max(1.0)
}

/// One Jacobi step. Indices are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub sweep: usize,
    pub i: usize,
    pub j: usize,
    pub x: Slope,
    pub theta: f64,
    /// `d_ij` and `ω_ij` of the tensor before the step.
    pub d: f64,
    pub omega: f64,
    /// Predicted gain of the optimal rotation.
    pub gain: f64,
    /// `‖diag W‖²` after the step.
    pub f: f64,
    pub applied: bool,
    /// FNV-1a hash of the bits of `Q_k`.
    pub q_hash: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sweep: usize,
    pub rotations: usize,
    /// Rotations that rounding forced onto a shrunken angle.
    pub retried: usize,
    /// Rotations skipped because no tried angle kept `f` from dropping.
    pub rejected: usize,
    /// Largest `|d_k|` seen before each step of this sweep.
    pub max_abs_d: f64,
    /// `max |d_ij|` and `min ω_ij` over all pairs after the sweep.
    pub end_max_abs_d: f64,
    pub end_min_omega: f64,
    pub f: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxSweeps,
}

#[derive(Clone, Debug)]
pub struct JacobiTrace {
    pub records: Vec<IterationRecord>,
    pub sweeps: Vec<SweepSummary>,
    pub q: OrthoMatrix,
    pub w: SymTensor3,
    pub status: Status,
    pub f_initial: f64,
    pub f_final: f64,
    /// Tolerance the stop rule was applied at.
    pub tol: f64,
    pub rotations: usize,
}

impl JacobiTrace {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// CSV with header `k,i,j,theta,x,d,omega,f` and 1-based pair indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,i,j,theta,x,d,omega,f\n");
        for r in &self.records {
            let x = match r.x {
                Slope::Finite(x) => format!("{x:.16e}"),
                Slope::Infinite => "inf".to_string(),
            };
            out.push_str(&format!(
                "{},{},{},{:.16e},{},{:.16e},{:.16e},{:.16e}\n",
                r.k,
                r.i + 1,
                r.j + 1,
                r.theta,
                x,
                r.d,
                r.omega,
                r.f
            ));
        }
        out
    }

    /// JSON mirror of the records and sweep summaries.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            status: Status,
            tol: f64,
            f_initial: f64,
            f_final: f64,
            rotations: usize,
            sweeps: &'a [SweepSummary],
            records: &'a [IterationRecord],
        }
        Ok(serde_json::to_string_pretty(&Out {
            status: self.status,
            tol: self.tol,
            f_initial: self.f_initial,
            f_final: self.f_final,
            rotations: self.rotations,
            sweeps: &self.sweeps,
            records: &self.records,
        })?)
    }
}

/// FNV-1a over the little-endian bytes of every entry.
pub fn matrix_hash(m: &DMatrix<f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in m.iter() {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "dimension must be at least 2, got {n}"
        )));
    }
    Ok(())
}

/// `f(Q) = ‖diag(A •₁ Qᵀ •₂ Qᵀ •₃ Qᵀ)‖² = Σ_i A(q_i, q_i, q_i)²`.
pub fn cost_f(a: &SymTensor3, q: &OrthoMatrix) -> Result<f64> {
    if a.n() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: q.n(),
        });
    }
    let m = q.matrix();
    Ok((0..a.n())
        .map(|i| {
            let col: Vec<f64> = m.column(i).iter().copied().collect();
            a.form(&col, &col, &col).powi(2)
        })
        .sum())
}

/// Riemannian gradient of `f` at `Q`.
#[derive(Clone, Debug)]
pub struct Gradient {
    /// Skew matrix `Λ_kl = 3(W_lll W_llk - W_lkk W_kkk)`.
    pub lambda: DMatrix<f64>,
    /// `QΛ`.
    pub grad: DMatrix<f64>,
    /// Frobenius norm of `Λ`.
    pub norm: f64,
}

pub fn riemannian_gradient(a: &SymTensor3, q: &OrthoMatrix) -> Result<Gradient> {
    let w = a.contract_all(q)?;
    let n = w.n();
    let lambda = DMatrix::from_fn(n, n, |k, l| {
        3.0 * (w.get(l, l, l) * w.get(l, l, k) - w.get(l, k, k) * w.get(k, k, k))
    });
    let grad = q.matrix() * &lambda;
    let norm = lambda.norm();
    Ok(Gradient { lambda, grad, norm })
}

pub fn jacobi_com(a: &SymTensor3, cfg: &JacobiConfig) -> Result<JacobiTrace> {
    jacobi_com_from(a, &OrthoMatrix::identity(a.n()), cfg)
}

/// Runs the sweeps on `W₀ = contract_all(A, Q₀)` and accumulates `Q₀ G₁ G₂ …`.
pub fn jacobi_com_from(a: &SymTensor3, q0: &OrthoMatrix, cfg: &JacobiConfig) -> Result<JacobiTrace> {
    cfg.validate()?;
    let n = a.n();
    check_n(n)?;
    let mut w = a.contract_all(q0)?;
    let mut q = q0.clone();
    let tol = effective_tol(cfg.stop_tol, a.norm_sq());
    let pairs: Vec<(usize, usize)> = row_pairs(n).collect();

    let f_initial = w.diag_norm_sq();
    let mut f = f_initial;
    let mut records = Vec::new();
    let mut sweeps = Vec::new();
    let mut status = Status::MaxSweeps;
    let mut k = 0usize;
    let mut rotations = 0usize;
    let mut since_reortho = 0usize;

    for sweep in 1..=cfg.max_sweeps {
        let mut summary = SweepSummary {
            sweep,
            rotations: 0,
            retried: 0,
            rejected: 0,
            max_abs_d: 0.0,
            end_max_abs_d: 0.0,
            end_min_omega: 0.0,
            f,
        };
        for step in 0..pairs.len() {
            let (i, j) = match cfg.pair_rule {
                PairRule::Cyclic => pairs[step],
                PairRule::Greedy => greedy_pair(&w, &pairs),
            };
            let stats = pair_stats_unchecked(&w, i, j);
            let sol = optimal_angle_with(&stats, cfg.restrict_quarter_pi);
            summary.max_abs_d = summary.max_abs_d.max(stats.d.abs());
            k += 1;

            let mut applied = false;
            let mut theta = sol.theta;
            if sol.gain > 0.0 {
                match commit_rotation(&mut w, i, j, sol.theta, f) {
                    Some((used, f_new, retried)) => {
                        theta = used;
                        f = f_new;
                        applied = true;
                        summary.retried += retried as usize;
                        let (s, c) = used.sin_cos();
                        q.rotate_columns(i, j, c, s);
                        rotations += 1;
                        summary.rotations += 1;
                        since_reortho += 1;
                        if since_reortho >= REORTHO_EVERY {
                            q.reorthonormalize();
                            since_reortho = 0;
                        }
                    }
                    None => summary.rejected += 1,
                }
            }
            if cfg.record_trace {
                records.push(IterationRecord {
                    k,
                    sweep,
                    i,
                    j,
                    x: if applied { sol.x_star } else { Slope::Finite(0.0) },
                    theta: if applied { theta } else { 0.0 },
                    d: stats.d,
                    omega: stats.omega,
                    gain: sol.gain,
                    f,
                    applied,
                    q_hash: matrix_hash(q.matrix()),
                });
            }
        }
        let (max_d, min_omega) = pair_extremes(&w, &pairs);
        summary.end_max_abs_d = max_d;
        summary.end_min_omega = min_omega;
        summary.f = f;
        sweeps.push(summary);
        if max_d <= tol && min_omega >= -tol {
            status = Status::Converged;
            break;
        }
    }

    Ok(JacobiTrace {
        records,
        sweeps,
        q,
        f_final: f,
        w,
        status,
        f_initial,
        tol,
        rotations,
    })
}

/// Applies `G(i, j, θ)` if `‖diag W‖²` does not drop, retrying slightly
/// shorter angles when rounding masks a tiny gain. Returns the angle used,
/// the new objective and whether a retry was needed.
fn commit_rotation(
    w: &mut SymTensor3,
    i: usize,
    j: usize,
    theta: f64,
    f_old: f64,
) -> Option<(f64, f64, bool)> {
    let tries = std::iter::once(1.0).chain(RETRY_SHRINK.iter().map(|e| 1.0 - e));
    for (attempt, factor) in tries.enumerate() {
        let t = theta * factor;
        let (s, c) = t.sin_cos();
        let saved = rotate_in_place(w, i, j, c, s);
        let f_new = w.diag_norm_sq();
        if f_new >= f_old {
            return Some((t, f_new, attempt > 0));
        }
        restore(w, &saved);
    }
    None
}

fn greedy_pair(w: &SymTensor3, pairs: &[(usize, usize)]) -> (usize, usize) {
    let mut best = pairs[0];
    let mut best_d = -1.0;
    for &(i, j) in pairs {
        let d = pair_stats_unchecked(w, i, j).d.abs();
        if d > best_d {
            best_d = d;
            best = (i, j);
        }
    }
    best
}

fn pair_extremes(w: &SymTensor3, pairs: &[(usize, usize)]) -> (f64, f64) {
    let mut max_d: f64 = 0.0;
    let mut min_omega = f64::INFINITY;
    for &(i, j) in pairs {
        let st = pair_stats_unchecked(w, i, j);
        max_d = max_d.max(st.d.abs());
        min_omega = min_omega.min(st.omega);
    }
    (max_d, min_omega)
}

/// Best run of a seeded multi-start search.
#[derive(Clone, Debug)]
pub struct MultiStart {
    pub best: JacobiTrace,
    pub best_index: usize,
    /// Final `f` of every start, in start order.
    pub f_values: Vec<f64>,
}

/// Start 0 is `Q = I`; start `s > 0` is a Haar-random `SO(n)` matrix drawn
/// from `derive_seed(seed, s)`. Ties go to the lowest start index.
pub fn jacobi_multistart(
    a: &SymTensor3,
    cfg: &JacobiConfig,
    starts: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<MultiStart> {
    check_n(a.n())?;
    let starts = starts.max(1);
    let runs = map_indexed(starts, threads, |s| {
        let q0 = start_matrix(a.n(), seed, s);
        jacobi_com_from(a, &q0, cfg)
    });
    let mut best: Option<(usize, JacobiTrace)> = None;
    let mut f_values = Vec::with_capacity(starts);
    for (s, run) in runs.into_iter().enumerate() {
        let run = run?;
        f_values.push(run.f_final);
        if best.as_ref().map_or(true, |(_, b)| run.f_final > b.f_final) {
            best = Some((s, run));
        }
    }
    let (best_index, best) = best.expect("at least one start");
    Ok(MultiStart {
        best,
        best_index,
        f_values,
    })
}

fn start_matrix(n: usize, seed: u64, index: usize) -> OrthoMatrix {
    if index == 0 {
        OrthoMatrix::identity(n)
    } else {
        OrthoMatrix::random_special(n, &mut rng_from_seed(derive_seed(seed, index as u64)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriFactorConfig {
    pub max_sweeps: usize,
    /// Stop when a sweep gains at most `stop_tol · max(1, ‖A‖²)`.
    pub stop_tol: f64,
    /// Keep `P = Q = R` and rotate all three modes at once.
    pub symmetric: bool,
    pub starts: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for TriFactorConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 200,
            stop_tol: 1e-12,
            symmetric: false,
            starts: 1,
            seed: 0,
            threads: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TriFactorResult {
    pub p: OrthoMatrix,
    pub q: OrthoMatrix,
    pub r: OrthoMatrix,
    pub f_value: f64,
    /// Gain of every committed update, in order.
    pub gains: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub start_index: usize,
}

/// Multi-start alternating maximization of `F(P, Q, R)`. Start 0 is the
/// identity triple, later starts are seeded random `SO(n)` factors.
pub fn maximize_trifactor(a: &SymTensor3, cfg: &TriFactorConfig) -> Result<TriFactorResult> {
    check_n(a.n())?;
    let n = a.n();
    let runs = map_indexed(cfg.starts.max(1), cfg.threads, |s| {
        let (p, q, r) = if s == 0 {
            let i = OrthoMatrix::identity(n);
            (i.clone(), i.clone(), i)
        } else {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, s as u64));
            let p = OrthoMatrix::random_special(n, &mut rng);
            if cfg.symmetric {
                (p.clone(), p.clone(), p)
            } else {
                let q = OrthoMatrix::random_special(n, &mut rng);
                let r = OrthoMatrix::random_special(n, &mut rng);
                (p, q, r)
            }
        };
        maximize_trifactor_from(a, &p, &q, &r, cfg).map(|mut res| {
            res.start_index = s;
            res
        })
    });
    let mut best: Option<TriFactorResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().map_or(true, |b| run.f_value > b.f_value) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Single alternating run from the given factors. With `cfg.symmetric`
/// the three factors must coincide.
pub fn maximize_trifactor_from(
    a: &SymTensor3,
    p0: &OrthoMatrix,
    q0: &OrthoMatrix,
    r0: &OrthoMatrix,
    cfg: &TriFactorConfig,
) -> Result<TriFactorResult> {
    let n = a.n();
    check_n(n)?;
    if cfg.max_sweeps == 0 || !(cfg.stop_tol > 0.0) {
        return Err(Error::InvalidArgument(
            "max_sweeps must be at least 1 and stop_tol positive".into(),
        ));
    }
    if cfg.symmetric && (p0.matrix() != q0.matrix() || p0.matrix() != r0.matrix()) {
        return Err(Error::InvalidArgument(
            "symmetric mode needs P = Q = R at the start".into(),
        ));
    }
    let mut w = a.contract_modes(p0, q0, r0)?;
    let mut factors = [p0.clone(), q0.clone(), r0.clone()];
    let tol = effective_tol(cfg.stop_tol, a.norm_sq());
    let pairs: Vec<(usize, usize)> = row_pairs(n).collect();
    let mut f = w.diag_norm_sq();
    let mut gains = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;

    for _ in 0..cfg.max_sweeps {
        sweeps += 1;
        let f_start = f;
        if cfg.symmetric {
            for &(i, j) in &pairs {
                let stats = dense_pair_stats(&w, i, j);
                let sol = optimal_angle_with(&stats, false);
                if sol.gain <= 0.0 {
                    continue;
                }
                let (s, c) = sol.theta.sin_cos();
                let saved = save_pair_entries(&w, i, j);
                for mode in 0..3 {
                    w.rotate_mode(mode, i, j, c, s);
                }
                let f_new = w.diag_norm_sq();
                if f_new >= f {
                    gains.push(f_new - f);
                    f = f_new;
                    for fac in factors.iter_mut() {
                        fac.rotate_columns(i, j, c, s);
                    }
                } else {
                    restore_dense(&mut w, &saved);
                }
            }
            let max_d = pairs
                .iter()
                .map(|&(i, j)| dense_pair_stats(&w, i, j).d.abs())
                .fold(0.0, f64::max);
            if max_d <= tol {
                converged = true;
                break;
            }
        } else {
            for mode in 0..3 {
                for &(i, j) in &pairs {
                    let (a1, b1, a2, b2) = mode_pair_entries(&w, mode, i, j);
                    let half = 0.5 * (a1 * a1 + a2 * a2 - b1 * b1 - b2 * b2);
                    let cross = a1 * b1 - a2 * b2;
                    if half.hypot(cross) - half <= 0.0 {
                        continue;
                    }
                    let theta = 0.5 * cross.atan2(half);
                    let (s, c) = theta.sin_cos();
                    // the only diagonal entries that move, computed exactly as
                    // rotate_mode will
                    let mut diag = w.diag();
                    diag[i] = c * a1 + s * b1;
                    diag[j] = -s * b2 + c * a2;
                    let f_new: f64 = diag.iter().map(|v| v * v).sum();
                    if f_new >= f {
                        w.rotate_mode(mode, i, j, c, s);
                        let f_now = w.diag_norm_sq();
                        gains.push(f_now - f);
                        f = f_now;
                        factors[mode].rotate_columns(i, j, c, s);
                    }
                }
            }
            if f - f_start <= tol {
                converged = true;
                break;
            }
        }
    }
    for fac in factors.iter_mut() {
        fac.reorthonormalize();
    }
    let [p, q, r] = factors;
    Ok(TriFactorResult {
        p,
        q,
        r,
        f_value: f,
        gains,
        sweeps,
        converged,
        start_index: 0,
    })
}

/// `(W_iii, cross_i, W_jjj, cross_j)` for a rotation of `mode`; after the
/// rotation `W_iii ← c·W_iii + s·cross_i` and `W_jjj ← c·W_jjj - s·cross_j`.
fn mode_pair_entries(w: &DenseTensor3, mode: usize, i: usize, j: usize) -> (f64, f64, f64, f64) {
    let (bi, bj) = match mode {
        0 => (w.get(j, i, i), w.get(i, j, j)),
        1 => (w.get(i, j, i), w.get(j, i, j)),
        _ => (w.get(i, i, j), w.get(j, j, i)),
    };
    (w.get(i, i, i), bi, w.get(j, j, j), bj)
}

fn dense_pair_stats(w: &DenseTensor3, i: usize, j: usize) -> crate::rotation::PairStats {
    let aiii = w.get(i, i, i);
    let ajjj = w.get(j, j, j);
    let aiij = w.get(i, i, j);
    let aijj = w.get(i, j, j);
    crate::rotation::PairStats {
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

fn save_pair_entries(w: &DenseTensor3, i: usize, j: usize) -> Vec<(usize, usize, usize, f64)> {
    let n = w.n();
    let mut out = Vec::new();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if [x, y, z].iter().any(|&t| t == i || t == j) {
                    out.push((x, y, z, w.get(x, y, z)));
                }
            }
        }
    }
    out
}

fn restore_dense(w: &mut DenseTensor3, saved: &[(usize, usize, usize, f64)]) {
    for &(x, y, z, v) in saved {
        w.set(x, y, z, v);
    }
}

/// Convergence report built from a finished trace.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    /// Largest `|d_k|` visited in each sweep.
    pub per_sweep_max_abs_d: Vec<f64>,
    /// `true` when every sweep's maximum is below the previous one, ignoring
    /// sweeps already under the stop tolerance.
    pub decreasing: bool,
    pub final_max_abs_d: f64,
    pub final_min_omega: f64,
    /// Pairs of the final tensor with `|ω| ≤ saddle_tol`.
    pub near_zero_omega: Vec<(usize, usize, f64)>,
    pub saddle_tol: f64,
    pub lmd: LmdCertificate,
    /// Final point shows the `d = ω = 0` signature or a positive Hessian
    /// direction.
    pub suspected_saddle: bool,
}

pub fn convergence_diagnostics(trace: &JacobiTrace) -> ConvergenceReport {
    let per: Vec<f64> = trace.sweeps.iter().map(|s| s.max_abs_d).collect();
    let decreasing = per
        .windows(2)
        .all(|w| w[0] <= trace.tol || w[1] < w[0]);
    let w = &trace.w;
    let pairs: Vec<(usize, usize)> = row_pairs(w.n()).collect();
    let (final_max_abs_d, final_min_omega) = pair_extremes(w, &pairs);
    let tols = Tolerances::default();
    let saddle_tol = tols.eig_rel * w.norm_sq().max(f64::MIN_POSITIVE);
    let near_zero_omega: Vec<(usize, usize, f64)> = pairs
        .iter()
        .map(|&(i, j)| pair_stats_unchecked(w, i, j))
        .filter(|st| st.omega.abs() <= saddle_tol)
        .map(|st| (st.i, st.j, st.omega))
        .collect();
    let lmd = lmd_certificate(w, &tols);
    let suspected_saddle =
        !near_zero_omega.is_empty() || matches!(lmd, LmdCertificate::DefiniteNo { .. });
    ConvergenceReport {
        per_sweep_max_abs_d: per,
        decreasing,
        final_max_abs_d,
        final_min_omega,
        near_zero_omega,
        saddle_tol,
        lmd,
        suspected_saddle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::generate::{random_odeco_parts, random_symmetric, symmetrizer_123};
    use crate::tensor::{expm_skew, SkewMatrix};

    #[test]
    fn diagonal_tensor_needs_no_rotation() {
        let mut a = SymTensor3::zeros(4);
        for (i, v) in [1.0, -2.0, 0.5, 3.0].iter().enumerate() {
            a.set(i, i, i, *v);
        }
        let t = jacobi_com(&a, &JacobiConfig::default()).unwrap();
        assert!(t.converged());
        assert_eq!(t.sweeps.len(), 1);
        assert_eq!(t.rotations, 0);
        assert_eq!(t.f_final, 1.0 + 4.0 + 0.25 + 9.0);
        assert!(t.records.iter().all(|r| r.d == 0.0));
    }

    #[test]
    fn odeco_is_recovered() {
        for seed in 0..10 {
            let o = random_odeco_parts(3 + seed as usize % 4, seed).unwrap();
            let a = &o.tensor;
            let t = jacobi_com(a, &JacobiConfig::default()).unwrap();
            assert!(t.converged(), "seed {seed}");
            assert!(t.f_final >= a.norm_sq() - 1e-8, "seed {seed}: {}", t.f_final);
            let w = &t.w;
            for (i, j, k, v) in w.entries() {
                if !(i == j && j == k) {
                    assert!(v.abs() < 1e-6);
                }
            }
            let direct = a.contract_all(&t.q).unwrap();
            assert!(direct.max_abs_diff(w) <= 1e-9 * a.norm());
        }
    }

    #[test]
    fn f_is_monotone_and_bounded() {
        for seed in 0..5 {
            let a = random_symmetric(5, seed).unwrap();
            let t = jacobi_com(&a, &JacobiConfig::default()).unwrap();
            let mut prev = t.f_initial;
            for r in &t.records {
                assert!(r.f >= prev);
                assert!(r.f <= a.norm_sq() * (1.0 + 1e-12));
                prev = r.f;
            }
            let f = cost_f(&a, &t.q).unwrap();
            assert!((f - t.w.diag_norm_sq()).abs() <= 1e-10 * a.norm_sq());
        }
    }

    #[test]
    fn greedy_rule_also_converges() {
        let a = random_odeco_parts(5, 3).unwrap().tensor;
        let cfg = JacobiConfig {
            pair_rule: PairRule::Greedy,
            ..Default::default()
        };
        let t = jacobi_com(&a, &cfg).unwrap();
        assert!(t.converged());
        assert!(t.f_final >= a.norm_sq() - 1e-8);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(9);
        for seed in 0..5 {
            let a = random_symmetric(4, seed).unwrap();
            let q = OrthoMatrix::random_special(4, &mut rng);
            let delta = SkewMatrix::random(4, &mut rng);
            let g = riemannian_gradient(&a, &q).unwrap();
            let h = 1e-5;
            let fp = cost_f(&a, &q.mul(&expm_skew(&delta.scaled(h))).unwrap()).unwrap();
            let fm = cost_f(&a, &q.mul(&expm_skew(&delta.scaled(-h))).unwrap()).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let qd = q.matrix() * delta.to_matrix();
            let inner = g.grad.dot(&qd);
            assert!((fd - inner).abs() <= 1e-6 * inner.abs().max(1.0), "{fd} vs {inner}");
        }
    }

    #[test]
    fn gradient_vanishes_on_stationary_tensors() {
        let a = symmetrizer_123();
        let g = riemannian_gradient(&a, &OrthoMatrix::identity(3)).unwrap();
        assert_eq!(g.norm, 0.0);
    }

    #[test]
    fn trifactor_reaches_three_on_symmetrizer() {
        let a = symmetrizer_123();
        let p = OrthoMatrix::identity(3);
        let q = OrthoMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        ))
        .unwrap();
        let r = OrthoMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
        ))
        .unwrap();
        let res = maximize_trifactor_from(&a, &p, &q, &r, &TriFactorConfig::default()).unwrap();
        assert!((res.f_value - 3.0).abs() < 1e-12);
        assert!(res.gains.iter().all(|g| *g >= 0.0));
    }

    #[test]
    fn symmetric_trifactor_matches_jacobi() {
        for seed in 0..5 {
            let a = random_symmetric(4, seed).unwrap();
            let cfg = TriFactorConfig {
                symmetric: true,
                ..Default::default()
            };
            let tri = maximize_trifactor(&a, &cfg).unwrap();
            let jac = jacobi_com(&a, &JacobiConfig::default()).unwrap();
            assert!((tri.f_value - jac.f_final).abs() <= 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn trace_exports() {
        let a = random_symmetric(3, 1).unwrap();
        let t = jacobi_com(&a, &JacobiConfig::default()).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("k,i,j,theta,x,d,omega,f\n"));
        assert_eq!(csv.lines().count(), t.records.len() + 1);
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(v["records"].as_array().unwrap().len(), t.records.len());
    }

    #[test]
    fn multistart_is_deterministic() {
        let a = random_symmetric(4, 2).unwrap();
        let cfg = JacobiConfig {
            record_trace: false,
            ..Default::default()
        };
        let m1 = jacobi_multistart(&a, &cfg, 8, 5, Some(2)).unwrap();
        let m2 = jacobi_multistart(&a, &cfg, 8, 5, Some(4)).unwrap();
        assert_eq!(m1.f_values, m2.f_values);
        assert_eq!(m1.best_index, m2.best_index);
    }
}
