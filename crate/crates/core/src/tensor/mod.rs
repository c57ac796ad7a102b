//! Dense order-3 symmetric tensors and multilinear contractions.
//!
//! Indices are 0-based throughout the Rust API. File formats use 1-based
//! triples (see [`io`]).
//!
//! Contractions follow the convention that a matrix always contracts on
//! its first (row) index: `W = A •₁ Qᵀ •₂ Qᵀ •₃ Qᵀ` has entries
//! `W_ijk = Σ_pqr A_pqr Q_pi Q_qj Q_rk`. With this orientation
//! `contract_all(contract_all(A, Q₁), Q₂) = contract_all(A, Q₁Q₂)`.

pub mod generate;
pub mod io;
mod ortho;

pub use ortho::{
    expm_skew, orthogonality_residual, pair_at, pair_index, row_pairs, OrthoMatrix, SkewMatrix,
    ORTHO_TOL, REPROJECT_TOL,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn sort3(i: usize, j: usize, k: usize) -> (usize, usize, usize) {
    let (mut a, mut b, mut c) = (i, j, k);
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    if b > c {
        std::mem::swap(&mut b, &mut c);
    }
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    (a, b, c)
}

fn tetra(m: usize) -> usize {
    m * (m + 1) * (m + 2) / 6
}

fn tri(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Number of distinct entries `i ≤ j ≤ k` of a symmetric tensor of dimension `n`.
pub fn packed_len(n: usize) -> usize {
    tetra(n)
}

/// Number of index triples equal to `(i, j, k)` up to permutation.
fn multiplicity(i: usize, j: usize, k: usize) -> f64 {
    if i == j && j == k {
        1.0
    } else if i == j || j == k || i == k {
        3.0
    } else {
        6.0
    }
}

/// Symmetric order-3 tensor stored once per unordered index triple.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensor3 {
    n: usize,
    data: Vec<f64>,
}

impl SymTensor3 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; packed_len(n)],
        }
    }

    /// Packed offset of a sorted triple `i ≤ j ≤ k`.
    fn offset_sorted(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.n;
        let m = n - i;
        let (jj, kk) = (j - i, k - i);
        (tetra(n) - tetra(m)) + (tri(m) - tri(m - jj)) + (kk - jj)
    }

    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let (a, b, c) = sort3(i, j, k);
        assert!(c < self.n, "index ({i},{j},{k}) out of range for n = {}", self.n);
        self.offset_sorted(a, b, c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    /// Sets the entry for every permutation of `(i, j, k)` at once.
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = value;
    }

    /// `(i, j, k, value)` for every stored triple `i ≤ j ≤ k`, in packed order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (i..n).flat_map(move |j| (j..n).map(move |k| (i, j, k))))
            .zip(self.data.iter())
            .map(|((i, j, k), &v)| (i, j, k, v))
    }

    /// `‖A‖² = Σ_{ijk} A_ijk²` over the full index set.
    pub fn norm_sq(&self) -> f64 {
        self.entries()
            .map(|(i, j, k, v)| multiplicity(i, j, k) * v * v)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i, i)).collect()
    }

    /// `‖diag A‖² = Σ_i A_iii²`.
    pub fn diag_norm_sq(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i, i).powi(2)).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Largest absolute difference between corresponding entries.
    pub fn max_abs_diff(&self, other: &SymTensor3) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DenseTensor3 {
        let n = self.n;
        let mut d = DenseTensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    d.data[(i * n + j) * n + k] = self.get(i, j, k);
                }
            }
        }
        d
    }

    /// Reads the canonical entries `i ≤ j ≤ k` of a dense tensor. The caller
    /// is responsible for `t` being symmetric.
    pub fn from_dense_canonical(t: &DenseTensor3) -> Self {
        let mut s = Self::zeros(t.n);
        let n = t.n;
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    s.set(i, j, k, t.get(i, j, k));
                }
            }
        }
        s
    }

    /// `W = A •₁ Qᵀ •₂ Qᵀ •₃ Qᵀ`, computed as three single-mode products.
    pub fn contract_all(&self, q: &OrthoMatrix) -> Result<SymTensor3> {
        check_dim(self.n, q.n())?;
        let m = q.matrix();
        let d = self
            .to_dense()
            .mode_product(m, 0)
            .mode_product(m, 1)
            .mode_product(m, 2);
        Ok(Self::from_dense_canonical(&d))
    }

    /// `A •₁ Pᵀ •₂ Qᵀ •₃ Rᵀ`; not symmetric in general.
    pub fn contract_modes(
        &self,
        p: &OrthoMatrix,
        q: &OrthoMatrix,
        r: &OrthoMatrix,
    ) -> Result<DenseTensor3> {
        check_dim(self.n, p.n())?;
        check_dim(self.n, q.n())?;
        check_dim(self.n, r.n())?;
        Ok(self
            .to_dense()
            .mode_product(p.matrix(), 0)
            .mode_product(q.matrix(), 1)
            .mode_product(r.matrix(), 2))
    }

    /// Principal subtensor on a strictly increasing index set of size 2 or 3.
    pub fn subtensor(&self, indices: &[usize]) -> Result<SymTensor3> {
        let bad = || Error::BadIndex {
            indices: indices.to_vec(),
            n: self.n,
        };
        if !(2..=3).contains(&indices.len())
            || indices.windows(2).any(|w| w[0] >= w[1])
            || indices.iter().any(|&i| i >= self.n)
        {
            return Err(bad());
        }
        let m = indices.len();
        let mut s = Self::zeros(m);
        for a in 0..m {
            for b in a..m {
                for c in b..m {
                    s.set(a, b, c, self.get(indices[a], indices[b], indices[c]));
                }
            }
        }
        Ok(s)
    }

    /// Trilinear form `A(u, v, w) = Σ_ijk A_ijk u_i v_j w_k`.
    pub fn form(&self, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            if u[i] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..n {
                if v[j] == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for k in 0..n {
                    inner += self.get(i, j, k) * w[k];
                }
                row += v[j] * inner;
            }
            acc += u[i] * row;
        }
        acc
    }

    /// Vector `A • u • v` with components `Σ_jk A_ijk u_j v_k`.
    pub fn apply2(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        acc += self.get(i, j, k) * u[j] * v[k];
                    }
                }
                acc
            })
            .collect()
    }

    /// Mode-1 unfolding: `n × n²` matrix with `M[i, j·n + k] = A_ijk`.
    pub fn unfold_mode1(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n * n, |i, col| self.get(i, col / n, col % n))
    }

    /// Numerical rank of the mode-1 unfolding: singular values above
    /// `rank_tol · σ_max` are counted.
    pub fn unfold_rank(&self, rank_tol: f64) -> usize {
        let sv = self.unfold_mode1().singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        if smax == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > rank_tol * smax).count()
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// General (not necessarily symmetric) `n × n × n` tensor, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor3 {
    n: usize,
    data: Vec<f64>,
}

impl DenseTensor3 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.n;
        self.data[(i * n + j) * n + k] = v;
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i, i)).collect()
    }

    pub fn diag_norm_sq(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i, i).powi(2)).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Largest deviation from full permutation symmetry.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.get(i, j, k);
                    for w in [
                        self.get(i, k, j),
                        self.get(j, i, k),
                        self.get(j, k, i),
                        self.get(k, i, j),
                        self.get(k, j, i),
                    ] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }

    /// Single-mode product: index `mode` is replaced by `a` with
    /// `out[…a…] = Σ_p m[p, a] · self[…p…]`.
    pub fn mode_product(&self, m: &DMatrix<f64>, mode: usize) -> DenseTensor3 {
        let n = self.n;
        let mut out = DenseTensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let slot = match mode {
                        0 => i,
                        1 => j,
                        2 => k,
                        _ => panic!("mode must be 0, 1 or 2"),
                    };
                    let mut acc = 0.0;
                    for p in 0..n {
                        let v = match mode {
                            0 => self.get(p, j, k),
                            1 => self.get(i, p, k),
                            _ => self.get(i, j, p),
                        };
                        acc += m[(p, slot)] * v;
                    }
                    out.set(i, j, k, acc);
                }
            }
        }
        out
    }

    /// Mode-`mode` Givens update: slices `i` and `j` along `mode` are
    /// replaced by `c·Tᵢ + s·Tⱼ` and `-s·Tᵢ + c·Tⱼ`.
    pub fn rotate_mode(&mut self, mode: usize, i: usize, j: usize, c: f64, s: f64) {
        let n = self.n;
        for a in 0..n {
            for b in 0..n {
                let (ii, jj) = match mode {
                    0 => ((i, a, b), (j, a, b)),
                    1 => ((a, i, b), (a, j, b)),
                    _ => ((a, b, i), (a, b, j)),
                };
                let ti = self.get(ii.0, ii.1, ii.2);
                let tj = self.get(jj.0, jj.1, jj.2);
                self.set(ii.0, ii.1, ii.2, c * ti + s * tj);
                self.set(jj.0, jj.1, jj.2, -s * ti + c * tj);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Naive `O(n⁶)` triple sum, independent of the mode-by-mode path.
    fn brute_contract(
        a: &SymTensor3,
        p: &DMatrix<f64>,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
    ) -> Vec<f64> {
        let n = a.n();
        let mut out = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = 0.0;
                    for x in 0..n {
                        for y in 0..n {
                            for z in 0..n {
                                acc += a.get(x, y, z) * p[(x, i)] * q[(y, j)] * r[(z, k)];
                            }
                        }
                    }
                    out[(i * n + j) * n + k] = acc;
                }
            }
        }
        out
    }

    fn random_tensor(n: usize, seed: u64) -> SymTensor3 {
        generate::random_symmetric(n, seed).unwrap()
    }

    #[test]
    fn packed_offsets_are_a_bijection() {
        for n in 1..8 {
            let t = SymTensor3::zeros(n);
            let mut seen = vec![false; packed_len(n)];
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let o = t.offset_sorted(i, j, k);
                        assert!(!seen[o]);
                        seen[o] = true;
                    }
                }
            }
            assert!(seen.into_iter().all(|s| s));
        }
    }

    #[test]
    fn entries_are_permutation_invariant() {
        let a = random_tensor(4, 5);
        for (i, j, k, v) in a.entries() {
            for (x, y, z) in [(i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                assert_eq!(a.get(x, y, z), v);
            }
        }
    }

    #[test]
    fn norm_counts_multiplicities() {
        let a = random_tensor(4, 6);
        let dense = a.to_dense();
        assert!((a.norm_sq() - dense.norm_sq()).abs() < 1e-12 * dense.norm_sq());
    }

    #[test]
    fn identity_contraction_is_noop() {
        let a = random_tensor(5, 7);
        let w = a.contract_all(&OrthoMatrix::identity(5)).unwrap();
        assert!(w.max_abs_diff(&a) < 1e-15);
    }

    #[test]
    fn quarter_turn_permutes_and_flips_diagonal() {
        let mut a = SymTensor3::zeros(2);
        a.set(0, 0, 0, 1.0);
        a.set(1, 1, 1, 2.0);
        let q = OrthoMatrix::givens(2, 0, 1, std::f64::consts::FRAC_PI_2).unwrap();
        let w = a.contract_all(&q).unwrap();
        let brute = brute_contract(&a, q.matrix(), q.matrix(), q.matrix());
        for (i, j, k, v) in w.entries() {
            assert!((v - brute[(i * 2 + j) * 2 + k]).abs() < 1e-14);
        }
        // column 0 of G is e₂, column 1 is -e₁
        assert!((w.get(0, 0, 0) - 2.0).abs() < 1e-14);
        assert!((w.get(1, 1, 1) + 1.0).abs() < 1e-14);
        assert!((w.norm() - a.norm()).abs() < 1e-14);
    }

    #[test]
    fn contract_modes_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [2, 3, 4] {
            let a = random_tensor(n, 9 + n as u64);
            let p = OrthoMatrix::random(n, &mut rng);
            let q = OrthoMatrix::random(n, &mut rng);
            let r = OrthoMatrix::random(n, &mut rng);
            let got = a.contract_modes(&p, &q, &r).unwrap();
            let brute = brute_contract(&a, p.matrix(), q.matrix(), r.matrix());
            for (x, y) in got.data.iter().zip(&brute) {
                assert!((x - y).abs() < 1e-12);
            }
            let sym = a.contract_all(&q).unwrap();
            let sym_dense = a.contract_modes(&q, &q, &q).unwrap();
            assert!(sym.max_abs_diff(&SymTensor3::from_dense_canonical(&sym_dense)) < 1e-14);
        }
    }

    #[test]
    fn contract_all_is_symmetric_and_norm_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_tensor(5, 11);
        let q = OrthoMatrix::random(5, &mut rng);
        let d = a
            .to_dense()
            .mode_product(q.matrix(), 0)
            .mode_product(q.matrix(), 1)
            .mode_product(q.matrix(), 2);
        assert!(d.symmetry_defect() < 1e-13);
        let w = a.contract_all(&q).unwrap();
        assert!((w.norm() - a.norm()).abs() <= 1e-10 * a.norm());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = random_tensor(3, 1);
        assert!(matches!(
            a.contract_all(&OrthoMatrix::identity(4)),
            Err(Error::DimensionMismatch { expected: 3, got: 4 })
        ));
    }

    #[test]
    fn subtensor_selects_principal_block() {
        let a = generate::pd4_three_quarters();
        let s = a.subtensor(&[0, 1, 2]).unwrap();
        assert_eq!(s.diag(), vec![1.0, 1.0, 1.0]);
        assert_eq!(s.get(0, 1, 2), 0.75);
        assert_eq!(s.get(0, 0, 1), 0.0);
        let full = random_tensor(3, 2);
        assert_eq!(full.subtensor(&[0, 1, 2]).unwrap(), full);
        assert!(a.subtensor(&[1, 1]).is_err());
        assert!(a.subtensor(&[2, 1]).is_err());
        assert!(a.subtensor(&[0, 4]).is_err());
        assert!(a.subtensor(&[0]).is_err());
    }

    #[test]
    fn unfolding_rank() {
        let mut d = SymTensor3::zeros(5);
        d.set(0, 0, 0, 2.0);
        d.set(3, 3, 3, -1.0);
        assert_eq!(d.unfold_rank(1e-10), 2);
        assert_eq!(SymTensor3::zeros(4).unfold_rank(1e-10), 0);
        let odeco = generate::random_odeco(5, 3).unwrap();
        assert_eq!(odeco.unfold_rank(1e-10), 5);
        let m = d.unfold_mode1();
        assert_eq!((m.nrows(), m.ncols()), (5, 25));
        assert_eq!(m[(3, 3 * 5 + 3)], -1.0);
    }

    #[test]
    fn rotate_mode_matches_mode_product() {
        let a = random_tensor(4, 12).to_dense();
        let g = OrthoMatrix::givens(4, 1, 3, 0.4).unwrap();
        let (s, c) = 0.4f64.sin_cos();
        for mode in 0..3 {
            let expected = a.mode_product(g.matrix(), mode);
            let mut got = a.clone();
            got.rotate_mode(mode, 1, 3, c, s);
            for (x, y) in got.data.iter().zip(&expected.data) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }
}
