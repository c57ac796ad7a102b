use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Largest `max |QᵀQ - I|` accepted without re-orthonormalization.
pub const ORTHO_TOL: f64 = 1e-12;
/// Drift up to which inputs are projected back onto O(n) instead of rejected.
pub const REPROJECT_TOL: f64 = 1e-8;

/// Square matrix with orthonormal columns.
///
/// Houses the rotations `Q`, `P`, `R` acting on a tensor. The sign of the
/// determinant is recorded at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoMatrix {
    m: DMatrix<f64>,
    det_sign: i8,
}

/// `max_{ij} |(mᵀm - I)_{ij}|`.
pub fn orthogonality_residual(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let n = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Q factor of `m` with the signs chosen so that `R` has a positive diagonal.
fn qr_projection(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

impl OrthoMatrix {
    /// Validates `m` against [`ORTHO_TOL`]. Inputs that drift by at most
    /// [`REPROJECT_TOL`] are re-orthonormalized; anything worse is rejected.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tol(m, ORTHO_TOL)
    }

    pub fn with_tol(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "orthogonal matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let residual = orthogonality_residual(&m);
        let m = if residual <= tol {
            m
        } else if residual <= REPROJECT_TOL {
            qr_projection(&m)
        } else {
            return Err(Error::NotOrthogonal { residual });
        };
        let det_sign = if m.determinant() >= 0.0 { 1 } else { -1 };
        Ok(Self { m, det_sign })
    }

    /// Like [`OrthoMatrix::new`] but additionally requires `det = +1`.
    pub fn new_special(m: DMatrix<f64>) -> Result<Self> {
        let q = Self::new(m)?;
        if q.det_sign != 1 {
            return Err(Error::NotSpecial {
                det: q.m.determinant(),
            });
        }
        Ok(q)
    }

    /// Wraps a matrix that is orthogonal by construction (products of
    /// orthogonal factors, Givens rotations).
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        let det_sign = if m.determinant() >= 0.0 { 1 } else { -1 };
        Self { m, det_sign }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
            det_sign: 1,
        }
    }

    /// Givens rotation `G(i, j, θ)` (0-based, `i < j`): `G_ii = G_jj = cos θ`,
    /// `G_ji = sin θ`, `G_ij = -sin θ`.
    pub fn givens(n: usize, i: usize, j: usize, theta: f64) -> Result<Self> {
        if i >= j || j >= n {
            return Err(Error::BadIndex {
                indices: vec![i, j],
                n,
            });
        }
        let (s, c) = theta.sin_cos();
        let mut m = DMatrix::identity(n, n);
        m[(i, i)] = c;
        m[(j, j)] = c;
        m[(j, i)] = s;
        m[(i, j)] = -s;
        Ok(Self { m, det_sign: 1 })
    }

    /// Haar-distributed sample from O(n): QR of a Gaussian matrix with the
    /// column signs fixed by `diag(R) > 0`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self::from_trusted(qr_projection(&g))
    }

    /// Haar sample from SO(n): a random orthogonal matrix with its last
    /// column negated when the determinant is -1.
    pub fn random_special<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut q = Self::random(n, rng);
        if q.det_sign < 0 {
            q.m.column_mut(n - 1).neg_mut();
            q.det_sign = 1;
        }
        q
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn det_sign(&self) -> i8 {
        self.det_sign
    }

    pub fn residual(&self) -> f64 {
        orthogonality_residual(&self.m)
    }

    pub fn transpose(&self) -> Self {
        Self {
            m: self.m.transpose(),
            det_sign: self.det_sign,
        }
    }

    pub fn mul(&self, other: &OrthoMatrix) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: other.n(),
            });
        }
        Ok(Self {
            m: &self.m * &other.m,
            det_sign: self.det_sign * other.det_sign,
        })
    }

    /// In-place right multiplication by `G(i, j, θ)` given `(cos θ, sin θ)`.
    pub fn rotate_columns(&mut self, i: usize, j: usize, c: f64, s: f64) {
        for r in 0..self.m.nrows() {
            let qi = self.m[(r, i)];
            let qj = self.m[(r, j)];
            self.m[(r, i)] = c * qi + s * qj;
            self.m[(r, j)] = -s * qi + c * qj;
        }
    }

    /// Projects back onto O(n) to remove accumulated rounding drift.
    pub fn reorthonormalize(&mut self) {
        self.m = qr_projection(&self.m);
    }
}

/// Pair `(i, j)`, `i < j`, at position `p` of the row-major ordering
/// `(0,1), (0,2), …, (0,n-1), (1,2), …, (n-2,n-1)`.
pub fn pair_at(n: usize, p: usize) -> (usize, usize) {
    let mut rem = p;
    for i in 0..n {
        let row = n - 1 - i;
        if rem < row {
            return (i, i + 1 + rem);
        }
        rem -= row;
    }
    panic!("pair position {p} out of range for n = {n}");
}

/// Inverse of [`pair_at`].
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// All pairs `i < j` in cyclic-by-row order.
pub fn row_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
}

/// Skew-symmetric matrix parameterized by its strictly upper triangle,
/// ordered as in [`row_pairs`].
#[derive(Clone, Debug, PartialEq)]
pub struct SkewMatrix {
    n: usize,
    params: Vec<f64>,
}

impl SkewMatrix {
    pub fn new(n: usize, params: Vec<f64>) -> Result<Self> {
        let m = n * (n.saturating_sub(1)) / 2;
        if params.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: params.len(),
            });
        }
        Ok(Self { n, params })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            params: vec![0.0; n * n.saturating_sub(1) / 2],
        }
    }

    /// Elementary direction with a single unit coordinate on pair `(i, j)`.
    pub fn elementary(n: usize, i: usize, j: usize) -> Self {
        let mut s = Self::zeros(n);
        s.params[pair_index(n, i, j)] = 1.0;
        s
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let m = n * n.saturating_sub(1) / 2;
        Self {
            n,
            params: (0..m).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }

    /// Reads the strictly upper triangle; rejects inputs with
    /// `max |m + mᵀ| > tol`.
    pub fn from_matrix(m: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.ncols(),
            });
        }
        let defect = (m + m.transpose()).amax();
        if defect > tol {
            return Err(Error::InvalidArgument(format!(
                "matrix is not skew-symmetric (defect {defect:e})"
            )));
        }
        Ok(Self {
            n,
            params: row_pairs(n).map(|(i, j)| m[(i, j)]).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Less => self.params[pair_index(self.n, i, j)],
            Ordering::Greater => -self.params[pair_index(self.n, j, i)],
            Ordering::Equal => 0.0,
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            params: self.params.iter().map(|p| p * s).collect(),
        }
    }
}

/// Matrix exponential of a skew matrix, i.e. a point of SO(n) on the
/// geodesic through the identity.
pub fn expm_skew(delta: &SkewMatrix) -> OrthoMatrix {
    OrthoMatrix::from_trusted(delta.to_matrix().exp())
}
