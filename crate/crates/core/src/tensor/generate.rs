//! Seeded tensor generators and the named example tensors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{OrthoMatrix, SymTensor3};
use crate::error::{Error, Result};

/// The RNG used by every seeded routine in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for the `index`-th independent stream derived from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over (seed, index)
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "dimension must be at least 2, got {n}"
        )));
    }
    Ok(())
}

/// Every stored entry i.i.d. standard normal.
pub fn random_symmetric(n: usize, seed: u64) -> Result<SymTensor3> {
    check_n(n)?;
    let mut rng = rng_from_seed(seed);
    let mut a = SymTensor3::zeros(n);
    for v in a.data.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    Ok(a)
}

/// Weights, basis and tensor of an orthogonally decomposable sample.
#[derive(Clone, Debug)]
pub struct Odeco {
    pub weights: Vec<f64>,
    pub basis: OrthoMatrix,
    pub tensor: SymTensor3,
}

/// `Σ λ_k u_k⊗u_k⊗u_k` with a Haar basis and weights `|λ_k| ∈ [1, 3]`
/// carrying random signs.
pub fn random_odeco_parts(n: usize, seed: u64) -> Result<Odeco> {
    check_n(n)?;
    let mut rng = rng_from_seed(seed);
    let basis = OrthoMatrix::random(n, &mut rng);
    let weights: Vec<f64> = (0..n)
        .map(|_| {
            let mag = rng.gen_range(1.0..3.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let tensor = from_weights_and_basis(&weights, &basis)?;
    Ok(Odeco {
        weights,
        basis,
        tensor,
    })
}

pub fn random_odeco(n: usize, seed: u64) -> Result<SymTensor3> {
    Ok(random_odeco_parts(n, seed)?.tensor)
}

/// Pseudo-diagonal sample: diagonal entries and entries with three distinct
/// indices are i.i.d. standard normal, `A_iij = A_ijj = 0`.
pub fn random_pd(n: usize, seed: u64) -> Result<SymTensor3> {
    check_n(n)?;
    let mut rng = rng_from_seed(seed);
    let mut a = SymTensor3::zeros(n);
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                if (i == j && j == k) || (i < j && j < k) {
                    a.set(i, j, k, rng.sample(StandardNormal));
                }
            }
        }
    }
    Ok(a)
}

/// `Σ_k λ_k u_k⊗u_k⊗u_k` where `u_k` is column `k` of `basis`.
pub fn from_weights_and_basis(weights: &[f64], basis: &OrthoMatrix) -> Result<SymTensor3> {
    let n = basis.n();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    let u = basis.matrix();
    let mut a = SymTensor3::zeros(n);
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let v: f64 = (0..n)
                    .map(|c| weights[c] * u[(i, c)] * u[(j, c)] * u[(k, c)])
                    .sum();
                a.set(i, j, k, v);
            }
        }
    }
    Ok(a)
}

/// `Σ_{σ ∈ S₃} e_σ(1) ⊗ e_σ(2) ⊗ e_σ(3)`: `A_123 = 1`, all other entries zero.
pub fn symmetrizer_123() -> SymTensor3 {
    let mut a = SymTensor3::zeros(3);
    a.set(0, 1, 2, 1.0);
    a
}

/// Dimension-4 pseudo-diagonal tensor with unit diagonal and `A_ijk = 3/4`
/// for distinct indices.
pub fn pd4_three_quarters() -> SymTensor3 {
    let mut a = SymTensor3::zeros(4);
    for i in 0..4 {
        a.set(i, i, i, 1.0);
        for j in (i + 1)..4 {
            for k in (j + 1)..4 {
                a.set(i, j, k, 0.75);
            }
        }
    }
    a
}

/// Stationary-diagonal tensor of dimension 3 with diagonal `(a, b, c)`,
/// common stationary ratio `gamma` on every pair, and `A_123 = g`.
pub fn sd3(diag: [f64; 3], gamma: [f64; 3], g: f64) -> SymTensor3 {
    let mut t = SymTensor3::zeros(3);
    for (i, &v) in diag.iter().enumerate() {
        t.set(i, i, i, v);
    }
    // gamma ordered as pairs (0,1), (0,2), (1,2)
    for (p, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        t.set(i, j, j, gamma[p] * diag[i]);
        t.set(i, i, j, gamma[p] * diag[j]);
    }
    t.set(0, 1, 2, g);
    t
}

/// Unit diagonal, common ratio `gamma`, `A_123 = g`.
pub fn lmd3(g: f64, gamma: f64) -> SymTensor3 {
    sd3([1.0; 3], [gamma; 3], g)
}

/// Dimension-2 tensor with `A_111 = a`, `A_222 = d`, `A_122 = γa`, `A_112 = γd`.
pub fn sd2(a: f64, d: f64, gamma: f64) -> SymTensor3 {
    let mut t = SymTensor3::zeros(2);
    t.set(0, 0, 0, a);
    t.set(1, 1, 1, d);
    t.set(0, 1, 1, gamma * a);
    t.set(0, 0, 1, gamma * d);
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generators_are_deterministic() {
        assert_eq!(random_symmetric(4, 9).unwrap(), random_symmetric(4, 9).unwrap());
        assert_ne!(random_symmetric(4, 9).unwrap(), random_symmetric(4, 10).unwrap());
        assert_eq!(random_odeco(5, 7).unwrap(), random_odeco(5, 7).unwrap());
        assert_eq!(random_pd(3, 1).unwrap(), random_pd(3, 1).unwrap());
    }

    #[test]
    fn small_dimensions_are_rejected() {
        assert!(random_symmetric(1, 0).is_err());
        assert!(random_odeco(0, 0).is_err());
        assert!(random_pd(1, 0).is_err());
    }

    #[test]
    fn pd_pattern_is_exact() {
        let a = random_pd(5, 3).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert_eq!(a.get(i, i, j), 0.0);
                }
            }
        }
        assert_ne!(a.get(0, 1, 2), 0.0);
    }

    #[test]
    fn identity_basis_gives_diagonal() {
        let a = from_weights_and_basis(&[1.0, 2.0, 3.0], &OrthoMatrix::identity(3)).unwrap();
        let mut d = SymTensor3::zeros(3);
        d.set(0, 0, 0, 1.0);
        d.set(1, 1, 1, 2.0);
        d.set(2, 2, 2, 3.0);
        assert_eq!(a, d);
        assert!(from_weights_and_basis(&[1.0], &OrthoMatrix::identity(3)).is_err());
    }

    #[test]
    fn odeco_is_diagonalized_by_its_basis() {
        let o = random_odeco_parts(4, 11).unwrap();
        let w = o.tensor.contract_all(&o.basis).unwrap();
        for (i, j, k, v) in w.entries() {
            let expected = if i == j && j == k { o.weights[i] } else { 0.0 };
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn named_examples() {
        let s = symmetrizer_123();
        assert_eq!(s.get(2, 0, 1), 1.0);
        assert_eq!(s.diag(), vec![0.0; 3]);
        assert_eq!(s.norm_sq(), 6.0);
        let p = pd4_three_quarters();
        assert_eq!(p.get(3, 1, 0), 0.75);
        assert_eq!(p.get(0, 0, 1), 0.0);
        let l = lmd3(0.9, 0.2);
        assert_eq!(l.get(0, 1, 1), 0.2);
        assert_eq!(l.get(1, 2, 2), 0.2);
        assert_eq!(l.get(0, 1, 2), 0.9);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
