//! Approximate orthogonal diagonalization of third-order symmetric tensors.
//!
//! * [`tensor`]: storage, contractions, generators and file formats.
//! * [`rotation`]: single-pair Givens rotations and their exact optimum.
//! * [`jacobi`]: Jacobi sweeps, gradient and the three-factor variant.
//! * [`classify`]: class membership tests and Hessian certificates.
//! * [`counterexamples`]: numeric checks of the symmetrizer gap and the
//!   two-dimensional certificate.

pub mod classify;
pub mod counterexamples;
pub mod error;
pub mod jacobi;
pub mod parallel;
pub mod poly;
pub mod rotation;
pub mod tensor;

pub use error::{Error, Result};
pub use rotation::{optimal_angle, pair_stats, AngleSolution, PairStats, Slope};
pub use tensor::{DenseTensor3, OrthoMatrix, SkewMatrix, SymTensor3};
