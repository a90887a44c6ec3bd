//! Supervised and unsupervised variational Bayesian nonnegative matrix
//! factorization for document representation.
//!
//! The crate is `no_std` (it needs `alloc`) and holds only the numerical
//! machinery: TF-IDF weighting, Poisson-gamma NMF with plain gamma priors on
//! the coefficients, its label-driven counterpart with per-label rate
//! variables, a PCA baseline, cosine k-NN and the sparsity diagnostics used
//! to compare the resulting representation spaces. File formats, archives
//! and the experiment runner live in the `vbnmf` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod numerics;
pub mod pca;
pub mod planted;
pub mod supervised;
pub mod vbnmf;

pub use error::{Error, Result};
pub use matrix::{Matrix, SparseMatrix};
