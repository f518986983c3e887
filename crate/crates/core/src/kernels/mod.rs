//! Dense factorizations shared by every algorithm.

pub mod qr;
pub mod random;
pub mod svd;

pub use qr::{cpqr_truncated, householder_qr, tree_qr, CpqrFactor, TreeQr};
pub use random::{gaussian_matrix, SeededStream};
pub use svd::{numerical_rank, pseudo_inverse_apply, truncated_svd, LeastSquares, Truncation, TruncatedSvd};
