//! Streaming and parallel tensor-train toolkit.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`], [`matrix`] and [`oracle`]: column-major storage, reshapes,
//!   mode products and entry oracles.
//! * [`kernels`]: truncated SVD, column-pivoted QR, tree QR, least squares and
//!   the addressable Gaussian generator.
//! * [`tt`], [`tucker`], [`convert`]: formats and conversions.
//! * [`sketch`]: partitioned multi-sketching with instrumented workers.
//! * [`algorithms`]: Parallel-TTSVD, PSTT and its variants, SSTT.
//! * [`sylvester`]: shift selection, fADI and TT-fADI.
//! * [`generators`], [`io`]: test tensors and binary file formats.

pub mod algorithms;
pub mod convert;
pub mod error;
pub mod generators;
pub mod io;
pub mod kernels;
pub mod matrix;
pub mod oracle;
pub mod sketch;
pub mod sylvester;
pub mod tensor;
pub mod tt;
pub mod tucker;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use oracle::TensorOracle;
pub use tensor::{DenseTensor, Shape};
pub use tt::TtTensor;
pub use tucker::TuckerTensor;
