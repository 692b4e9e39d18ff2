//! Dense and sparse matrix containers, generators and Matrix Market I/O.

mod dense;
mod gen;
mod mm;
mod sparse;

use thiserror::Error;

pub use dense::{DenseMatrix, MatrixStats};
pub(crate) use gen::rng_from_seed;
pub use gen::{derive_seed, gen_identity_mix, gen_random_scaled, gen_random_scaled_rect, MAX_PHI};
pub use mm::{mm_emit, mm_parse, mm_read, mm_write, mm_write_symmetric, MmError, MmSymmetry};
pub use sparse::{CrsMatrix, EllMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix is empty")]
    Empty,
    #[error("shape mismatch: expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("index ({row}, {col}) out of bounds")]
    IndexOutOfBounds { row: usize, col: usize },
    #[error("duplicate entry at ({row}, {col})")]
    Duplicate { row: usize, col: usize },
    #[error("invalid CRS structure: {0}")]
    InvalidCrs(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
