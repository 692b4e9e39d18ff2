//! Thresholded incomplete Cholesky with fill levels, the preconditioned CG
//! solver built on it, and the P3D heat-conduction test problem.

mod ic;
mod p3d;
mod pcg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ic::{apply_preconditioner, ic_factorize, IcFactor};
pub use p3d::{default_layer, p3d_generate, P3dProblem};
pub use pcg::{pcg_with_factor, piccg_solve, SolveReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PiccgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("non-positive diagonal entry at row {row}")]
    NonPositiveDiagonal { row: usize },
    #[error("pivot breakdown at row {row} after shifting by {shift}")]
    Breakdown { row: usize, shift: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Fill-level and threshold controls of the incomplete factorization.
///
/// `max_fill_level = None` requests a complete factorization. Levels count
/// the original pattern as the first level: a fill entry of level `f` (the
/// usual `f_ik + f_kj + 1` recursion, originals at 0) survives only when
/// `f < m`, so `m = 0` and `m = 1` both give the zero-fill factorization and
/// `m = 2` admits first-generation fill.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcParams {
    pub max_fill_level: Option<u32>,
    pub threshold: f64,
}

impl IcParams {
    pub fn new(max_fill_level: u32, threshold: f64) -> Self {
        Self {
            max_fill_level: Some(max_fill_level),
            threshold,
        }
    }

    pub fn complete() -> Self {
        Self {
            max_fill_level: None,
            threshold: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), PiccgError> {
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return Err(PiccgError::InvalidParams(format!(
                "threshold must be finite and non-negative, got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Whether a fill entry of level `f >= 1` passes the level test.
    pub(crate) fn admits_level(&self, f: u32) -> bool {
        self.max_fill_level.is_none_or(|m| f < m)
    }
}
