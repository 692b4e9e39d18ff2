//! Error-free splitting of matrix products.
//!
//! `A` is split by rows and `B` by columns into matrices whose pairwise
//! products are exact in binary64; the products are then summed per element
//! with an exact accumulator and rounded once.

mod accumulator;
mod split;

use rayon::prelude::*;
use thiserror::Error;

use crate::matrix::DenseMatrix;

pub use accumulator::{correctly_rounded_sum, AccumulatorResult, ExactAccumulator};
pub use split::{
    bits_per_split, count_splits, split_matrix, Split, SplitConfig, SplitCounts, SplitSet,
    SplitSide,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OzakiError {
    #[error("non-finite input value")]
    NonFinite,
    #[error("exact sum exceeds the binary64 range")]
    AccumulatorOverflow,
    #[error("magnitude {0:e} too large to split")]
    OutOfRange(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid split configuration: {0}")]
    InvalidConfig(String),
}

/// Result of [`accurate_matmul`].
#[derive(Clone, Debug, PartialEq)]
pub struct AccurateProduct {
    pub result: DenseMatrix,
    /// Set when either operand hit the split cap, in which case products of
    /// the final split may have been rounded.
    pub degraded: bool,
    pub splits_a: usize,
    pub splits_b: usize,
}

/// Working-set budget for buffered pairwise products, in f64 slots.
const PRODUCT_BUFFER_SLOTS: usize = 1 << 23;

/// Rows of output to buffer at once when `pairs` products of width `cols`
/// are reduced together.
pub(crate) fn chunk_rows(pairs: usize, cols: usize) -> usize {
    (PRODUCT_BUFFER_SLOTS / (pairs * cols).max(1)).max(1)
}

/// Reduces `pairs` buffered product slices of shape `rows x cols`
/// (layout `[pair][row][col]`) into `out` with one correct rounding per
/// element.
pub(crate) fn reduce_products(
    buf: &[f64],
    pairs: usize,
    rows: usize,
    cols: usize,
    out: &mut [f64],
) -> Result<(), OzakiError> {
    let plane = rows * cols;
    debug_assert_eq!(buf.len(), pairs * plane);
    out.par_chunks_mut(cols.max(1))
        .enumerate()
        .try_for_each(|(r, orow)| {
            let mut acc = ExactAccumulator::new();
            for (c, o) in orow.iter_mut().enumerate() {
                acc.clear();
                let at = r * cols + c;
                for p in 0..pairs {
                    acc.add(buf[p * plane + at]);
                }
                *o = acc.round()?.value;
            }
            Ok(())
        })
}

/// `C = A * B`, each element the correctly rounded value of the exact sum of
/// the split products.
pub fn accurate_matmul(
    a: &DenseMatrix,
    b: &DenseMatrix,
    cfg: &SplitConfig,
) -> Result<AccurateProduct, OzakiError> {
    if a.cols() != b.rows() {
        return Err(OzakiError::Dimension(format!(
            "{}x{} times {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let sa = split_matrix(a, SplitSide::RowSplit, cfg)?;
    let sb = split_matrix(b, SplitSide::ColSplit, cfg)?;
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let pairs = sa.len() * sb.len();
    let mut out = vec![0.0; n * m];
    let step = chunk_rows(pairs, m);
    let mut r0 = 0;
    while r0 < n {
        let r1 = (r0 + step).min(n);
        let h = r1 - r0;
        let mut buf = vec![0.0; pairs * h * m];
        buf.par_chunks_mut((h * m).max(1))
            .enumerate()
            .for_each(|(pair, plane)| {
                let (p, q) = (pair / sb.len(), pair % sb.len());
                let (x, y) = (&sa.splits[p].dense, &sb.splits[q].dense);
                for (r, row) in plane.chunks_mut(m.max(1)).enumerate() {
                    let xr = x.row(r0 + r);
                    for (j, o) in row.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for t in 0..k {
                            s += xr[t] * y.get(t, j);
                        }
                        *o = s;
                    }
                }
            });
        reduce_products(&buf, pairs, h, m, &mut out[r0 * m..r1 * m])?;
        r0 = r1;
    }
    Ok(AccurateProduct {
        result: DenseMatrix::from_parts(n, m, out),
        degraded: !(sa.remainder_zero && sb.remainder_zero),
        splits_a: sa.len(),
        splits_b: sb.len(),
    })
}

/// Plain binary64 product with ascending-k accumulation, for comparison.
pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, OzakiError> {
    if a.cols() != b.rows() {
        return Err(OzakiError::Dimension(format!(
            "{} vs {}",
            a.cols(),
            b.rows()
        )));
    }
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a.get(i, t) * b.get(t, j);
            }
            out[i * m + j] = s;
        }
    }
    Ok(DenseMatrix::from_parts(n, m, out))
}
