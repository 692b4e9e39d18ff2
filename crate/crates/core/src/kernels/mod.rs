//! The implementation-variant space for accurate matrix multiplication and
//! the CPU kernels behind the executable variants.

mod ops;

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{CrsMatrix, DenseMatrix, EllMatrix};
use crate::ozaki::{chunk_rows, reduce_products, OzakiError, SplitSet, SplitSide};

pub use ops::{
    dense_gemm, spmm_crs, spmm_crs_blocked, spmm_ell, spmm_ell_blocked, spmv_crs, spmv_ell,
    SparseRows,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("variant {0} is not executable on this host")]
    UnsupportedVariant(VariantId),
    #[error("unknown variant id {0}")]
    UnknownVariant(u8),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("block width {width} outside 1..={cols}")]
    InvalidBlock { width: usize, cols: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Accumulate(#[from] OzakiError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageFormat {
    Dense,
    Crs,
    Ell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Gemm,
    SpmvInternal,
    SpmvExternal,
    Spmm,
    SpmmBlocked,
    Batched,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Cpu,
    Gpu,
}

/// Static description of one implementation variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VariantInfo {
    pub id: u8,
    pub label: &'static str,
    pub device: Device,
    pub format: StorageFormat,
    pub scheme: Scheme,
}

impl VariantInfo {
    pub fn executable(&self) -> bool {
        self.device == Device::Cpu
    }
}

const VARIANTS: [VariantInfo; 14] = {
    use Device::*;
    use Scheme::*;
    use StorageFormat::*;
    const fn v(
        id: u8,
        label: &'static str,
        device: Device,
        format: StorageFormat,
        scheme: Scheme,
    ) -> VariantInfo {
        VariantInfo {
            id,
            label,
            device,
            format,
            scheme,
        }
    }
    [
        v(1, "BLAS dgemm call (dgemm)", Cpu, Dense, Gemm),
        v(2, "CRS, SpMV - internal parallel", Cpu, Crs, SpmvInternal),
        v(3, "CRS, SpMV - external parallel", Cpu, Crs, SpmvExternal),
        v(
            4,
            "CRS, SpMV - multiple right-hand sides/internal parallel",
            Cpu,
            Crs,
            Spmm,
        ),
        v(
            5,
            "CRS, SpMV - multiple right-hand sides, internal parallel blocking",
            Cpu,
            Crs,
            SpmmBlocked,
        ),
        v(
            6,
            "ELL, SpMV - internal parallelism",
            Cpu,
            Ell,
            SpmvInternal,
        ),
        v(
            7,
            "ELL, SpMV - external parallelism",
            Cpu,
            Ell,
            SpmvExternal,
        ),
        v(
            8,
            "ELL, SpMV - multiple right-hand sides, internal parallelism",
            Cpu,
            Ell,
            Spmm,
        ),
        v(
            9,
            "ELL, SpMV - multiple right-hand sides/internal parallelism blocking",
            Cpu,
            Ell,
            SpmmBlocked,
        ),
        v(
            10,
            "GPU batched BLAS call, dense matrix operation",
            Gpu,
            Dense,
            Batched,
        ),
        v(11, "GPU dgemm, dense matrix operation", Gpu, Dense, Gemm),
        v(12, "GPU CRS, SpMV", Gpu, Crs, SpmvInternal),
        v(13, "GPU ELL, SpMV", Gpu, Ell, SpmvInternal),
        v(14, "GPU CRS, SpMM", Gpu, Crs, Spmm),
    ]
};

/// Identifier of one of the 14 implementation variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct VariantId(u8);

impl VariantId {
    pub fn new(id: u8) -> Result<Self, KernelError> {
        if (1..=14).contains(&id) {
            Ok(Self(id))
        } else {
            Err(KernelError::UnknownVariant(id))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn info(self) -> &'static VariantInfo {
        &VARIANTS[self.0 as usize - 1]
    }

    pub fn all() -> impl Iterator<Item = VariantId> {
        (1..=14).map(VariantId)
    }

    pub fn executable() -> impl Iterator<Item = VariantId> {
        Self::all().filter(|v| v.info().executable())
    }

    /// Dense-scheme variants (plain matrix products).
    pub fn is_dense_scheme(self) -> bool {
        self.info().format == StorageFormat::Dense
    }
}

impl TryFrom<u8> for VariantId {
    type Error = KernelError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<VariantId> for u8 {
    fn from(v: VariantId) -> u8 {
        v.0
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Number of right-hand-side columns processed together by the blocked
/// schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub block_width: usize,
}

impl BlockConfig {
    pub fn validate(&self, rhs_cols: usize) -> Result<(), KernelError> {
        if self.block_width == 0 || self.block_width > rhs_cols.max(1) {
            return Err(KernelError::InvalidBlock {
                width: self.block_width,
                cols: rhs_cols,
            });
        }
        Ok(())
    }
}

/// One timed execution of a variant.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelRun {
    pub variant: VariantId,
    pub elapsed_seconds: f64,
    pub result: DenseMatrix,
}

enum LeftOperand {
    Dense(Vec<DenseMatrix>),
    Crs(Vec<CrsMatrix>),
    Ell(Vec<EllMatrix>),
}

/// Computes all `p x q` split products of one output row chunk into `plane`
/// slices according to the variant's scheme.
fn product_chunk<S: SparseRows>(
    left: &[S],
    right: &[DenseMatrix],
    right_t: &[DenseMatrix],
    scheme: Scheme,
    blk: BlockConfig,
    r0: usize,
    h: usize,
    buf: &mut [f64],
) {
    let m = right.first().map_or(0, DenseMatrix::cols);
    let q = right.len();
    let plane = h * m;
    if plane == 0 {
        return;
    }
    let spmv_plane = |a: &S, bt: &DenseMatrix, out: &mut [f64], par: bool| {
        for j in 0..m {
            let x = bt.row(j);
            if par {
                let y: Vec<f64> = (0..h)
                    .into_par_iter()
                    .map(|r| ops::sparse_dot(a, r0 + r, x))
                    .collect();
                for (r, v) in y.into_iter().enumerate() {
                    out[r * m + j] = v;
                }
            } else {
                for r in 0..h {
                    out[r * m + j] = ops::sparse_dot(a, r0 + r, x);
                }
            }
        }
    };
    match scheme {
        Scheme::SpmvExternal => buf
            .par_chunks_mut(plane)
            .enumerate()
            .for_each(|(pair, out)| {
                spmv_plane(&left[pair / q], &right_t[pair % q], out, false);
            }),
        Scheme::SpmvInternal => {
            for (pair, out) in buf.chunks_mut(plane).enumerate() {
                spmv_plane(&left[pair / q], &right_t[pair % q], out, true);
            }
        }
        Scheme::Spmm | Scheme::Gemm | Scheme::Batched => {
            for (pair, out) in buf.chunks_mut(plane).enumerate() {
                let (a, b) = (&left[pair / q], &right[pair % q]);
                out.par_chunks_mut(m)
                    .enumerate()
                    .for_each(|(r, row)| ops::spmm_row(a, r0 + r, b, row));
            }
        }
        Scheme::SpmmBlocked => {
            for (pair, out) in buf.chunks_mut(plane).enumerate() {
                let (a, b) = (&left[pair / q], &right[pair % q]);
                let mut j0 = 0;
                while j0 < m {
                    let j1 = (j0 + blk.block_width).min(m);
                    out.par_chunks_mut(m)
                        .enumerate()
                        .for_each(|(r, row)| ops::spmm_row_block(a, r0 + r, b, j0, j1, row));
                    j0 = j1;
                }
            }
        }
    }
}

fn dense_chunk(left: &[DenseMatrix], right: &[DenseMatrix], r0: usize, h: usize, buf: &mut [f64]) {
    let m = right.first().map_or(0, DenseMatrix::cols);
    let q = right.len();
    let plane = h * m;
    if plane == 0 {
        return;
    }
    for (pair, out) in buf.chunks_mut(plane).enumerate() {
        let (a, b) = (&left[pair / q], &right[pair % q]);
        out.par_chunks_mut(m)
            .enumerate()
            .for_each(|(r, row)| ops::gemm_row(a.row(r0 + r), b, row));
    }
}

/// Runs variant `v` over the split sets of `A` (row split) and `B` (column
/// split) and returns the correctly rounded product.
///
/// Every pairwise split product goes through the variant's storage format
/// and scheme; the results are bitwise identical across variants, block
/// widths and thread counts.
pub fn run_variant(
    v: VariantId,
    sa: &SplitSet,
    sb: &SplitSet,
    blk: BlockConfig,
    threads: usize,
) -> Result<KernelRun, KernelError> {
    let info = v.info();
    if !info.executable() {
        return Err(KernelError::UnsupportedVariant(v));
    }
    if sa.side != SplitSide::RowSplit || sb.side != SplitSide::ColSplit {
        return Err(KernelError::Dimension(
            "left operand must be row-split and right operand column-split".into(),
        ));
    }
    if sa.cols() != sb.rows() {
        return Err(KernelError::Dimension(format!(
            "inner dimensions {} vs {}",
            sa.cols(),
            sb.rows()
        )));
    }
    let (n, m) = (sa.rows(), sb.cols());
    if info.scheme == Scheme::SpmmBlocked {
        blk.validate(m)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| KernelError::ThreadPool(e.to_string()))?;

    let start = Instant::now();
    let result = pool.install(|| -> Result<DenseMatrix, KernelError> {
        let left = match info.format {
            StorageFormat::Dense => {
                LeftOperand::Dense(sa.splits.iter().map(|s| s.dense.clone()).collect())
            }
            StorageFormat::Crs => LeftOperand::Crs(
                sa.splits
                    .iter()
                    .map(|s| s.crs.clone().unwrap_or_else(|| to_crs(&s.dense)))
                    .collect(),
            ),
            StorageFormat::Ell => LeftOperand::Ell(
                sa.splits
                    .iter()
                    .map(|s| match &s.crs {
                        Some(c) => EllMatrix::from_crs(c),
                        None => EllMatrix::from_crs(&to_crs(&s.dense)),
                    })
                    .collect(),
            ),
        };
        let right: Vec<DenseMatrix> = sb.splits.iter().map(|s| s.dense.clone()).collect();
        let right_t: Vec<DenseMatrix> =
            if matches!(info.scheme, Scheme::SpmvInternal | Scheme::SpmvExternal) {
                right.par_iter().map(DenseMatrix::transpose).collect()
            } else {
                Vec::new()
            };
        let pairs = sa.len() * sb.len();
        let mut out = vec![0.0; n * m];
        let step = chunk_rows(pairs, m);
        let mut r0 = 0;
        while r0 < n {
            let r1 = (r0 + step).min(n);
            let h = r1 - r0;
            let mut buf = vec![0.0; pairs * h * m];
            match &left {
                LeftOperand::Dense(l) => dense_chunk(l, &right, r0, h, &mut buf),
                LeftOperand::Crs(l) => {
                    product_chunk(l, &right, &right_t, info.scheme, blk, r0, h, &mut buf)
                }
                LeftOperand::Ell(l) => {
                    product_chunk(l, &right, &right_t, info.scheme, blk, r0, h, &mut buf)
                }
            }
            reduce_products(&buf, pairs, h, m, &mut out[r0 * m..r1 * m])?;
            r0 = r1;
        }
        Ok(DenseMatrix::from_parts(n, m, out))
    })?;
    let elapsed_seconds = start.elapsed().as_secs_f64().max(1e-9);
    Ok(KernelRun {
        variant: v,
        elapsed_seconds,
        result,
    })
}

fn to_crs(m: &DenseMatrix) -> CrsMatrix {
    CrsMatrix::from_dense(m, 0.0).expect("zero tolerance is valid")
}
