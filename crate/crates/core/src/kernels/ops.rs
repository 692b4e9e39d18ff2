//! Primitive products. Every kernel reduces each output element in a fixed
//! order (ascending k for dense operands, stored order for sparse ones),
//! starting from `+0.0`, so results do not depend on the parallel schedule.

use rayon::prelude::*;

use super::{BlockConfig, KernelError};
use crate::matrix::{CrsMatrix, DenseMatrix, EllMatrix};

/// Row-wise access shared by the CRS and ELL formats.
pub trait SparseRows: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn row_entries(&self, i: usize) -> (&[usize], &[f64]);
}

impl SparseRows for CrsMatrix {
    fn n_rows(&self) -> usize {
        self.rows()
    }
    fn n_cols(&self) -> usize {
        self.cols()
    }
    #[inline]
    fn row_entries(&self, i: usize) -> (&[usize], &[f64]) {
        self.row(i)
    }
}

impl SparseRows for EllMatrix {
    fn n_rows(&self) -> usize {
        self.rows()
    }
    fn n_cols(&self) -> usize {
        self.cols()
    }
    #[inline]
    fn row_entries(&self, i: usize) -> (&[usize], &[f64]) {
        self.row(i)
    }
}

fn dims(what: &str, left: usize, right: usize) -> Result<(), KernelError> {
    if left == right {
        Ok(())
    } else {
        Err(KernelError::Dimension(format!("{what}: {left} vs {right}")))
    }
}

#[inline]
pub(crate) fn sparse_dot<S: SparseRows + ?Sized>(a: &S, i: usize, x: &[f64]) -> f64 {
    let (cols, vals) = a.row_entries(i);
    let mut s = 0.0;
    for (&k, &v) in cols.iter().zip(vals) {
        s += v * x[k];
    }
    s
}

/// `out_row = a[i, :] * b` with b row-major; ascending-k accumulation.
#[inline]
pub(crate) fn gemm_row(a_row: &[f64], b: &DenseMatrix, out_row: &mut [f64]) {
    out_row.fill(0.0);
    for (k, &av) in a_row.iter().enumerate() {
        let br = b.row(k);
        for (o, &bv) in out_row.iter_mut().zip(br) {
            *o += av * bv;
        }
    }
}

#[inline]
pub(crate) fn spmm_row<S: SparseRows + ?Sized>(
    a: &S,
    i: usize,
    b: &DenseMatrix,
    out_row: &mut [f64],
) {
    out_row.fill(0.0);
    let (cols, vals) = a.row_entries(i);
    for (&k, &av) in cols.iter().zip(vals) {
        let br = b.row(k);
        for (o, &bv) in out_row.iter_mut().zip(br) {
            *o += av * bv;
        }
    }
}

/// Block of columns `[j0, j1)` of one output row.
#[inline]
pub(crate) fn spmm_row_block<S: SparseRows + ?Sized>(
    a: &S,
    i: usize,
    b: &DenseMatrix,
    j0: usize,
    j1: usize,
    out_row: &mut [f64],
) {
    let out = &mut out_row[j0..j1];
    out.fill(0.0);
    let (cols, vals) = a.row_entries(i);
    for (&k, &av) in cols.iter().zip(vals) {
        let br = &b.row(k)[j0..j1];
        for (o, &bv) in out.iter_mut().zip(br) {
            *o += av * bv;
        }
    }
}

pub fn dense_gemm(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, KernelError> {
    dims("gemm inner dimension", a.cols(), b.rows())?;
    let m = b.cols();
    let mut out = vec![0.0; a.rows() * m];
    out.par_chunks_mut(m.max(1))
        .enumerate()
        .for_each(|(i, row)| gemm_row(a.row(i), b, row));
    Ok(DenseMatrix::from_parts(a.rows(), m, out))
}

fn spmv<S: SparseRows>(a: &S, x: &[f64]) -> Result<Vec<f64>, KernelError> {
    dims("spmv vector length", a.n_cols(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(KernelError::NonFinite);
    }
    Ok((0..a.n_rows()).map(|i| sparse_dot(a, i, x)).collect())
}

pub fn spmv_crs(a: &CrsMatrix, x: &[f64]) -> Result<Vec<f64>, KernelError> {
    spmv(a, x)
}

pub fn spmv_ell(a: &EllMatrix, x: &[f64]) -> Result<Vec<f64>, KernelError> {
    spmv(a, x)
}

fn spmm<S: SparseRows>(a: &S, b: &DenseMatrix) -> Result<DenseMatrix, KernelError> {
    dims("spmm inner dimension", a.n_cols(), b.rows())?;
    let m = b.cols();
    let mut out = vec![0.0; a.n_rows() * m];
    out.par_chunks_mut(m.max(1))
        .enumerate()
        .for_each(|(i, row)| spmm_row(a, i, b, row));
    Ok(DenseMatrix::from_parts(a.n_rows(), m, out))
}

fn spmm_blocked<S: SparseRows>(
    a: &S,
    b: &DenseMatrix,
    blk: BlockConfig,
) -> Result<DenseMatrix, KernelError> {
    dims("spmm inner dimension", a.n_cols(), b.rows())?;
    let m = b.cols();
    blk.validate(m)?;
    let mut out = vec![0.0; a.n_rows() * m];
    let mut j0 = 0;
    while j0 < m {
        let j1 = (j0 + blk.block_width).min(m);
        out.par_chunks_mut(m)
            .enumerate()
            .for_each(|(i, row)| spmm_row_block(a, i, b, j0, j1, row));
        j0 = j1;
    }
    Ok(DenseMatrix::from_parts(a.n_rows(), m, out))
}

pub fn spmm_crs(a: &CrsMatrix, b: &DenseMatrix) -> Result<DenseMatrix, KernelError> {
    spmm(a, b)
}

/// Multi-RHS product processing `block_width` right-hand-side columns at a
/// time, so each sparse row is reused across the block.
pub fn spmm_crs_blocked(
    a: &CrsMatrix,
    b: &DenseMatrix,
    blk: BlockConfig,
) -> Result<DenseMatrix, KernelError> {
    spmm_blocked(a, b, blk)
}

pub fn spmm_ell(a: &EllMatrix, b: &DenseMatrix) -> Result<DenseMatrix, KernelError> {
    spmm(a, b)
}

pub fn spmm_ell_blocked(
    a: &EllMatrix,
    b: &DenseMatrix,
    blk: BlockConfig,
) -> Result<DenseMatrix, KernelError> {
    spmm_blocked(a, b, blk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{gen_identity_mix, gen_random_scaled};

    fn dense_matvec(a: &DenseMatrix, x: &[f64]) -> Vec<f64> {
        (0..a.rows())
            .map(|i| {
                let mut s = 0.0;
                for (k, &v) in a.row(i).iter().enumerate() {
                    if v != 0.0 {
                        s += v * x[k];
                    }
                }
                s
            })
            .collect()
    }

    #[test]
    fn identity_spmv_is_exact() {
        let x = vec![0.1, -2.5, 3.0e10, 7.0];
        assert_eq!(spmv_crs(&CrsMatrix::identity(4), &x).unwrap(), x);
    }

    #[test]
    fn spmv_matches_dense_in_same_order() {
        let a = gen_random_scaled(40, 0.7, 6, 3).unwrap();
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = CrsMatrix::from_dense(&a, 0.0).unwrap();
        assert_eq!(spmv_crs(&c, &x).unwrap(), dense_matvec(&a, &x));
    }

    #[test]
    fn empty_row_gives_zero() {
        let c = CrsMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (2, 1, 2.0)]).unwrap();
        let y = spmv_crs(&c, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(y[1].to_bits(), 0.0f64.to_bits());
        assert_eq!(
            spmv_ell(&EllMatrix::from_crs(&c), &[1.0, 1.0, 1.0]).unwrap(),
            y
        );
    }

    #[test]
    fn ell_kernels_match_crs() {
        let a = gen_identity_mix(60, 0.9, 4).unwrap();
        let b = gen_random_scaled(60, 0.1, 4, 8).unwrap();
        let c = CrsMatrix::from_dense(&a, 0.0).unwrap();
        let e = EllMatrix::from_crs(&c);
        let x = b.row(3).to_vec();
        assert_eq!(spmv_ell(&e, &x).unwrap(), spmv_crs(&c, &x).unwrap());
        assert_eq!(spmm_ell(&e, &b).unwrap(), spmm_crs(&c, &b).unwrap());
        let blk = BlockConfig { block_width: 7 };
        assert_eq!(
            spmm_ell_blocked(&e, &b, blk).unwrap(),
            spmm_crs(&c, &b).unwrap()
        );
    }

    #[test]
    fn blocking_never_changes_values() {
        let a = CrsMatrix::from_dense(&gen_random_scaled(30, 0.8, 10, 1).unwrap(), 0.0).unwrap();
        let b = gen_random_scaled(30, 0.0, 10, 2).unwrap();
        let full = spmm_crs_blocked(&a, &b, BlockConfig { block_width: 30 }).unwrap();
        assert_eq!(full, spmm_crs(&a, &b).unwrap());
        for w in [1, 4, 29] {
            assert_eq!(
                spmm_crs_blocked(&a, &b, BlockConfig { block_width: w }).unwrap(),
                full
            );
        }
        assert!(matches!(
            spmm_crs_blocked(&a, &b, BlockConfig { block_width: 0 }),
            Err(KernelError::InvalidBlock { .. })
        ));
    }

    #[test]
    fn gemm_identity_and_mismatch() {
        let b = gen_random_scaled(9, 0.0, 30, 6).unwrap();
        assert_eq!(dense_gemm(&DenseMatrix::identity(9), &b).unwrap(), b);
        assert!(dense_gemm(&DenseMatrix::zeros(2, 3), &b).is_err());
        assert!(spmv_crs(&CrsMatrix::identity(3), &[1.0]).is_err());
    }
}
