use serde::{Deserialize, Serialize};

use super::MatrixError;

/// Row-major dense matrix of finite binary64 values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::Shape {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from finite data the caller has already validated.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(MatrixError::Shape {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        DenseMatrix::from_parts(self.cols, self.rows, out)
    }

    /// Fraction of entries that are exactly zero.
    pub fn sparsity(&self) -> Result<f64, MatrixError> {
        if self.data.is_empty() {
            return Err(MatrixError::Empty);
        }
        let zeros = self.data.iter().filter(|&&v| v == 0.0).count();
        Ok(zeros as f64 / self.data.len() as f64)
    }

    pub fn stats(&self) -> Result<MatrixStats, MatrixError> {
        let sparsity = self.sparsity()?;
        let max_abs = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let min_val = self.data.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(MatrixStats {
            sparsity,
            max_abs,
            min_val,
        })
    }

    /// Frobenius norm, scaled to avoid overflow.
    pub fn frobenius_norm(&self) -> f64 {
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let ss: f64 = self.data.iter().map(|v| (v / scale) * (v / scale)).sum();
        scale * ss.sqrt()
    }
}

/// Summary statistics used as tuning features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixStats {
    /// Zero fraction in `[0, 1]`.
    pub sparsity: f64,
    pub max_abs: f64,
    /// Smallest element value, zeros included.
    pub min_val: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_sparsity_is_half() {
        assert_eq!(DenseMatrix::identity(2).sparsity().unwrap(), 0.5);
    }

    #[test]
    fn all_zero_sparsity_is_one() {
        assert_eq!(DenseMatrix::zeros(3, 3).sparsity().unwrap(), 1.0);
    }

    #[test]
    fn empty_matrix_is_rejected() {
        assert!(matches!(
            DenseMatrix::zeros(0, 0).sparsity(),
            Err(MatrixError::Empty)
        ));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let err = DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, MatrixError::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn stats_include_zero_in_minimum() {
        let m = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![-2.0, 5.0]]).unwrap();
        let s = m.stats().unwrap();
        assert_eq!(s.sparsity, 0.25);
        assert_eq!(s.max_abs, 5.0);
        assert_eq!(s.min_val, -2.0);
        let p = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![2.0, 5.0]]).unwrap();
        assert_eq!(p.stats().unwrap().min_val, 0.0);
    }
}
