use serde::{Deserialize, Serialize};

use super::{DenseMatrix, MatrixError};

/// Compressed row storage.
///
/// Column indices are strictly increasing within each row. Stored zeros are
/// allowed but recorded in `explicit_zeros` so callers can tell a structural
/// entry from a numerical one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrsMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    explicit_zeros: bool,
}

impl CrsMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<f64>,
    ) -> Result<Self, MatrixError> {
        let explicit_zeros = vals.contains(&0.0);
        let m = Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            vals,
            explicit_zeros,
        };
        m.validate()?;
        Ok(m)
    }

    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<f64>,
    ) -> Self {
        let explicit_zeros = vals.contains(&0.0);
        let m = Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            vals,
            explicit_zeros,
        };
        debug_assert!(m.validate().is_ok(), "{:?}", m.validate());
        m
    }

    /// Builds from `(row, col, value)` triplets in any order. Duplicate
    /// positions are an error.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self, MatrixError> {
        for &(i, j, v) in &triplets {
            if i >= rows || j >= cols {
                return Err(MatrixError::IndexOutOfBounds { row: i, col: j });
            }
            if !v.is_finite() {
                return Err(MatrixError::NonFinite { row: i, col: j });
            }
        }
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        for w in triplets.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(MatrixError::Duplicate {
                    row: w[0].0,
                    col: w[0].1,
                });
            }
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for &(i, _, _) in &triplets {
            row_ptr[i + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = triplets.iter().map(|t| t.1).collect();
        let vals = triplets.iter().map(|t| t.2).collect();
        Self::new(rows, cols, row_ptr, col_idx, vals)
    }

    /// Converts a dense matrix, omitting entries with `|v| <= drop_tol`.
    /// With `drop_tol = 0` only exact zeros are omitted and the conversion is
    /// lossless.
    pub fn from_dense(m: &DenseMatrix, drop_tol: f64) -> Result<Self, MatrixError> {
        if !(drop_tol >= 0.0) {
            return Err(MatrixError::InvalidArgument(format!(
                "drop tolerance must be non-negative, got {drop_tol}"
            )));
        }
        let mut row_ptr = Vec::with_capacity(m.rows() + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v.abs() > drop_tol {
                    col_idx.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_parts(m.rows(), m.cols(), row_ptr, col_idx, vals))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                data[i * self.cols + j] = v;
            }
        }
        DenseMatrix::from_parts(self.rows, self.cols, data)
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), MatrixError> {
        let bad = |msg: String| Err(MatrixError::InvalidCrs(msg));
        if self.row_ptr.len() != self.rows + 1 {
            return bad(format!(
                "row_ptr has length {}, expected {}",
                self.row_ptr.len(),
                self.rows + 1
            ));
        }
        if self.row_ptr[0] != 0 {
            return bad("row_ptr[0] must be 0".into());
        }
        if self.col_idx.len() != self.vals.len() {
            return bad("col_idx and vals differ in length".into());
        }
        if self.row_ptr[self.rows] != self.vals.len() {
            return bad("row_ptr[rows] must equal nnz".into());
        }
        for i in 0..self.rows {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            if s > e {
                return bad(format!("row_ptr decreases at row {i}"));
            }
            let cols = &self.col_idx[s..e];
            if let Some(&j) = cols.iter().find(|&&j| j >= self.cols) {
                return bad(format!("column {j} out of bounds in row {i}"));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("columns not strictly increasing in row {i}"));
            }
        }
        if let Some(v) = self.vals.iter().find(|v| !v.is_finite()) {
            return bad(format!("non-finite value {v}"));
        }
        if !self.explicit_zeros && self.vals.contains(&0.0) {
            return bad("unflagged explicit zero".into());
        }
        Ok(())
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
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    pub fn has_explicit_zeros(&self) -> bool {
        self.explicit_zeros
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.vals[s..e])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn transpose(&self) -> CrsMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            let (cols, vs) = self.row(i);
            for (&j, &v) in cols.iter().zip(vs) {
                let slot = next[j];
                col_idx[slot] = i;
                vals[slot] = v;
                next[j] += 1;
            }
        }
        CrsMatrix {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            vals,
            explicit_zeros: self.explicit_zeros,
        }
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose()
    }

    /// Pattern of the strictly upper triangle as `(row, col)` pairs.
    pub fn strict_upper_pattern(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            for &j in self.row(i).0 {
                if j > i {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// ELLPACK storage: every row padded to the widest row.
///
/// Padding slots hold value 0.0 and repeat the row's last valid column (or
/// column 0 for an empty row), so gathers through padding stay in bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllMatrix {
    rows: usize,
    cols: usize,
    width: usize,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl EllMatrix {
    pub fn from_crs(m: &CrsMatrix) -> Self {
        let width = (0..m.rows()).map(|i| m.row_nnz(i)).max().unwrap_or(0);
        let mut col_idx = Vec::with_capacity(m.rows() * width);
        let mut vals = Vec::with_capacity(m.rows() * width);
        for i in 0..m.rows() {
            let (cols, vs) = m.row(i);
            col_idx.extend_from_slice(cols);
            vals.extend_from_slice(vs);
            let sentinel = cols.last().copied().unwrap_or(0);
            for _ in cols.len()..width {
                col_idx.push(sentinel);
                vals.push(0.0);
            }
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            width,
            col_idx,
            vals,
        }
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
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of stored slots, padding included.
    pub fn storage_len(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let s = i * self.width;
        (
            &self.col_idx[s..s + self.width],
            &self.vals[s..s + self.width],
        )
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if v != 0.0 {
                    data[i * self.cols + j] = v;
                }
            }
        }
        DenseMatrix::from_parts(self.rows, self.cols, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_to_crs() {
        let c = CrsMatrix::from_dense(&DenseMatrix::identity(3), 0.0).unwrap();
        assert_eq!(c.nnz(), 3);
        assert_eq!(c.row_ptr(), &[0, 1, 2, 3]);
        c.validate().unwrap();
    }

    #[test]
    fn all_zero_to_crs() {
        let c = CrsMatrix::from_dense(&DenseMatrix::zeros(4, 5), 0.0).unwrap();
        assert_eq!(c.nnz(), 0);
        assert_eq!(c.row_ptr(), &[0; 5]);
    }

    #[test]
    fn drop_tolerance_omits_small_entries() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 1e-9], vec![-1e-3, 2.0]]).unwrap();
        let c = CrsMatrix::from_dense(&m, 1e-6).unwrap();
        assert_eq!(c.nnz(), 3);
        assert!(CrsMatrix::from_dense(&m, -1.0).is_err());
    }

    #[test]
    fn identity_to_ell_has_width_one() {
        let e = EllMatrix::from_crs(&CrsMatrix::identity(5));
        assert_eq!(e.width(), 1);
    }

    #[test]
    fn single_dense_row_sets_ell_width() {
        let n = 100;
        let trip = (0..n).map(|j| (37, j, 1.0 + j as f64)).collect();
        let c = CrsMatrix::from_triplets(n, n, trip).unwrap();
        let e = EllMatrix::from_crs(&c);
        assert_eq!(e.width(), 100);
        assert_eq!(e.storage_len(), 100 * 100);
        assert_eq!(e.to_dense(), c.to_dense());
        let (cols, vals) = e.row(0);
        assert!(cols.iter().all(|&j| j == 0));
        assert!(vals.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ell_padding_repeats_last_column() {
        let c =
            CrsMatrix::from_triplets(2, 4, vec![(0, 1, 1.0), (0, 3, 2.0), (1, 2, 3.0)]).unwrap();
        let e = EllMatrix::from_crs(&c);
        assert_eq!(e.row(1), (&[2usize, 2][..], &[3.0, 0.0][..]));
    }

    #[test]
    fn triplet_errors_are_distinct() {
        assert!(matches!(
            CrsMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]),
            Err(MatrixError::IndexOutOfBounds { .. })
        ));
        assert!(matches!(
            CrsMatrix::from_triplets(2, 2, vec![(1, 0, 1.0), (1, 0, 2.0)]),
            Err(MatrixError::Duplicate { row: 1, col: 0 })
        ));
    }

    #[test]
    fn validator_catches_unsorted_columns() {
        let err = CrsMatrix::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, MatrixError::InvalidCrs(_)));
    }

    #[test]
    fn transpose_and_symmetry() {
        let c = CrsMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 2.0), (0, 2, 1.0), (2, 0, 1.0), (1, 1, 3.0)],
        )
        .unwrap();
        assert!(c.is_symmetric());
        let a = CrsMatrix::from_triplets(2, 2, vec![(0, 1, 1.0)]).unwrap();
        assert!(!a.is_symmetric());
        assert_eq!(a.transpose().get(1, 0), 1.0);
    }
}
