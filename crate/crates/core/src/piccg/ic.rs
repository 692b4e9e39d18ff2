use serde::{Deserialize, Serialize};

use super::{IcParams, PiccgError};
use crate::matrix::{CrsMatrix, DenseMatrix};

const MAX_SHIFT_RETRIES: usize = 8;
const INITIAL_SHIFT: f64 = 0.01;

/// Incomplete factorization `S A S ~ U^T D U` of a symmetrically scaled
/// matrix, `S = diag(1/sqrt(a_ii))`.
///
/// `u` stores the strict upper triangle of the unit upper triangular factor.
/// `fill_level` runs parallel to `u.vals()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcFactor {
    pub u: CrsMatrix,
    pub d: Vec<f64>,
    pub fill_level: Vec<u32>,
    pub scale: Vec<f64>,
    /// Diagonal shift added to the scaled matrix (unit diagonal), 0 if none.
    pub shift_used: f64,
}

impl IcFactor {
    pub fn order(&self) -> usize {
        self.d.len()
    }

    /// Stored entries of `U`, unit diagonal included.
    pub fn nnz(&self) -> usize {
        self.u.nnz() + self.d.len()
    }

    /// Strict upper pattern of `U` as `(row, col)` pairs.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        self.u.strict_upper_pattern()
    }

    /// `U^T D U` as a dense matrix (in scaled coordinates).
    pub fn product(&self) -> DenseMatrix {
        let n = self.order();
        let mut du = vec![0.0; n * n];
        for i in 0..n {
            du[i * n + i] = self.d[i];
            let (cols, vals) = self.u.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                du[i * n + j] = self.d[i] * v;
            }
        }
        // (U^T)(DU): row i of U^T is column i of U
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            let (cols, vals) = self.u.row(k);
            let mut col_entries: Vec<(usize, f64)> = vec![(k, 1.0)];
            col_entries.extend(cols.iter().copied().zip(vals.iter().copied()));
            for &(i, uki) in &col_entries {
                for j in 0..n {
                    out[i * n + j] += uki * du[k * n + j];
                }
            }
        }
        DenseMatrix::new(n, n, out).expect("finite factor")
    }
}

fn check_input(a: &CrsMatrix) -> Result<Vec<f64>, PiccgError> {
    if a.rows() != a.cols() {
        return Err(PiccgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_symmetric() {
        return Err(PiccgError::NotSymmetric);
    }
    let diag = a.diagonal();
    let mut scale = Vec::with_capacity(diag.len());
    for (row, &v) in diag.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(PiccgError::NonPositiveDiagonal { row });
        }
        scale.push(1.0 / v.sqrt());
    }
    Ok(scale)
}

struct Partial {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    levels: Vec<u32>,
    d: Vec<f64>,
}

/// Up-looking row factorization of the scaled matrix plus `shift * I`.
/// Returns the failing row on a non-positive pivot.
fn factor_rows(a: &CrsMatrix, scale: &[f64], p: &IcParams, shift: f64) -> Result<Partial, usize> {
    let n = a.rows();
    let mut out = Partial {
        row_ptr: Vec::with_capacity(n + 1),
        col_idx: Vec::new(),
        vals: Vec::new(),
        levels: Vec::new(),
        d: Vec::with_capacity(n),
    };
    out.row_ptr.push(0);
    // rows k < i holding an entry in column i
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    // cursor into row k: position of its first entry not yet passed
    let mut cursor: Vec<usize> = Vec::with_capacity(n);

    let mut work = vec![0.0; n];
    let mut level = vec![u32::MAX; n];
    let mut touched: Vec<usize> = Vec::new();

    for i in 0..n {
        let (cols, vals) = a.row(i);
        let mut di = shift;
        for (&j, &v) in cols.iter().zip(vals) {
            let sv = scale[i] * v * scale[j];
            if j == i {
                di += sv;
            } else if j > i && v != 0.0 {
                work[j] = sv;
                level[j] = 0;
                touched.push(j);
            }
        }
        for &k in &col_rows[i] {
            let c = cursor[k];
            debug_assert_eq!(out.col_idx[c], i);
            let uki = out.vals[c];
            let fki = out.levels[c];
            let dk = out.d[k];
            di -= uki * uki * dk;
            let factor = uki * dk;
            for e in c + 1..out.row_ptr[k + 1] {
                let j = out.col_idx[e];
                if level[j] == u32::MAX {
                    work[j] = 0.0;
                    touched.push(j);
                }
                work[j] -= factor * out.vals[e];
                level[j] = level[j].min(fki.saturating_add(out.levels[e]).saturating_add(1));
            }
            cursor[k] = c + 1;
        }
        if !(di > 0.0) || !di.is_finite() {
            return Err(i);
        }
        touched.sort_unstable();
        for &j in &touched {
            let u = work[j] / di;
            let f = level[j];
            let keep = f == 0 || (p.admits_level(f) && u.abs() >= p.threshold);
            if keep {
                col_rows[j].push(i);
                out.col_idx.push(j);
                out.vals.push(u);
                out.levels.push(f);
            }
            work[j] = 0.0;
            level[j] = u32::MAX;
        }
        touched.clear();
        cursor.push(out.row_ptr[i]);
        out.row_ptr.push(out.col_idx.len());
        out.d.push(di);
    }
    Ok(out)
}

/// Thresholded incomplete Cholesky with fill levels.
///
/// Original (level 0) entries are always kept. A fill entry survives when
/// its level passes [`IcParams`] and `|u_ij| >= t` in scaled coordinates.
/// On a non-positive pivot the factorization restarts on `S A S + alpha I`
/// with `alpha = 0.01, 0.02, ...`, at most eight times.
pub fn ic_factorize(a: &CrsMatrix, p: &IcParams) -> Result<IcFactor, PiccgError> {
    p.validate()?;
    let scale = check_input(a)?;
    let mut shift = 0.0;
    let mut last_row = 0;
    for attempt in 0..=MAX_SHIFT_RETRIES {
        if attempt > 0 {
            shift = INITIAL_SHIFT * f64::powi(2.0, attempt as i32 - 1);
        }
        match factor_rows(a, &scale, p, shift) {
            Ok(part) => {
                let n = a.rows();
                let u = CrsMatrix::new(n, n, part.row_ptr, part.col_idx, part.vals)
                    .map_err(|e| PiccgError::Dimension(e.to_string()))?;
                return Ok(IcFactor {
                    u,
                    d: part.d,
                    fill_level: part.levels,
                    scale,
                    shift_used: shift,
                });
            }
            Err(row) => last_row = row,
        }
    }
    Err(PiccgError::Breakdown {
        row: last_row,
        shift,
    })
}

/// `z = S (U^T D U)^{-1} S r`.
pub fn apply_preconditioner(f: &IcFactor, r: &[f64]) -> Result<Vec<f64>, PiccgError> {
    let n = f.order();
    if r.len() != n {
        return Err(PiccgError::Dimension(format!(
            "factor order {n}, vector length {}",
            r.len()
        )));
    }
    let mut z = Vec::with_capacity(n);
    apply_into(f, r, &mut z);
    Ok(z)
}

pub(crate) fn apply_into(f: &IcFactor, r: &[f64], z: &mut Vec<f64>) {
    let n = f.order();
    z.clear();
    z.extend(r.iter().zip(&f.scale).map(|(a, b)| a * b));
    // U^T v = S r, column sweep over the rows of U
    for i in 0..n {
        let vi = z[i];
        let (cols, vals) = f.u.row(i);
        for (&j, &u) in cols.iter().zip(vals) {
            z[j] -= u * vi;
        }
    }
    for (v, d) in z.iter_mut().zip(&f.d) {
        *v /= d;
    }
    for i in (0..n).rev() {
        let (cols, vals) = f.u.row(i);
        let mut s = z[i];
        for (&j, &u) in cols.iter().zip(vals) {
            s -= u * z[j];
        }
        z[i] = s;
    }
    for (v, s) in z.iter_mut().zip(&f.scale) {
        *v *= s;
    }
}
