use serde::{Deserialize, Serialize};

use super::OzakiError;
use crate::matrix::{CrsMatrix, DenseMatrix};

/// Controls how far a matrix is split and how splits are classified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Cap on the number of splits per matrix.
    pub max_splits: usize,
    /// A split whose zero fraction exceeds this is classified sparse.
    pub sparse_threshold: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            max_splits: 8,
            sparse_threshold: 0.8,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), OzakiError> {
        if self.max_splits == 0 {
            return Err(OzakiError::InvalidConfig(
                "max_splits must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.sparse_threshold) {
            return Err(OzakiError::InvalidConfig(format!(
                "sparse_threshold must lie in [0, 1], got {}",
                self.sparse_threshold
            )));
        }
        Ok(())
    }
}

/// Which operand is being split: rows of the left factor or columns of the
/// right factor. The extraction scale is shared along that direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitSide {
    RowSplit,
    ColSplit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub dense: DenseMatrix,
    /// Present when the split is classified sparse.
    pub crs: Option<CrsMatrix>,
    pub zero_fraction: f64,
}

impl Split {
    pub fn is_sparse(&self) -> bool {
        self.crs.is_some()
    }
}

/// Ordered error-free splits of one matrix; split 0 carries the
/// highest-order bits.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSet {
    pub side: SplitSide,
    pub splits: Vec<Split>,
    /// False when `max_splits` was reached and the last split is the raw
    /// remainder, whose products are not guaranteed exact.
    pub remainder_zero: bool,
    /// Length of the dot products the splits were sized for.
    pub inner_dim: usize,
    /// Significant bits admitted per split entry.
    pub bits_per_split: u32,
}

impl SplitSet {
    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.splits.first().map_or(0, |s| s.dense.rows())
    }

    pub fn cols(&self) -> usize {
        self.splits.first().map_or(0, |s| s.dense.cols())
    }

    /// Element-wise sum of the splits in order, in binary64.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut acc = vec![0.0; self.rows() * self.cols()];
        for s in &self.splits {
            for (a, &v) in acc.iter_mut().zip(s.dense.data()) {
                *a += v;
            }
        }
        DenseMatrix::from_parts(self.rows(), self.cols(), acc)
    }
}

/// `(sparse, dense, total)` split counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub sparse: usize,
    pub dense: usize,
    pub total: usize,
}

pub fn count_splits(s: &SplitSet) -> SplitCounts {
    let sparse = s.splits.iter().filter(|x| x.is_sparse()).count();
    SplitCounts {
        sparse,
        dense: s.len() - sparse,
        total: s.len(),
    }
}

/// `floor((53 - ceil(log2 k)) / 2)`: bits per split entry that keep every
/// k-term dot product of split entries exact.
pub fn bits_per_split(inner_dim: usize) -> u32 {
    let k = inner_dim.max(1);
    let log2k = usize::BITS - (k - 1).leading_zeros();
    53u32.saturating_sub(log2k) / 2
}

/// `ceil(log2 x)` for finite `x > 0`.
fn ceil_log2(x: f64) -> i32 {
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if biased == 0 {
        // subnormal: x = frac * 2^-1074
        let top = 63 - frac.leading_zeros() as i32;
        let pow2 = frac.is_power_of_two();
        top - 1074 + if pow2 { 0 } else { 1 }
    } else {
        biased - 1023 + if frac == 0 { 0 } else { 1 }
    }
}

fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Splits `m` into a sum of matrices whose pairwise products accumulate
/// exactly in binary64.
///
/// For each row (row split) or column (column split), with `e` the ceiling
/// exponent of the current remainder's largest magnitude and
/// `sigma = 2^(e + 53 - s)`, the next split entry is `(r + sigma) - sigma`.
/// The remainder shrinks by at least `s` bits per round.
pub fn split_matrix(
    m: &DenseMatrix,
    side: SplitSide,
    cfg: &SplitConfig,
) -> Result<SplitSet, OzakiError> {
    cfg.validate()?;
    if m.data().iter().any(|v| !v.is_finite()) {
        return Err(OzakiError::NonFinite);
    }
    let (rows, cols) = (m.rows(), m.cols());
    let inner_dim = match side {
        SplitSide::RowSplit => cols,
        SplitSide::ColSplit => rows,
    };
    let s = bits_per_split(inner_dim) as i32;
    // lines are rows (row split) or columns (column split)
    let (lines, len) = match side {
        SplitSide::RowSplit => (rows, cols),
        SplitSide::ColSplit => (cols, rows),
    };
    let at = |line: usize, t: usize| match side {
        SplitSide::RowSplit => line * cols + t,
        SplitSide::ColSplit => t * cols + line,
    };

    let mut rem = m.data().to_vec();
    let mut parts: Vec<Vec<f64>> = Vec::new();
    let mut remainder_zero = true;
    while rem.iter().any(|&v| v != 0.0) {
        let mut part = vec![0.0; rows * cols];
        let mut next = rem.clone();
        for line in 0..lines {
            let mu = (0..len).map(|t| rem[at(line, t)].abs()).fold(0.0, f64::max);
            if mu == 0.0 {
                continue;
            }
            let e = ceil_log2(mu);
            let shift = e + 53 - s;
            if shift > 1023 {
                return Err(OzakiError::OutOfRange(mu));
            }
            // below the normal range extraction keeps everything
            if shift < -1022 {
                for t in 0..len {
                    let p = at(line, t);
                    part[p] = rem[p];
                    next[p] = 0.0;
                }
                continue;
            }
            let sigma = pow2(shift);
            for t in 0..len {
                let p = at(line, t);
                let r = rem[p];
                let hi = (r + sigma) - sigma;
                part[p] = hi;
                next[p] = r - hi;
            }
        }
        let done = next.iter().all(|&v| v == 0.0);
        if !done && parts.len() + 1 == cfg.max_splits {
            parts.push(rem);
            remainder_zero = false;
            break;
        }
        parts.push(part);
        rem = next;
    }
    if parts.is_empty() {
        // all-zero input: a single zero split keeps the set non-empty
        parts.push(vec![0.0; rows * cols]);
    }

    let total = (rows * cols).max(1) as f64;
    let splits = parts
        .into_iter()
        .map(|data| {
            let zeros = data.iter().filter(|&&v| v == 0.0).count();
            let zero_fraction = zeros as f64 / total;
            let dense = DenseMatrix::from_parts(rows, cols, data);
            let crs = (zero_fraction > cfg.sparse_threshold)
                .then(|| CrsMatrix::from_dense(&dense, 0.0).expect("zero tolerance is valid"));
            Split {
                dense,
                crs,
                zero_fraction,
            }
        })
        .collect();
    Ok(SplitSet {
        side,
        splits,
        remainder_zero,
        inner_dim,
        bits_per_split: s as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_per_split_values() {
        assert_eq!(bits_per_split(1), 26);
        assert_eq!(bits_per_split(2), 26);
        assert_eq!(bits_per_split(3), 25);
        assert_eq!(bits_per_split(4), 25);
        assert_eq!(bits_per_split(5), 25);
        assert_eq!(bits_per_split(9), 24);
        assert_eq!(bits_per_split(20), 24);
        assert_eq!(bits_per_split(50), 23);
        assert_eq!(bits_per_split(1500), 21);
    }

    #[test]
    fn ceil_log2_cases() {
        assert_eq!(ceil_log2(1.0), 0);
        assert_eq!(ceil_log2(1.5), 1);
        assert_eq!(ceil_log2(0.75), 0);
        assert_eq!(ceil_log2(0.5), -1);
        assert_eq!(ceil_log2(f64::from_bits(1)), -1074);
        assert_eq!(ceil_log2(f64::from_bits(3)), -1072);
    }

    #[test]
    fn equal_powers_of_two_need_one_split() {
        let v = 2f64.powi(-7);
        let m = DenseMatrix::from_rows(&[vec![v, -v, v], vec![v, v, -v]]).unwrap();
        let s = split_matrix(&m, SplitSide::RowSplit, &SplitConfig::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.remainder_zero);
        assert_eq!(s.reconstruct(), m);
    }

    #[test]
    fn small_tail_needs_second_split() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2f64.powi(-40)], vec![1.0, 1.0]]).unwrap();
        let s = split_matrix(&m, SplitSide::RowSplit, &SplitConfig::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.remainder_zero);
        assert_eq!(s.splits[0].dense.data(), &[1.0, 0.0, 1.0, 1.0]);
        assert_eq!(s.splits[1].dense.data(), &[0.0, 2f64.powi(-40), 0.0, 0.0]);
        assert_eq!(s.reconstruct(), m);
    }

    #[test]
    fn cap_appends_remainder() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 1e-30, 1e-60, 1e-90]]).unwrap();
        let cfg = SplitConfig {
            max_splits: 2,
            ..SplitConfig::default()
        };
        let s = split_matrix(&m, SplitSide::RowSplit, &cfg).unwrap();
        assert_eq!(s.len(), 2);
        assert!(!s.remainder_zero);
        assert_eq!(s.reconstruct(), m);
    }

    #[test]
    fn identity_classification_follows_threshold() {
        let cfg = SplitConfig::default();
        // zero fraction 0.75 <= 0.8: dense
        let s4 = split_matrix(&DenseMatrix::identity(4), SplitSide::RowSplit, &cfg).unwrap();
        assert_eq!(
            count_splits(&s4),
            SplitCounts {
                sparse: 0,
                dense: 1,
                total: 1
            }
        );
        // zero fraction 0.9 > 0.8: sparse
        let s10 = split_matrix(&DenseMatrix::identity(10), SplitSide::RowSplit, &cfg).unwrap();
        assert_eq!(
            count_splits(&s10),
            SplitCounts {
                sparse: 1,
                dense: 0,
                total: 1
            }
        );
    }

    #[test]
    fn column_split_scales_per_column() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 1e-20], vec![1e-20, 1.0]]).unwrap();
        let s = split_matrix(&m, SplitSide::ColSplit, &SplitConfig::default()).unwrap();
        assert_eq!(s.splits[0].dense.data(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.reconstruct(), m);
    }

    #[test]
    fn rejects_non_finite_and_bad_config() {
        let m = DenseMatrix::identity(2);
        let bad = SplitConfig {
            max_splits: 0,
            ..SplitConfig::default()
        };
        assert!(split_matrix(&m, SplitSide::RowSplit, &bad).is_err());
        let bad = SplitConfig {
            sparse_threshold: 1.5,
            ..SplitConfig::default()
        };
        assert!(split_matrix(&m, SplitSide::RowSplit, &bad).is_err());
    }
}
