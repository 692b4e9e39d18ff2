use std::ops::Range;

use super::PiccgError;
use crate::matrix::CrsMatrix;

/// Steady-state heat conduction on the unit-spaced cube `n x n x n` with a
/// slab of conductivity `lambda2` embedded in a medium of conductivity
/// `lambda1`.
#[derive(Clone, Debug, PartialEq)]
pub struct P3dProblem {
    pub n: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Cell range along z where `lambda2` applies.
    pub layer: Range<usize>,
    pub a: CrsMatrix,
    pub b: Vec<f64>,
}

impl P3dProblem {
    pub fn order(&self) -> usize {
        self.n * self.n * self.n
    }
}

/// Middle third of the z axis.
pub fn default_layer(n: usize) -> Range<usize> {
    n / 3..(2 * n) / 3
}

/// Seven-point finite-volume discretization with homogeneous Dirichlet
/// walls.
///
/// Interior faces use the harmonic mean of the two cell conductivities;
/// boundary faces sit half a cell away from the center, giving `2 lambda`.
/// Cell `(x, y, z)` maps to row `x + n y + n^2 z`; the source is all ones.
pub fn p3d_generate(
    n: usize,
    lambda1: f64,
    lambda2: f64,
    layer: Range<usize>,
) -> Result<P3dProblem, PiccgError> {
    if n < 2 {
        return Err(PiccgError::InvalidParams(format!(
            "grid must have n >= 2, got {n}"
        )));
    }
    if !(lambda1.is_finite() && lambda2.is_finite() && lambda2 > 0.0 && lambda1 > 0.0) {
        return Err(PiccgError::InvalidParams(
            "conductivities must be positive and finite".into(),
        ));
    }
    if lambda2 > lambda1 {
        return Err(PiccgError::InvalidParams(format!(
            "lambda2 ({lambda2}) must not exceed lambda1 ({lambda1})"
        )));
    }
    if layer.start > layer.end || layer.end > n {
        return Err(PiccgError::InvalidParams(format!(
            "layer {layer:?} outside 0..{n}"
        )));
    }
    let cond = |z: usize| if layer.contains(&z) { lambda2 } else { lambda1 };
    let face = |a: f64, b: f64| if a == b { a } else { 2.0 * a * b / (a + b) };
    let idx = |x: usize, y: usize, z: usize| x + n * y + n * n * z;

    let order = n * n * n;
    let mut row_ptr = Vec::with_capacity(order + 1);
    let mut col_idx = Vec::with_capacity(7 * order);
    let mut vals = Vec::with_capacity(7 * order);
    row_ptr.push(0);
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let lc = cond(z);
                let mut entries: Vec<(usize, f64)> = Vec::with_capacity(7);
                let mut diag = 0.0;
                // (neighbor along each axis, neighbor conductivity)
                let mut link = |nb: Option<(usize, f64)>| match nb {
                    Some((j, ln)) => {
                        let c = face(lc, ln);
                        diag += c;
                        entries.push((j, -c));
                    }
                    None => diag += 2.0 * lc,
                };
                link((z > 0).then(|| (idx(x, y, z - 1), cond(z - 1))));
                link((y > 0).then(|| (idx(x, y - 1, z), lc)));
                link((x > 0).then(|| (idx(x - 1, y, z), lc)));
                link((x + 1 < n).then(|| (idx(x + 1, y, z), lc)));
                link((y + 1 < n).then(|| (idx(x, y + 1, z), lc)));
                link((z + 1 < n).then(|| (idx(x, y, z + 1), cond(z + 1))));
                entries.push((idx(x, y, z), diag));
                entries.sort_unstable_by_key(|e| e.0);
                for (j, v) in entries {
                    col_idx.push(j);
                    vals.push(v);
                }
                row_ptr.push(col_idx.len());
            }
        }
    }
    let a = CrsMatrix::new(order, order, row_ptr, col_idx, vals)
        .map_err(|e| PiccgError::InvalidParams(e.to_string()))?;
    Ok(P3dProblem {
        n,
        lambda1,
        lambda2,
        layer,
        a,
        b: vec![1.0; order],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_symmetry() {
        let p = p3d_generate(16, 1.0, 1e-3, default_layer(16)).unwrap();
        assert_eq!(p.order(), 4096);
        assert_eq!(p.a.rows(), 4096);
        assert!(p.a.is_symmetric());
        assert_eq!(default_layer(16), 5..10);
    }

    #[test]
    fn homogeneous_medium_is_a_laplacian() {
        let p = p3d_generate(5, 2.0, 2.0, default_layer(5)).unwrap();
        let mut offs = Vec::new();
        for i in 0..p.order() {
            let (cols, vals) = p.a.row(i);
            let mut sum = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    offs.push(v);
                    sum -= v;
                }
            }
            // boundary cells carry the extra 2 lambda per wall face
            assert!(p.a.get(i, i) >= sum);
        }
        assert!(offs.iter().all(|&v| v == -2.0));
        // interior cell of a 5^3 grid: six neighbors
        assert_eq!(p.a.get(62, 62), 12.0);
        // corner: three neighbors plus three walls at 2 lambda
        assert_eq!(p.a.get(0, 0), 3.0 * 2.0 + 3.0 * 4.0);
    }

    #[test]
    fn interface_uses_harmonic_mean() {
        let p = p3d_generate(3, 1.0, 0.25, 1..2).unwrap();
        // cells (0,0,0) and (0,0,1) straddle the interface
        assert_eq!(p.a.get(0, 9), -0.4);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(p3d_generate(1, 1.0, 1.0, 0..1).is_err());
        assert!(p3d_generate(4, 1.0, 2.0, default_layer(4)).is_err());
        assert!(p3d_generate(4, 1.0, 0.0, default_layer(4)).is_err());
        assert!(p3d_generate(4, 1.0, 0.5, 2..7).is_err());
    }
}
