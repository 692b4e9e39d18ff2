use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ic::{apply_into, ic_factorize, IcFactor};
use super::{IcParams, PiccgError};
use crate::kernels::spmv_crs;
use crate::matrix::CrsMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// True residual `||b - A x|| / ||b||` of the returned iterate.
    pub relative_residual: f64,
    /// Factorization plus iteration wall time.
    pub elapsed_seconds: f64,
    pub converged: bool,
    pub tol: f64,
    pub shift_used: f64,
    /// Stored entries of the factor, unit diagonal included.
    pub nnz_u: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(a: &CrsMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = spmv_crs(a, x).expect("dimensions checked");
    b.iter().zip(&ax).map(|(bi, yi)| bi - yi).collect()
}

/// Preconditioned CG from `x = 0` with an existing factor.
///
/// The recurrence residual only triggers the stop test; the true residual
/// is recomputed there, and the iteration continues from it if the two have
/// drifted apart. Loss of positive curvature ends the run unconverged.
pub fn pcg_with_factor(
    a: &CrsMatrix,
    b: &[f64],
    f: &IcFactor,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64, bool), PiccgError> {
    let n = a.rows();
    if b.len() != n || f.order() != n || a.cols() != n {
        return Err(PiccgError::Dimension(format!(
            "matrix {}x{}, rhs {}, factor {}",
            a.rows(),
            a.cols(),
            b.len(),
            f.order()
        )));
    }
    if !(tol > 0.0) {
        return Err(PiccgError::InvalidParams(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0, true));
    }
    let mut r = b.to_vec();
    let mut z = Vec::with_capacity(n);
    apply_into(f, &r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 1..=max_iter {
        let q = spmv_crs(a, &p).map_err(|e| PiccgError::Dimension(e.to_string()))?;
        let pq = dot(&p, &q);
        if !(pq > 0.0) || !pq.is_finite() {
            let rel = norm(&residual(a, b, &x)) / bnorm;
            return Ok((x, it - 1, rel, rel <= tol));
        }
        let alpha = rz / pq;
        for ((xi, ri), (pi, qi)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&q)) {
            *xi += alpha * pi;
            *ri -= alpha * qi;
        }
        if norm(&r) / bnorm <= tol {
            r = residual(a, b, &x);
            rel = norm(&r) / bnorm;
            if rel <= tol {
                return Ok((x, it, rel, true));
            }
        }
        apply_into(f, &r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    if max_iter > 0 {
        rel = norm(&residual(a, b, &x)) / bnorm;
    }
    Ok((x, max_iter, rel, rel <= tol))
}

/// Factor `a` with IC(m, t) and solve `a x = b` by preconditioned CG.
pub fn piccg_solve(
    a: &CrsMatrix,
    b: &[f64],
    p: &IcParams,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport), PiccgError> {
    if b.len() != a.rows() {
        return Err(PiccgError::Dimension(format!(
            "matrix order {}, rhs {}",
            a.rows(),
            b.len()
        )));
    }
    let start = Instant::now();
    let f = ic_factorize(a, p)?;
    let (x, iterations, relative_residual, converged) = pcg_with_factor(a, b, &f, tol, max_iter)?;
    let elapsed_seconds = start.elapsed().as_secs_f64().max(1e-9);
    Ok((
        x,
        SolveReport {
            iterations,
            relative_residual,
            elapsed_seconds,
            converged,
            tol,
            shift_used: f.shift_used,
            nnz_u: f.nnz(),
        },
    ))
}
