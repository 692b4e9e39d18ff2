//! The two synthetic input generators used for matrix-multiplication tuning
//! data.
//!
//! Both draw from a seeded xoshiro256++ stream, so a seed reproduces the
//! same matrix bit for bit on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::{DenseMatrix, MatrixError};

/// Largest admissible exponent cap for [`gen_random_scaled`].
pub const MAX_PHI: u32 = 30;

// Correctly rounded decimal literals; `powi` is not guaranteed exact.
const POW10: [f64; MAX_PHI as usize] = [
    1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15, 1e16,
    1e17, 1e18, 1e19, 1e20, 1e21, 1e22, 1e23, 1e24, 1e25, 1e26, 1e27, 1e28, 1e29,
];

pub(crate) fn rng_from_seed(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Uniform draw from the open interval (0, 1).
fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

fn check_fraction(name: &str, v: f64, allow_one: bool) -> Result<(), MatrixError> {
    let ok = v >= 0.0 && (v < 1.0 || (allow_one && v == 1.0));
    if ok {
        Ok(())
    } else {
        Err(MatrixError::InvalidArgument(format!(
            "{name} must lie in [0, 1{}, got {v}",
            if allow_one { "]" } else { ")" }
        )))
    }
}

/// Square matrix whose nonzeros are `u * 10^k` with `u ~ U(0,1)` and
/// `k ~ U{0, .., phi-1}`; `round(target_sparsity * n^2)` entries, chosen by a
/// random permutation, are exactly zero.
pub fn gen_random_scaled(
    n: usize,
    target_sparsity: f64,
    phi: u32,
    seed: u64,
) -> Result<DenseMatrix, MatrixError> {
    gen_random_scaled_rect(n, n, target_sparsity, phi, seed)
}

/// Rectangular form of [`gen_random_scaled`]; the square case draws the
/// same stream.
pub fn gen_random_scaled_rect(
    rows: usize,
    cols: usize,
    target_sparsity: f64,
    phi: u32,
    seed: u64,
) -> Result<DenseMatrix, MatrixError> {
    if phi == 0 || phi > MAX_PHI {
        return Err(MatrixError::InvalidArgument(format!(
            "exponent cap phi must lie in 1..={MAX_PHI}, got {phi}"
        )));
    }
    check_fraction("target sparsity", target_sparsity, false)?;
    let mut rng = rng_from_seed(seed);
    let total = rows * cols;
    let mut data = Vec::with_capacity(total);
    for _ in 0..total {
        let u = open_unit(&mut rng);
        let k = rng.gen_range(0..phi) as usize;
        data.push(u * POW10[k]);
    }
    let zeros = (target_sparsity * total as f64).round() as usize;
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    for &pos in &order[..zeros.min(total)] {
        data[pos] = 0.0;
    }
    Ok(DenseMatrix::from_parts(rows, cols, data))
}

/// Independent child seed for stream `stream` of a master seed
/// (splitmix64 finalizer over the pair).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identity plus a U(0,1) matrix restricted to the off-diagonal positions
/// that survive the sparsity mask: `round((1 - s) * (n^2 - n))` random
/// off-diagonal entries are kept and the diagonal is exactly one.
pub fn gen_identity_mix(
    n: usize,
    target_sparsity: f64,
    seed: u64,
) -> Result<DenseMatrix, MatrixError> {
    check_fraction("target sparsity", target_sparsity, true)?;
    let mut rng = rng_from_seed(seed);
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = 1.0;
    }
    let mut off: Vec<usize> = (0..n * n).filter(|p| p / n != p % n).collect();
    let keep = ((1.0 - target_sparsity) * off.len() as f64).round() as usize;
    off.shuffle(&mut rng);
    let mut kept = off[..keep.min(off.len())].to_vec();
    // draw values in position order so the stream does not depend on the shuffle layout
    kept.sort_unstable();
    for pos in kept {
        data[pos] = open_unit(&mut rng);
    }
    Ok(DenseMatrix::from_parts(n, n, data))
}
