//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod shap;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use xtune::matrix::DenseMatrix;

/// Exact rational value of a finite double.
pub fn to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn pow2(e: i64) -> BigRational {
    let one = BigInt::one();
    if e >= 0 {
        BigRational::from_integer(one << (e as usize))
    } else {
        BigRational::new(one, BigInt::one() << ((-e) as usize))
    }
}

fn bit_len(x: &BigInt) -> i64 {
    x.bits() as i64
}

/// Round a rational to the nearest binary64, ties to even. Panics on
/// overflow.
pub fn round_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let negative = r.is_negative();
    let a = r.abs();
    // floor(log2 a) from bit lengths, then correct by one.
    let mut e = bit_len(a.numer()) - bit_len(a.denom());
    if a < pow2(e) {
        e -= 1;
    }
    debug_assert!(a >= pow2(e) && a < pow2(e + 1));
    // quantum of the binade (subnormals share 2^-1074)
    let q = (e - 52).max(-1074);
    let scaled = &a / pow2(q);
    let floor = scaled.numer() / scaled.denom();
    let frac = &scaled - BigRational::from_integer(floor.clone());
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut m = floor;
    let odd = (&m % BigInt::from(2)) == BigInt::one();
    if frac > half || (frac == half && odd) {
        m += 1;
    }
    // m * 2^q, exact as long as m < 2^54
    let (_, digits) = m.to_u64_digits();
    let mut mant = digits.first().copied().unwrap_or(0);
    assert!(digits.len() <= 1);
    let mut q = q;
    if mant == 1u64 << 53 {
        mant >>= 1;
        q += 1;
    }
    let value = if mant < (1u64 << 52) {
        assert_eq!(q, -1074);
        f64::from_bits(mant)
    } else {
        let biased = q + 52 + 1023;
        assert!(biased < 0x7ff, "overflow");
        f64::from_bits(((biased as u64) << 52) | (mant & ((1u64 << 52) - 1)))
    };
    if negative {
        -value
    } else {
        value
    }
}

/// Exact product of two matrices, rounded once per element.
pub fn rational_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows());
    let ar: Vec<BigRational> = a.data().iter().map(|&v| to_rational(v)).collect();
    let br: Vec<BigRational> = b.data().iter().map(|&v| to_rational(v)).collect();
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let mut s = BigRational::zero();
            for t in 0..k {
                if !ar[i * k + t].is_zero() && !br[t * m + j].is_zero() {
                    s += &ar[i * k + t] * &br[t * m + j];
                }
            }
            out.push(round_to_f64(&s));
        }
    }
    DenseMatrix::new(n, m, out).unwrap()
}

/// Rational sum of a slice, rounded once.
pub fn rational_sum(values: &[f64]) -> f64 {
    let mut s = BigRational::zero();
    for &v in values {
        s += to_rational(v);
    }
    round_to_f64(&s)
}

pub fn sign_of(r: &BigRational) -> Sign {
    r.numer().sign()
}
