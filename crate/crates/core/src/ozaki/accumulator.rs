//! Exact fixed-point accumulation of binary64 values.
//!
//! Every finite double is an integer multiple of 2^-1074 below 2^1024, so a
//! two's-complement integer with its unit at 2^-1074 and enough headroom
//! holds any partial sum exactly. Rounding happens once, at the end.

use serde::{Deserialize, Serialize};

use super::OzakiError;

// 2098 bits cover the finite range; the rest is carry headroom (2^78 terms).
const LIMBS: usize = 34;

/// Rounded result of an exact summation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccumulatorResult {
    /// Binary64 nearest to the exact sum, ties to even; `+0.0` for an exact zero.
    pub value: f64,
    /// Whether the exact sum was representable (no rounding took place).
    pub exact_hit: bool,
}

#[derive(Clone, Debug)]
pub struct ExactAccumulator {
    limbs: [u64; LIMBS],
}

impl Default for ExactAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl ExactAccumulator {
    pub fn new() -> Self {
        Self { limbs: [0; LIMBS] }
    }

    pub fn clear(&mut self) {
        self.limbs = [0; LIMBS];
    }

    /// Adds a finite value exactly. Non-finite input is a logic error and is
    /// checked in debug builds.
    #[inline]
    pub fn add(&mut self, x: f64) {
        debug_assert!(x.is_finite());
        let bits = x.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as usize;
        let frac = bits & ((1u64 << 52) - 1);
        if biased == 0 && frac == 0 {
            return;
        }
        let (mant, offset) = if biased == 0 {
            (frac, 0)
        } else {
            (frac | (1u64 << 52), biased - 1)
        };
        let limb = offset / 64;
        let wide = (mant as u128) << (offset % 64);
        let lo = wide as u64;
        let hi = (wide >> 64) as u64;
        if bits >> 63 == 0 {
            self.add_at(limb, lo, hi);
        } else {
            self.sub_at(limb, lo, hi);
        }
    }

    #[inline]
    fn add_at(&mut self, limb: usize, lo: u64, hi: u64) {
        let (s0, c0) = self.limbs[limb].overflowing_add(lo);
        self.limbs[limb] = s0;
        let (s1, c1) = self.limbs[limb + 1].overflowing_add(hi);
        let (s1, c2) = s1.overflowing_add(c0 as u64);
        self.limbs[limb + 1] = s1;
        let mut carry = c1 || c2;
        let mut k = limb + 2;
        while carry && k < LIMBS {
            let (s, c) = self.limbs[k].overflowing_add(1);
            self.limbs[k] = s;
            carry = c;
            k += 1;
        }
    }

    #[inline]
    fn sub_at(&mut self, limb: usize, lo: u64, hi: u64) {
        let (s0, b0) = self.limbs[limb].overflowing_sub(lo);
        self.limbs[limb] = s0;
        let (s1, b1) = self.limbs[limb + 1].overflowing_sub(hi);
        let (s1, b2) = s1.overflowing_sub(b0 as u64);
        self.limbs[limb + 1] = s1;
        let mut borrow = b1 || b2;
        let mut k = limb + 2;
        while borrow && k < LIMBS {
            let (s, b) = self.limbs[k].overflowing_sub(1);
            self.limbs[k] = s;
            borrow = b;
            k += 1;
        }
    }

    fn is_negative(&self) -> bool {
        self.limbs[LIMBS - 1] >> 63 == 1
    }

    /// Rounds the exact sum to the nearest binary64, ties to even.
    pub fn round(&self) -> Result<AccumulatorResult, OzakiError> {
        let negative = self.is_negative();
        let mag = if negative {
            negate(&self.limbs)
        } else {
            self.limbs
        };
        let Some(top) = highest_bit(&mag) else {
            return Ok(AccumulatorResult {
                value: 0.0,
                exact_hit: true,
            });
        };
        let sign = (negative as u64) << 63;
        if top < 52 {
            // subnormal range, exactly representable
            return Ok(AccumulatorResult {
                value: f64::from_bits(sign | mag[0]),
                exact_hit: true,
            });
        }
        let low = top - 52;
        let mut mant = extract_bits(&mag, low, 53);
        let round_bit = low > 0 && bit(&mag, low - 1);
        let sticky = low > 1 && any_below(&mag, low - 1);
        let mut biased = (top - 51) as u64;
        if round_bit && (sticky || mant & 1 == 1) {
            mant += 1;
            if mant == 1u64 << 53 {
                mant >>= 1;
                biased += 1;
            }
        }
        if biased >= 0x7ff {
            return Err(OzakiError::AccumulatorOverflow);
        }
        let value = f64::from_bits(sign | (biased << 52) | (mant & ((1u64 << 52) - 1)));
        Ok(AccumulatorResult {
            value,
            exact_hit: !round_bit && !sticky,
        })
    }
}

fn negate(limbs: &[u64; LIMBS]) -> [u64; LIMBS] {
    let mut out = [0u64; LIMBS];
    let mut carry = true;
    for (o, &l) in out.iter_mut().zip(limbs) {
        let (s, c) = (!l).overflowing_add(carry as u64);
        *o = s;
        carry = c;
    }
    out
}

fn highest_bit(limbs: &[u64; LIMBS]) -> Option<usize> {
    limbs
        .iter()
        .enumerate()
        .rev()
        .find(|(_, &l)| l != 0)
        .map(|(k, &l)| k * 64 + 63 - l.leading_zeros() as usize)
}

#[inline]
fn bit(limbs: &[u64; LIMBS], pos: usize) -> bool {
    (limbs[pos / 64] >> (pos % 64)) & 1 == 1
}

/// Any set bit strictly below `pos`.
fn any_below(limbs: &[u64; LIMBS], pos: usize) -> bool {
    let (k, r) = (pos / 64, pos % 64);
    limbs[..k].iter().any(|&l| l != 0) || (r > 0 && limbs[k] & ((1u64 << r) - 1) != 0)
}

/// `count <= 64` bits starting at `low`.
fn extract_bits(limbs: &[u64; LIMBS], low: usize, count: usize) -> u64 {
    let (k, r) = (low / 64, low % 64);
    let mut v = (limbs[k] as u128) >> r;
    if k + 1 < LIMBS {
        v |= (limbs[k + 1] as u128) << (64 - r);
    }
    (v as u64) & ((1u64 << count) - 1)
}

/// Binary64 nearest to the exact real sum of `values` (ties to even).
pub fn correctly_rounded_sum(values: &[f64]) -> Result<AccumulatorResult, OzakiError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(OzakiError::NonFinite);
    }
    let mut acc = ExactAccumulator::new();
    for &v in values {
        acc.add(v);
    }
    acc.round()
}
