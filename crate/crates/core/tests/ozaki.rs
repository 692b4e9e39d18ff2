mod common;

use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use common::{rational_matmul, rational_sum, to_rational};
use xtune::matrix::{gen_identity_mix, gen_random_scaled, DenseMatrix};
use xtune::ozaki::{
    accurate_matmul, correctly_rounded_sum, count_splits, naive_matmul, split_matrix, SplitConfig,
    SplitSet, SplitSide,
};

fn split_sum_is_exact(s: &SplitSet, src: &DenseMatrix) -> bool {
    // rational check, independent of binary64 addition
    (0..src.rows() * src.cols()).all(|p| {
        let mut acc = BigRational::zero();
        for sp in &s.splits {
            acc += to_rational(sp.dense.data()[p]);
        }
        acc == to_rational(src.data()[p])
    })
}

/// Every pairwise split product, evaluated as a binary64 dot product in
/// ascending order, equals its rational value.
fn pairwise_products_exact(sa: &SplitSet, sb: &SplitSet) -> bool {
    for x in &sa.splits {
        for y in &sb.splits {
            let (a, b) = (&x.dense, &y.dense);
            for i in 0..a.rows() {
                for j in 0..b.cols() {
                    let mut f = 0.0;
                    let mut r = BigRational::zero();
                    for t in 0..a.cols() {
                        f += a.get(i, t) * b.get(t, j);
                        r += to_rational(a.get(i, t)) * to_rational(b.get(t, j));
                    }
                    if to_rational(f) != r {
                        return false;
                    }
                }
            }
        }
    }
    true
}

#[test]
fn two_by_two_tail_split_is_exact() {
    let a = DenseMatrix::from_rows(&[vec![1.0, 2f64.powi(-40)], vec![1.0, 1.0]]).unwrap();
    let s = split_matrix(&a, SplitSide::RowSplit, &SplitConfig::default()).unwrap();
    assert_eq!(s.len(), 2);
    assert!(split_sum_is_exact(&s, &a));
}

#[test]
fn scaled_generator_produces_sparse_tail_splits() {
    let a = gen_random_scaled(50, 0.0, 30, 17).unwrap();
    let s = split_matrix(&a, SplitSide::RowSplit, &SplitConfig::default()).unwrap();
    assert!(s.len() > 1);
    let counts = count_splits(&s);
    assert!(counts.sparse >= 1);
    assert_eq!(counts.sparse + counts.dense, counts.total);
    // the lowest-order split only holds the tails of the largest entries
    assert!(s.splits.last().unwrap().zero_fraction > 0.8);
    assert!(s.splits.last().unwrap().is_sparse());
}

#[test]
fn identity_split_counts_follow_threshold() {
    // zero fraction (n^2 - n) / n^2 against 0.8: n = 5 gives exactly 0.8 (dense)
    let cfg = SplitConfig::default();
    for (n, sparse) in [(3usize, false), (5, false), (6, true), (50, true)] {
        let s = split_matrix(&DenseMatrix::identity(n), SplitSide::RowSplit, &cfg).unwrap();
        let c = count_splits(&s);
        assert_eq!(c.total, 1);
        assert_eq!(c.sparse == 1, sparse, "n = {n}");
    }
}

#[test]
fn sum_matches_rational_oracle_on_mixed_exponents() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
    let values: Vec<f64> = (0..1000)
        .map(|_| {
            let m: f64 = rng.gen_range(-1.0..1.0);
            m * 2f64.powi(rng.gen_range(-300..300))
        })
        .collect();
    let got = correctly_rounded_sum(&values).unwrap().value;
    assert_eq!(got.to_bits(), rational_sum(&values).to_bits());
}

#[test]
fn accurate_matmul_matches_rational_oracle() {
    let a = gen_random_scaled(20, 0.0, 30, 1).unwrap();
    let b = gen_random_scaled(20, 0.0, 30, 2).unwrap();
    let c = accurate_matmul(&a, &b, &SplitConfig::default()).unwrap();
    assert!(!c.degraded);
    assert_eq!(c.result, rational_matmul(&a, &b));
    // plain binary64 accumulation loses bits on this input
    assert_ne!(naive_matmul(&a, &b).unwrap(), c.result);
}

#[test]
fn split_products_are_exact() {
    let a = gen_random_scaled(24, 0.3, 30, 5).unwrap();
    let b = gen_identity_mix(24, 0.9, 6).unwrap();
    let cfg = SplitConfig::default();
    let sa = split_matrix(&a, SplitSide::RowSplit, &cfg).unwrap();
    let sb = split_matrix(&b, SplitSide::ColSplit, &cfg).unwrap();
    assert!(sa.remainder_zero && sb.remainder_zero);
    assert!(pairwise_products_exact(&sa, &sb));
}

#[test]
fn classification_threshold_never_changes_values() {
    let a = gen_random_scaled(16, 0.5, 20, 3).unwrap();
    let b = gen_random_scaled(16, 0.5, 20, 4).unwrap();
    let lo = SplitConfig {
        sparse_threshold: 0.0,
        ..SplitConfig::default()
    };
    let hi = SplitConfig {
        sparse_threshold: 1.0,
        ..SplitConfig::default()
    };
    assert_eq!(
        accurate_matmul(&a, &b, &lo).unwrap().result,
        accurate_matmul(&a, &b, &hi).unwrap().result
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sum_is_permutation_invariant(
        values in prop::collection::vec((-1.0e3f64..1.0e3, -60i32..60), 0..64),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let mut v: Vec<f64> = values.iter().map(|&(m, e)| m * 2f64.powi(e)).collect();
        let before = correctly_rounded_sum(&v).unwrap();
        v.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(seed));
        let after = correctly_rounded_sum(&v).unwrap();
        prop_assert_eq!(before.value.to_bits(), after.value.to_bits());
        prop_assert_eq!(before.value.to_bits(), rational_sum(&v).to_bits());
    }

    #[test]
    fn splits_reconstruct_source(
        n in 1usize..12,
        phi in 1u32..=30,
        sparsity in 0.0f64..0.9,
        seed in any::<u64>(),
        col in any::<bool>(),
    ) {
        let m = gen_random_scaled(n, sparsity, phi, seed).unwrap();
        let side = if col { SplitSide::ColSplit } else { SplitSide::RowSplit };
        let cfg = SplitConfig { max_splits: 32, ..SplitConfig::default() };
        let s = split_matrix(&m, side, &cfg).unwrap();
        prop_assert!(s.remainder_zero);
        prop_assert_eq!(s.reconstruct(), m.clone());
        prop_assert!(split_sum_is_exact(&s, &m));
    }
}
