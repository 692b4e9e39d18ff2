//! Shapley oracles: explicit composites and the permutation form.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use xtune::data::{Dataset, Sample, Split, Task};
use xtune::forest::{train, RandomForest, TrainConfig};
use xtune::shapley::{shapley_exact, BackgroundSet, Explanation, ForestScore, ScoreModel};

pub fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

/// Coalition value by explicit composites, no shared code with the crate.
pub fn oracle_value(model: &dyn ScoreModel, x: &[f64], mask: usize, bg: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for b in bg {
        let z: Vec<f64> = (0..x.len())
            .map(|j| if mask >> j & 1 == 1 { x[j] } else { b[j] })
            .collect();
        s += model.score(&z);
    }
    s / bg.len() as f64
}

/// Average marginal contribution over all `d!` orderings.
pub fn permutation_shapley(model: &dyn ScoreModel, x: &[f64], bg: &[Vec<f64>]) -> Vec<f64> {
    let d = x.len();
    let mut cache: HashMap<usize, f64> = HashMap::new();
    let mut v = |m: usize| {
        *cache
            .entry(m)
            .or_insert_with(|| oracle_value(model, x, m, bg))
    };
    let mut phi = vec![0.0; d];
    let mut perm: Vec<usize> = (0..d).collect();
    let mut count = 0usize;
    // Heap's algorithm
    let mut c = vec![0usize; d];
    let mut visit = |perm: &[usize], phi: &mut Vec<f64>| {
        let mut mask = 0;
        for &i in perm {
            let before = v(mask);
            mask |= 1 << i;
            phi[i] += v(mask) - before;
        }
    };
    visit(&perm, &mut phi);
    count += 1;
    let mut i = 0;
    while i < d {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm, &mut phi);
            count += 1;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    phi.iter().map(|p| p / count as f64).collect()
}

/// Random forest on random data with `d` features; features listed in
/// `constant` carry one value so no tree can split on them.
pub fn random_case(seed: u64, d: usize) -> (RandomForest, Vec<f64>, BackgroundSet, Vec<usize>) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let constant: Vec<usize> = (0..d).filter(|_| rng.gen_bool(0.25)).collect();
    let task = if rng.gen_bool(0.5) {
        Task::Classify
    } else {
        Task::Regress
    };
    let mut ds = Dataset::new(task, names(d), vec![]);
    for _ in 0..40 {
        let f: Vec<f64> = (0..d)
            .map(|j| {
                if constant.contains(&j) {
                    1.0
                } else {
                    rng.gen_range(0..5) as f64
                }
            })
            .collect();
        let target = match task {
            Task::Classify => [1.0, 2.0, 5.0][(f[0] as usize + rng.gen_range(0..2)) % 3],
            Task::Regress => 0.1 + f.iter().sum::<f64>() * rng.gen_range(0.5..1.5),
        };
        ds.push(Sample {
            seed,
            split: Split::Train,
            features: f,
            target,
            extras: vec![],
        })
        .unwrap();
    }
    let forest = train(
        &ds,
        &TrainConfig {
            n_trees: 7,
            seed,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let bg = BackgroundSet::from_dataset(&ds, 6, seed).unwrap();
    let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1..6) as f64).collect();
    (forest, x, bg, constant)
}

pub fn explain<'a>(
    f: &'a RandomForest,
    x: &[f64],
    bg: &BackgroundSet,
) -> (Explanation, Box<dyn ScoreModel + 'a>) {
    let target = match f.task {
        Task::Classify => Some(f.predict_raw(x).as_f64() as u8),
        Task::Regress => None,
    };
    let m = ForestScore::new(f, target).unwrap();
    let e = shapley_exact(&m, x, bg).unwrap();
    (e, Box::new(m))
}
