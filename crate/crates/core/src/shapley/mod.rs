//! Exact interventional Shapley values by subset enumeration.

mod plot;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Task};
use crate::forest::RandomForest;
use crate::matrix::rng_from_seed;

pub use plot::{
    beeswarm_svg, read_beeswarm_csv, summary_json, write_beeswarm, write_beeswarm_csv,
    BeeswarmFormat,
};

/// Largest feature count handled by exhaustive enumeration.
pub const MAX_EXACT_FEATURES: usize = 16;
pub const DEFAULT_BACKGROUND_CAP: usize = 100;

#[derive(Debug, Error)]
pub enum ShapleyError {
    #[error("background set is empty")]
    EmptyBackground,
    #[error("nothing to summarize")]
    EmptyDataset,
    #[error("{d} features exceed the exact limit of {MAX_EXACT_FEATURES}; explain a subset of the schema")]
    TooManyFeatures { d: usize },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("model cannot explain: {0}")]
    Target(String),
    #[error("malformed beeswarm data: {0}")]
    Malformed(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A real-valued function of a feature vector.
pub trait ScoreModel: Sync {
    fn n_features(&self) -> usize;
    fn score(&self, x: &[f64]) -> f64;
}

/// Wraps a closure as a score model.
pub struct FnModel<F> {
    pub d: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> ScoreModel for FnModel<F> {
    fn n_features(&self) -> usize {
        self.d
    }
    fn score(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Forest exposed as a score: the vote fraction of `target` for
/// classifiers, the predicted seconds for regressors.
pub struct ForestScore<'a> {
    pub forest: &'a RandomForest,
    pub target: Option<u8>,
}

impl<'a> ForestScore<'a> {
    pub fn new(forest: &'a RandomForest, target: Option<u8>) -> Result<Self, ShapleyError> {
        match (forest.task, target) {
            (Task::Classify, None) => Err(ShapleyError::Target(
                "classifier needs a target class".into(),
            )),
            (Task::Classify, Some(t)) if forest.classes.binary_search(&t).is_err() => {
                Err(ShapleyError::Target(format!(
                    "class {t} not among trained classes {:?}",
                    forest.classes
                )))
            }
            (Task::Regress, Some(_)) => {
                Err(ShapleyError::Target("regressor has no classes".into()))
            }
            _ => Ok(Self { forest, target }),
        }
    }
}

impl ScoreModel for ForestScore<'_> {
    fn n_features(&self) -> usize {
        self.forest.n_features()
    }
    fn score(&self, x: &[f64]) -> f64 {
        match self.target {
            Some(t) => self.forest.class_score(x, t),
            None => self.forest.regress_value(x),
        }
    }
}

/// Reference rows for the interventional value function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSet {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub cap: usize,
    pub seed: u64,
}

impl BackgroundSet {
    /// At most `cap` rows of `d`, chosen by seed and kept in dataset order.
    pub fn from_dataset(d: &Dataset, cap: usize, seed: u64) -> Result<Self, ShapleyError> {
        if d.is_empty() || cap == 0 {
            return Err(ShapleyError::EmptyBackground);
        }
        let mut idx: Vec<usize> = if d.len() > cap {
            sample(&mut rng_from_seed(seed), d.len(), cap).into_vec()
        } else {
            (0..d.len()).collect()
        };
        idx.sort_unstable();
        Ok(Self {
            feature_names: d.feature_names.clone(),
            rows: idx
                .into_iter()
                .map(|i| d.rows[i].features.clone())
                .collect(),
            cap,
            seed,
        })
    }

    pub fn from_rows(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, ShapleyError> {
        if rows.is_empty() {
            return Err(ShapleyError::EmptyBackground);
        }
        if rows.iter().any(|r| r.len() != feature_names.len()) {
            return Err(ShapleyError::Schema(
                "background row width differs from schema".into(),
            ));
        }
        let cap = rows.len();
        Ok(Self {
            feature_names,
            rows,
            cap,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub feature_names: Vec<String>,
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub prediction: f64,
    pub target_output: Option<u8>,
}

impl Explanation {
    /// `|base_value + sum(phi) - prediction|`.
    pub fn efficiency_gap(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.prediction).abs()
    }
}

fn check(model: &dyn ScoreModel, x: &[f64], bg: &BackgroundSet) -> Result<(), ShapleyError> {
    if bg.is_empty() {
        return Err(ShapleyError::EmptyBackground);
    }
    let d = model.n_features();
    if x.len() != d || bg.rows[0].len() != d {
        return Err(ShapleyError::Schema(format!(
            "model has {d} features, instance {}, background {}",
            x.len(),
            bg.rows[0].len()
        )));
    }
    Ok(())
}

/// Mean over background rows of the model at the composite taking mask
/// features from `x`. Exact when every composite scores the same.
fn value_mask(
    model: &dyn ScoreModel,
    x: &[f64],
    mask: u32,
    bg: &BackgroundSet,
    buf: &mut [f64],
) -> f64 {
    let mut first = None;
    let mut s = 0.0;
    for b in &bg.rows {
        for (j, v) in buf.iter_mut().enumerate() {
            *v = if mask >> j & 1 == 1 { x[j] } else { b[j] };
        }
        let y = model.score(buf);
        let y0 = *first.get_or_insert(y);
        s += y - y0;
    }
    first.unwrap_or(0.0) + s / bg.len() as f64
}

/// `v(S)` for the feature indices in `subset`.
pub fn value_function(
    model: &dyn ScoreModel,
    x: &[f64],
    subset: &[usize],
    bg: &BackgroundSet,
) -> Result<f64, ShapleyError> {
    check(model, x, bg)?;
    let d = x.len();
    if d > 32 {
        return Err(ShapleyError::TooManyFeatures { d });
    }
    let mut mask = 0u32;
    for &j in subset {
        if j >= d {
            return Err(ShapleyError::Schema(format!(
                "feature index {j} out of range"
            )));
        }
        mask |= 1 << j;
    }
    Ok(value_mask(model, x, mask, bg, &mut vec![0.0; d]))
}

pub fn shapley_exact(
    model: &dyn ScoreModel,
    x: &[f64],
    bg: &BackgroundSet,
) -> Result<Explanation, ShapleyError> {
    check(model, x, bg)?;
    let d = x.len();
    if d > MAX_EXACT_FEATURES {
        return Err(ShapleyError::TooManyFeatures { d });
    }
    let mut buf = vec![0.0; d];
    let v: Vec<f64> = (0..1u32 << d)
        .map(|m| value_mask(model, x, m, bg, &mut buf))
        .collect();
    // w[k] = k! (d-k-1)! / d!
    let w: Vec<f64> = (0..d)
        .map(|k| {
            let mut r = 1.0 / d as f64;
            for i in 1..=k {
                r *= i as f64 / (d - i) as f64;
            }
            r
        })
        .collect();
    let phi = (0..d)
        .map(|i| {
            let bit = 1u32 << i;
            let mut s = 0.0;
            for m in 0..1u32 << d {
                if m & bit == 0 {
                    s += w[m.count_ones() as usize] * (v[(m | bit) as usize] - v[m as usize]);
                }
            }
            s
        })
        .collect();
    Ok(Explanation {
        feature_names: bg.feature_names.clone(),
        phi,
        base_value: v[0],
        prediction: v[(1usize << d) - 1],
        target_output: None,
    })
}

/// Explains one forest output; classifiers default to the predicted class.
pub fn explain_forest(
    f: &RandomForest,
    x: &[f64],
    bg: &BackgroundSet,
    target: Option<u8>,
) -> Result<Explanation, ShapleyError> {
    if x.len() != f.n_features() {
        return Err(ShapleyError::Schema(format!(
            "instance has {} features, model {}",
            x.len(),
            f.n_features()
        )));
    }
    let target = match f.task {
        Task::Classify => Some(target.unwrap_or_else(|| f.predict_raw(x).as_f64() as u8)),
        Task::Regress => None,
    };
    let mut e = shapley_exact(&ForestScore::new(f, target)?, x, bg)?;
    e.target_output = target;
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmPoint {
    pub feature: String,
    pub value: f64,
    pub phi: f64,
    pub instance: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalSummary {
    pub feature_names: Vec<String>,
    pub mean_abs_phi: Vec<f64>,
    /// Features by decreasing mean |phi|; ties keep schema order.
    pub ranking: Vec<String>,
    pub base_value: f64,
    pub target_output: Option<u8>,
    /// Instance-major, schema order within an instance.
    pub points: Vec<BeeswarmPoint>,
    pub background_rows: usize,
    pub background_cap: usize,
    pub background_seed: u64,
}

impl GlobalSummary {
    pub fn mean_abs(&self, feature: &str) -> Option<f64> {
        let j = self.feature_names.iter().position(|n| n == feature)?;
        Some(self.mean_abs_phi[j])
    }
}

pub(crate) fn rank(names: &[String], mean_abs: &[f64]) -> Vec<String> {
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]));
    order.into_iter().map(|j| names[j].clone()).collect()
}

/// Explains every row of `d` and aggregates.
pub fn global_summary(
    model: &dyn ScoreModel,
    d: &Dataset,
    bg: &BackgroundSet,
) -> Result<GlobalSummary, ShapleyError> {
    if d.is_empty() {
        return Err(ShapleyError::EmptyDataset);
    }
    if d.feature_names != bg.feature_names {
        return Err(ShapleyError::Schema(
            "dataset and background schemas differ".into(),
        ));
    }
    let ex: Vec<Explanation> = d
        .rows
        .par_iter()
        .map(|r| shapley_exact(model, &r.features, bg))
        .collect::<Result<_, _>>()?;
    let nf = d.n_features();
    let mut mean_abs = vec![0.0; nf];
    let mut points = Vec::with_capacity(d.len() * nf);
    for (i, (e, r)) in ex.iter().zip(&d.rows).enumerate() {
        for j in 0..nf {
            mean_abs[j] += e.phi[j].abs() / d.len() as f64;
            points.push(BeeswarmPoint {
                feature: d.feature_names[j].clone(),
                value: r.features[j],
                phi: e.phi[j],
                instance: i,
            });
        }
    }
    Ok(GlobalSummary {
        feature_names: d.feature_names.clone(),
        ranking: rank(&d.feature_names, &mean_abs),
        mean_abs_phi: mean_abs,
        base_value: ex[0].base_value,
        target_output: None,
        points,
        background_rows: bg.len(),
        background_cap: bg.cap,
        background_seed: bg.seed,
    })
}

/// Global summary of a forest. Classifiers explain `target`, defaulting to
/// the class the forest predicts most often on `d` (ties to the lowest).
pub fn global_summary_forest(
    f: &RandomForest,
    d: &Dataset,
    bg: &BackgroundSet,
    target: Option<u8>,
) -> Result<GlobalSummary, ShapleyError> {
    f.check_schema(d)
        .map_err(|e| ShapleyError::Schema(e.to_string()))?;
    if d.is_empty() {
        return Err(ShapleyError::EmptyDataset);
    }
    let target = match f.task {
        Task::Regress => None,
        Task::Classify => Some(target.unwrap_or_else(|| {
            let mut counts = vec![0usize; f.classes.len()];
            for r in &d.rows {
                let p = f.predict_raw(&r.features).as_f64() as u8;
                counts[f.classes.binary_search(&p).expect("trained class")] += 1;
            }
            let best = (0..counts.len()).fold(0, |b, c| if counts[c] > counts[b] { c } else { b });
            f.classes[best]
        })),
    };
    let mut g = global_summary(&ForestScore::new(f, target)?, d, bg)?;
    g.target_output = target;
    Ok(g)
}
