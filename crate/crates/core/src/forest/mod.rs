//! Random forests grown with CART: Gini splits for variant selection,
//! variance splits for run-time regression.

mod tree;

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Task};
use crate::matrix::{derive_seed, rng_from_seed};

pub use tree::{DecisionTree, Node};

pub const MODEL_FORMAT: &str = "xtune-forest v1";

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("evaluation set is empty")]
    EmptyEvaluation,
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corrupt model: {0}")]
    Corrupt(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_trees: usize,
    /// 0 means unbounded.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// `None` picks `floor(sqrt(d))` for classification and `d / 3` for
    /// regression (at least 1).
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 0,
            min_samples_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn mtry(&self, task: Task, d: usize) -> usize {
        let auto = match task {
            Task::Classify => (d as f64).sqrt().floor() as usize,
            Task::Regress => d / 3,
        };
        self.features_per_split.unwrap_or(auto).clamp(1, d.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub format: String,
    pub task: Task,
    pub feature_names: Vec<String>,
    /// Class labels (variant ids) in ascending order; empty for regression.
    pub classes: Vec<u8>,
    pub config: TrainConfig,
    /// Training target range; regression outputs are clamped into it.
    pub target_min: f64,
    pub target_max: f64,
    pub trees: Vec<DecisionTree>,
}

/// Model output for one instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Prediction {
    Variant(u8),
    Seconds(f64),
}

impl Prediction {
    pub fn as_f64(self) -> f64 {
        match self {
            Prediction::Variant(v) => v as f64,
            Prediction::Seconds(s) => s,
        }
    }
}

pub fn train(d: &Dataset, cfg: &TrainConfig) -> Result<RandomForest, ForestError> {
    if d.is_empty() {
        return Err(ForestError::EmptyDataset);
    }
    if cfg.n_trees == 0 {
        return Err(ForestError::Config("n_trees must be at least 1".into()));
    }
    if d.n_features() == 0 {
        return Err(ForestError::Schema("dataset has no feature columns".into()));
    }
    let dcols = d.n_features();
    let mut x = Vec::with_capacity(d.len() * dcols);
    for r in &d.rows {
        if r.features.len() != dcols {
            return Err(ForestError::Schema("ragged feature rows".into()));
        }
        x.extend_from_slice(&r.features);
    }
    let targets = d.targets();
    let (classes, y): (Vec<u8>, Vec<f64>) = match d.task {
        Task::Classify => {
            let mut classes: Vec<u8> = targets.iter().map(|&t| t as u8).collect();
            classes.sort_unstable();
            classes.dedup();
            let y = targets
                .iter()
                .map(|&t| classes.binary_search(&(t as u8)).expect("present") as f64)
                .collect();
            (classes, y)
        }
        Task::Regress => (Vec::new(), targets.clone()),
    };
    let data = tree::TrainData {
        x: &x,
        y: &y,
        d: dcols,
    };
    let params = tree::GrowParams {
        task: d.task,
        n_classes: classes.len(),
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        features_per_split: cfg.mtry(d.task, dcols),
    };
    let n = d.len();
    let trees: Vec<DecisionTree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, t as u64));
            let samples: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            tree::grow(&data, samples, &params, &mut rng)
        })
        .collect();
    let (lo, hi) = targets
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| {
            (a.min(t), b.max(t))
        });
    Ok(RandomForest {
        format: MODEL_FORMAT.to_string(),
        task: d.task,
        feature_names: d.feature_names.clone(),
        classes,
        config: cfg.clone(),
        target_min: lo,
        target_max: hi,
        trees,
    })
}

impl RandomForest {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Fraction of trees voting for each class (order of `classes`).
    pub fn class_votes(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0usize; self.classes.len()];
        for t in &self.trees {
            votes[t.predict_value(x) as usize] += 1;
        }
        let n = self.trees.len() as f64;
        votes.into_iter().map(|v| v as f64 / n).collect()
    }

    /// Vote fraction for class `label`; zero for labels never seen.
    pub fn class_score(&self, x: &[f64], label: u8) -> f64 {
        match self.classes.binary_search(&label) {
            Ok(c) => {
                let hits = self
                    .trees
                    .iter()
                    .filter(|t| t.predict_value(x) as usize == c)
                    .count();
                hits as f64 / self.trees.len() as f64
            }
            Err(_) => 0.0,
        }
    }

    /// Mean of the tree outputs, clamped to the training target range.
    pub fn regress_value(&self, x: &[f64]) -> f64 {
        let mut it = self.trees.iter().map(|t| t.predict_value(x));
        let y0 = it.next().expect("forest has trees");
        let s: f64 = it.map(|v| v - y0).sum();
        (y0 + s / self.trees.len() as f64).clamp(self.target_min, self.target_max)
    }

    /// Majority vote (ties to the lowest label) or mean regression output.
    pub fn predict_raw(&self, x: &[f64]) -> Prediction {
        match self.task {
            Task::Classify => {
                let votes = self.class_votes(x);
                let mut best = 0;
                for (c, &v) in votes.iter().enumerate() {
                    if v > votes[best] {
                        best = c;
                    }
                }
                Prediction::Variant(self.classes[best])
            }
            Task::Regress => Prediction::Seconds(self.regress_value(x)),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ForestError> {
        if x.len() != self.n_features() {
            return Err(ForestError::Schema(format!(
                "instance has {} features, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok(self.predict_raw(x))
    }

    pub fn check_schema(&self, d: &Dataset) -> Result<(), ForestError> {
        if d.feature_names != self.feature_names || d.task != self.task {
            return Err(ForestError::Schema(format!(
                "model ({:?}, {:?}) vs dataset ({:?}, {:?})",
                self.task, self.feature_names, d.task, d.feature_names
            )));
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ForestError> {
        if self.format != MODEL_FORMAT {
            return Err(ForestError::Corrupt(format!(
                "unsupported model format {:?}",
                self.format
            )));
        }
        if self.trees.is_empty() {
            return Err(ForestError::Corrupt("model has no trees".into()));
        }
        if (self.task == Task::Classify) == self.classes.is_empty() {
            return Err(ForestError::Corrupt(
                "class list does not match the task".into(),
            ));
        }
        for (i, t) in self.trees.iter().enumerate() {
            t.check(self.n_features(), self.classes.len())
                .map_err(|e| ForestError::Corrupt(format!("tree {i}: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub actual: u8,
    pub predicted: u8,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub confusion: Vec<ConfusionEntry>,
}

pub fn evaluate(f: &RandomForest, d: &Dataset) -> Result<EvalReport, ForestError> {
    f.check_schema(d)?;
    if d.is_empty() {
        return Err(ForestError::EmptyEvaluation);
    }
    let n = d.len();
    match f.task {
        Task::Classify => {
            let mut pairs = std::collections::BTreeMap::new();
            let mut correct = 0;
            for r in &d.rows {
                let p = f.predict_raw(&r.features).as_f64() as u8;
                let a = r.target as u8;
                correct += usize::from(p == a);
                *pairs.entry((a, p)).or_insert(0) += 1;
            }
            Ok(EvalReport {
                task: f.task,
                n,
                accuracy: Some(correct as f64 / n as f64),
                mape: None,
                max_relative_error: None,
                confusion: pairs
                    .into_iter()
                    .map(|((actual, predicted), count)| ConfusionEntry {
                        actual,
                        predicted,
                        count,
                    })
                    .collect(),
            })
        }
        Task::Regress => {
            let rel: Vec<f64> = d
                .rows
                .iter()
                .map(|r| (f.regress_value(&r.features) - r.target).abs() / r.target)
                .collect();
            Ok(EvalReport {
                task: f.task,
                n,
                accuracy: None,
                mape: Some(rel.iter().sum::<f64>() / n as f64),
                max_relative_error: Some(rel.iter().copied().fold(0.0, f64::max)),
                confusion: Vec::new(),
            })
        }
    }
}

pub fn model_to_json(f: &RandomForest) -> Result<String, ForestError> {
    Ok(serde_json::to_string(f)?)
}

pub fn model_from_json(text: &str) -> Result<RandomForest, ForestError> {
    let f: RandomForest = serde_json::from_str(text)
        .map_err(|e| ForestError::Corrupt(format!("unreadable model: {e}")))?;
    f.validate()?;
    Ok(f)
}

pub fn model_save(f: &RandomForest, path: impl AsRef<Path>) -> Result<(), ForestError> {
    let mut s = model_to_json(f)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn model_load(path: impl AsRef<Path>) -> Result<RandomForest, ForestError> {
    model_from_json(&std::fs::read_to_string(path)?)
}
