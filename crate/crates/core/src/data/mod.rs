//! Benchmark harness and tabular datasets for the tuning models.

mod bench;
mod csvio;
mod manifest;
mod matmul;
mod piccg;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{KernelError, VariantId};
use crate::matrix::{derive_seed, MatrixError};
use crate::ozaki::OzakiError;
use crate::piccg::PiccgError;

pub use bench::{
    benchmark_variants, median, select_best, BenchmarkConfig, BenchmarkOutcome, VariantTiming,
};
pub use csvio::{dataset_read_csv, dataset_write_csv};
pub use manifest::{manifest_path_for, HostInfo, Manifest, RowCounts, MANIFEST_FORMAT};
pub use matmul::{
    build_blockwidth_dataset, build_matmul_dataset, engineered_selection_dataset,
    extract_matmul_features, BlockwidthGrid, FeatureVector, Generator, GridBlock, MatmulCell,
    MatmulGrid, BLOCKWIDTH_FEATURES, MATMUL_FEATURES,
};
pub use piccg::{
    build_piccg_dataset, converged_rows, lambda_sweep, PaperReference, PiccgSweep, PICCG_EXTRAS,
    PICCG_FEATURES,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema: {0}")]
    Schema(String),
    #[error("malformed row {row}: {msg}")]
    Malformed { row: usize, msg: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("variant {variant} disagrees with variant {reference} in at least one element")]
    ResultMismatch {
        variant: VariantId,
        reference: VariantId,
    },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Ozaki(#[from] OzakiError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Piccg(#[from] PiccgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classify,
    Regress,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Classify => "classify",
            Task::Regress => "regress",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "classify" => Some(Task::Classify),
            "regress" => Some(Task::Regress),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One row: features, a target (variant id for classification, seconds for
/// regression) and auxiliary measurements that are not model inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Generator seed the row was built from.
    pub seed: u64,
    pub split: Split,
    pub features: Vec<f64>,
    pub target: f64,
    pub extras: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub task: Task,
    pub feature_names: Vec<String>,
    pub extra_names: Vec<String>,
    pub rows: Vec<Sample>,
    /// Config hash of the manifest this dataset was built from.
    pub manifest_hash: String,
}

impl Dataset {
    pub fn new(task: Task, feature_names: Vec<String>, extra_names: Vec<String>) -> Self {
        Self {
            task,
            feature_names,
            extra_names,
            rows: Vec::new(),
            manifest_hash: String::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, s: Sample) -> Result<(), DataError> {
        self.check_sample(self.rows.len(), &s)?;
        self.rows.push(s);
        Ok(())
    }

    fn check_sample(&self, row: usize, s: &Sample) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::Malformed { row, msg });
        if s.features.len() != self.feature_names.len() {
            return bad(format!(
                "{} features, schema has {}",
                s.features.len(),
                self.feature_names.len()
            ));
        }
        if s.extras.len() != self.extra_names.len() {
            return bad(format!(
                "{} extras, schema has {}",
                s.extras.len(),
                self.extra_names.len()
            ));
        }
        if s.features.iter().any(|v| !v.is_finite()) {
            return bad("non-finite feature".into());
        }
        match self.task {
            Task::Classify => {
                let ok = s.target.fract() == 0.0
                    && (1.0..=14.0).contains(&s.target)
                    && VariantId::new(s.target as u8).is_ok_and(|v| v.info().executable());
                if !ok {
                    return bad(format!("label {} is not an executable variant", s.target));
                }
            }
            Task::Regress => {
                if !(s.target > 0.0) || !s.target.is_finite() {
                    return bad(format!("regression target {} must be positive", s.target));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut names = BTreeSet::new();
        for n in self.feature_names.iter().chain(&self.extra_names) {
            if !names.insert(n.as_str()) || n == "target" || n == "seed" || n == "split" {
                return Err(DataError::Schema(format!(
                    "duplicate or reserved column name {n:?}"
                )));
            }
        }
        for (i, s) in self.rows.iter().enumerate() {
            self.check_sample(i, s)?;
        }
        Ok(())
    }

    pub fn feature_index(&self, name: &str) -> Result<usize, DataError> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| DataError::Schema(format!("no feature column {name:?}")))
    }

    pub fn extra_index(&self, name: &str) -> Result<usize, DataError> {
        self.extra_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| DataError::Schema(format!("no extra column {name:?}")))
    }

    pub fn feature_column(&self, name: &str) -> Result<Vec<f64>, DataError> {
        let j = self.feature_index(name)?;
        Ok(self.rows.iter().map(|r| r.features[j]).collect())
    }

    pub fn extra_column(&self, name: &str) -> Result<Vec<f64>, DataError> {
        let j = self.extra_index(name)?;
        Ok(self.rows.iter().map(|r| r.extras[j]).collect())
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    /// Rows tagged `split`, same schema.
    pub fn subset(&self, split: Split) -> Dataset {
        self.filtered(|r| r.split == split)
    }

    pub fn filtered(&self, keep: impl Fn(&Sample) -> bool) -> Dataset {
        Dataset {
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            ..self.header_clone()
        }
    }

    fn header_clone(&self) -> Dataset {
        Dataset {
            task: self.task,
            feature_names: self.feature_names.clone(),
            extra_names: self.extra_names.clone(),
            rows: Vec::new(),
            manifest_hash: self.manifest_hash.clone(),
        }
    }

    /// Tags `round(len * test_fraction)` rows as test, chosen by a seeded
    /// shuffle; the rest are train.
    pub fn assign_splits(&mut self, test_fraction: f64, seed: u64) -> Result<(), DataError> {
        let tags = split_tags(self.rows.len(), test_fraction, seed)?;
        for (r, t) in self.rows.iter_mut().zip(tags) {
            r.split = t;
        }
        Ok(())
    }
}

/// `(train, test)` row counts for `n` rows.
pub fn split_counts(n: usize, test_fraction: f64) -> (usize, usize) {
    let test = ((n as f64) * test_fraction).round() as usize;
    (n - test.min(n), test.min(n))
}

pub(crate) fn split_tags(n: usize, test_fraction: f64, seed: u64) -> Result<Vec<Split>, DataError> {
    use rand::seq::SliceRandom;
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(DataError::Config(format!(
            "test fraction {test_fraction} outside [0, 1]"
        )));
    }
    let (_, test) = split_counts(n, test_fraction);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut crate::matrix::rng_from_seed(derive_seed(
        seed,
        u64::MAX,
    )));
    let mut tags = vec![Split::Train; n];
    for &i in &order[..test] {
        tags[i] = Split::Test;
    }
    Ok(tags)
}

/// Indicator column names for a one-hot encoded column. `fill_level`
/// becomes `m0, m1, ...`; any other column `c` becomes `c=0, c=1, ...`.
pub fn one_hot_names(column: &str, categories: &[i64]) -> Vec<String> {
    categories
        .iter()
        .map(|c| {
            if column == "fill_level" {
                format!("m{c}")
            } else {
                format!("{column}={c}")
            }
        })
        .collect()
}

const MAX_CATEGORIES: usize = 32;

/// Replaces an integer-valued column by one indicator column per distinct
/// value (ascending), in place. Returns the categories.
pub fn one_hot_encode(d: &Dataset, column: &str) -> Result<(Dataset, Vec<i64>), DataError> {
    let j = d.feature_index(column)?;
    let mut cats = BTreeSet::new();
    for r in &d.rows {
        let v = r.features[j];
        if v.fract() != 0.0 || v.abs() > 1e15 {
            return Err(DataError::Schema(format!(
                "column {column:?} is not integer-valued ({v})"
            )));
        }
        cats.insert(v as i64);
    }
    if cats.len() > MAX_CATEGORIES {
        return Err(DataError::Schema(format!(
            "column {column:?} has {} distinct values, too many for one-hot encoding",
            cats.len()
        )));
    }
    let cats: Vec<i64> = cats.into_iter().collect();
    let names = one_hot_names(column, &cats);
    let mut out = d.header_clone();
    out.feature_names.splice(j..=j, names);
    for r in &d.rows {
        let mut s = r.clone();
        let v = r.features[j] as i64;
        let ind: Vec<f64> = cats
            .iter()
            .map(|&c| if c == v { 1.0 } else { 0.0 })
            .collect();
        s.features.splice(j..=j, ind);
        out.rows.push(s);
    }
    out.validate()?;
    Ok((out, cats))
}

/// Inverse of [`one_hot_encode`].
pub fn one_hot_decode(d: &Dataset, column: &str, categories: &[i64]) -> Result<Dataset, DataError> {
    let names = one_hot_names(column, categories);
    let j = d.feature_index(&names[0])?;
    if d.feature_names.get(j..j + names.len()) != Some(&names[..]) {
        return Err(DataError::Schema(format!(
            "indicator columns for {column:?} are not contiguous"
        )));
    }
    let mut out = d.header_clone();
    out.feature_names
        .splice(j..j + names.len(), [column.to_string()]);
    for (i, r) in d.rows.iter().enumerate() {
        let ind = &r.features[j..j + names.len()];
        let hot: Vec<usize> = (0..ind.len()).filter(|&k| ind[k] == 1.0).collect();
        if hot.len() != 1 || ind.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(DataError::Malformed {
                row: i,
                msg: format!("indicators for {column:?} are not one-hot"),
            });
        }
        let mut s = r.clone();
        s.features
            .splice(j..j + names.len(), [categories[hot[0]] as f64]);
        out.rows.push(s);
    }
    Ok(out)
}
