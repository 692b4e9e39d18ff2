use serde::{Deserialize, Serialize};

use super::DataError;
use crate::kernels::{run_variant, BlockConfig, VariantId};
use crate::matrix::DenseMatrix;
use crate::ozaki::{split_matrix, SplitConfig, SplitSet, SplitSide};

/// Timing protocol for one benchmark cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub repeats: usize,
    pub warmup: usize,
    pub threads: usize,
    pub variants: Vec<VariantId>,
    /// Right-hand-side block width for the blocked schemes; `None` picks
    /// `min(64, cols of B)`.
    pub block_width: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            repeats: 5,
            warmup: 1,
            threads: 1,
            variants: VariantId::executable().collect(),
            block_width: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.repeats == 0 {
            return Err(DataError::Config("repeats must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(DataError::Config("thread count must be at least 1".into()));
        }
        if !self.variants.iter().any(|v| v.info().executable()) {
            return Err(DataError::Config("no executable variant selected".into()));
        }
        Ok(())
    }

    pub fn block_for(&self, rhs_cols: usize) -> BlockConfig {
        BlockConfig {
            block_width: self.block_width.unwrap_or(64).clamp(1, rhs_cols.max(1)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantTiming {
    pub variant: VariantId,
    pub median_seconds: f64,
    pub samples: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkOutcome {
    pub timings: Vec<VariantTiming>,
    pub best: VariantId,
    pub block_width: usize,
    pub result: DenseMatrix,
}

/// Median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Fastest variant; equal times go to the lowest id.
pub fn select_best(timings: &[(VariantId, f64)]) -> Option<VariantId> {
    timings
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|t| t.0)
}

fn bitwise_eq(a: &DenseMatrix, b: &DenseMatrix) -> bool {
    a.rows() == b.rows()
        && a.cols() == b.cols()
        && a.data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

pub(crate) fn split_pair(
    a: &DenseMatrix,
    b: &DenseMatrix,
    cfg: &SplitConfig,
) -> Result<(SplitSet, SplitSet), DataError> {
    if a.cols() != b.rows() {
        return Err(DataError::Config(format!(
            "A is {}x{}, B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok((
        split_matrix(a, SplitSide::RowSplit, cfg)?,
        split_matrix(b, SplitSide::ColSplit, cfg)?,
    ))
}

/// Times every selected variant on pre-split operands and checks that all
/// of them produce the same bits.
pub(crate) fn benchmark_splits(
    sa: &SplitSet,
    sb: &SplitSet,
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkOutcome, DataError> {
    cfg.validate()?;
    let blk = cfg.block_for(sb.cols());
    let mut reference: Option<(VariantId, DenseMatrix)> = None;
    let mut timings = Vec::new();
    for &v in &cfg.variants {
        for _ in 0..cfg.warmup {
            run_variant(v, sa, sb, blk, cfg.threads)?;
        }
        let mut samples = Vec::with_capacity(cfg.repeats);
        for _ in 0..cfg.repeats {
            let run = run_variant(v, sa, sb, blk, cfg.threads)?;
            match &reference {
                None => reference = Some((v, run.result)),
                Some((rv, rm)) => {
                    if !bitwise_eq(rm, &run.result) {
                        return Err(DataError::ResultMismatch {
                            variant: v,
                            reference: *rv,
                        });
                    }
                }
            }
            samples.push(run.elapsed_seconds);
        }
        timings.push(VariantTiming {
            variant: v,
            median_seconds: median(&samples),
            samples,
        });
    }
    let pairs: Vec<(VariantId, f64)> = timings
        .iter()
        .map(|t| (t.variant, t.median_seconds))
        .collect();
    let best = select_best(&pairs).expect("at least one variant ran");
    Ok(BenchmarkOutcome {
        timings,
        best,
        block_width: blk.block_width,
        result: reference.expect("at least one run").1,
    })
}

/// Median timings of the selected variants for `A * B` and the fastest of
/// them. Any bitwise disagreement between variants is an error.
pub fn benchmark_variants(
    a: &DenseMatrix,
    b: &DenseMatrix,
    cfg: &BenchmarkConfig,
    split_cfg: &SplitConfig,
) -> Result<BenchmarkOutcome, DataError> {
    let (sa, sb) = split_pair(a, b, split_cfg)?;
    benchmark_splits(&sa, &sb, cfg)
}
