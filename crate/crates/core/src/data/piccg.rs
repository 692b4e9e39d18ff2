use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    median, split_counts, split_tags, DataError, Dataset, Manifest, RowCounts, Sample, Task,
};
use crate::piccg::{default_layer, p3d_generate, piccg_solve, IcParams, PiccgError};

pub const PICCG_FEATURES: [&str; 4] = [
    "matrix_order",
    "log10_lambda_ratio",
    "fill_level",
    "threshold",
];
pub const PICCG_EXTRAS: [&str; 5] = [
    "iterations",
    "nnz_u",
    "converged",
    "relative_residual",
    "shift_used",
];

/// Row totals reported for a published sweep, kept for comparison with the
/// configured sweep arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperReference {
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Sweep over P3D problems and IC(m, t) parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiccgSweep {
    /// Grid points per axis; the matrix order is the cube.
    pub grids: Vec<usize>,
    pub lambda1: f64,
    pub lambda2: Vec<f64>,
    pub fill_levels: Vec<u32>,
    pub thresholds: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub seed: u64,
    pub test_fraction: f64,
    pub reference: Option<PaperReference>,
}

/// `10^(-k/10)` for `k = 0..count`.
pub fn lambda_sweep(count: usize) -> Vec<f64> {
    (0..count).map(|k| 10f64.powf(-(k as f64) / 10.0)).collect()
}

impl PiccgSweep {
    /// 16^3 grid, ten decades of lambda2, the 20-point threshold grid
    /// 0.001..0.020.
    pub fn desk() -> Self {
        Self {
            grids: vec![16],
            lambda1: 1.0,
            lambda2: (0..10).map(|k| 10f64.powi(-k)).collect(),
            fill_levels: vec![0, 1, 2],
            thresholds: (1..=20).map(|k| k as f64 / 1000.0).collect(),
            tol: 1e-8,
            max_iter: 5000,
            repeats: 3,
            warmup: 1,
            seed: 3,
            test_fraction: 0.2,
            reference: None,
        }
    }

    /// Three grids (orders 4096, 32768, 262144), 90 lambda2 values and the
    /// 199-point threshold grid 0.0001..0.0199.
    pub fn paper() -> Self {
        Self {
            grids: vec![16, 32, 64],
            lambda1: 1.0,
            lambda2: lambda_sweep(90),
            fill_levels: vec![0, 1, 2],
            thresholds: (1..=199).map(|k| k as f64 / 10000.0).collect(),
            tol: 1e-8,
            max_iter: 20000,
            repeats: 3,
            warmup: 1,
            seed: 3,
            test_fraction: 0.2,
            reference: Some(PaperReference {
                train_rows: 41073,
                test_rows: 10269,
            }),
        }
    }

    pub fn rows_per_grid(&self) -> usize {
        self.lambda2.len() * self.fill_levels.len() * self.thresholds.len()
    }

    pub fn planned_rows(&self) -> RowCounts {
        let total = self.grids.len() * self.rows_per_grid();
        let (train, test) = split_counts(total, self.test_fraction);
        RowCounts { total, train, test }
    }

    /// Disagreements between the configured sweep and the reference totals.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if let Some(r) = self.reference {
            let per = self.rows_per_grid();
            let reported = r.train_rows + r.test_rows;
            if per != r.train_rows && per != reported {
                w.push(format!(
                    "sweep arithmetic {} lambda2 x {} fill levels x {} thresholds = {per} rows per grid; \
                     reference reports {} train + {} test = {reported}, which matches neither",
                    self.lambda2.len(),
                    self.fill_levels.len(),
                    self.thresholds.len(),
                    r.train_rows,
                    r.test_rows
                ));
            }
        }
        w
    }

    pub fn plan_manifest(&self) -> Result<Manifest, DataError> {
        let mut m = Manifest::new("piccg", self, self.planned_rows())?;
        m.warnings = self.warnings();
        m.notes
            .push("target = median wall time of factorization plus PCG solve".into());
        m.notes.push(
            "fill levels count the original pattern as level one: m = 0 and m = 1 both keep no fill".into(),
        );
        m.notes
            .push("thresholds apply to fill entries after scaling A to unit diagonal".into());
        Ok(m)
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.grids.is_empty()
            || self.lambda2.is_empty()
            || self.fill_levels.is_empty()
            || self.thresholds.is_empty()
        {
            return Err(DataError::Config(
                "every sweep axis needs at least one value".into(),
            ));
        }
        if self.repeats == 0 {
            return Err(DataError::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row per (grid, lambda2, m, t) cell; the target is the median wall
/// time of factor plus solve. A factorization breakdown is kept as an
/// unconverged row timed up to the failure.
pub fn build_piccg_dataset(sweep: &PiccgSweep) -> Result<(Dataset, Manifest), DataError> {
    sweep.validate()?;
    let manifest = sweep.plan_manifest()?;
    let mut d = Dataset::new(
        Task::Regress,
        PICCG_FEATURES.iter().map(|s| s.to_string()).collect(),
        PICCG_EXTRAS.iter().map(|s| s.to_string()).collect(),
    );
    d.manifest_hash = manifest.config_hash.clone();
    let tags = split_tags(sweep.planned_rows().total, sweep.test_fraction, sweep.seed)?;
    let mut k = 0;
    for &n in &sweep.grids {
        for &l2 in &sweep.lambda2 {
            let prob = p3d_generate(n, sweep.lambda1, l2, default_layer(n))?;
            let order = prob.order() as f64;
            let ratio = (l2 / sweep.lambda1).log10();
            for &m in &sweep.fill_levels {
                for &t in &sweep.thresholds {
                    let params = IcParams::new(m, t);
                    let mut samples = Vec::with_capacity(sweep.repeats);
                    let mut extras = None;
                    for rep in 0..sweep.warmup + sweep.repeats {
                        let start = Instant::now();
                        let res = piccg_solve(&prob.a, &prob.b, &params, sweep.tol, sweep.max_iter);
                        let fail_time = start.elapsed().as_secs_f64().max(1e-9);
                        let (secs, ex) = match res {
                            Ok((_, r)) => (
                                r.elapsed_seconds,
                                vec![
                                    r.iterations as f64,
                                    r.nnz_u as f64,
                                    if r.converged { 1.0 } else { 0.0 },
                                    r.relative_residual,
                                    r.shift_used,
                                ],
                            ),
                            Err(PiccgError::Breakdown { shift, .. }) => {
                                (fail_time, vec![0.0, 0.0, 0.0, f64::INFINITY, shift])
                            }
                            Err(e) => return Err(e.into()),
                        };
                        if rep >= sweep.warmup {
                            samples.push(secs);
                        }
                        extras.get_or_insert(ex);
                    }
                    d.push(Sample {
                        seed: sweep.seed,
                        split: tags[k],
                        features: vec![order, ratio, m as f64, t],
                        target: median(&samples),
                        extras: extras.expect("at least one run"),
                    })?;
                    k += 1;
                }
            }
        }
    }
    Ok((d, manifest))
}

/// Rows whose solve converged.
pub fn converged_rows(d: &Dataset) -> Result<Dataset, DataError> {
    let j = d.extra_index("converged")?;
    Ok(d.filtered(|r| r.extras[j] == 1.0))
}
