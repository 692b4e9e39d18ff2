use serde::{Deserialize, Serialize};

use super::bench::{benchmark_splits, split_pair};
use super::{
    split_counts, split_tags, BenchmarkConfig, DataError, Dataset, Manifest, RowCounts, Sample,
    Split, Task,
};
use crate::kernels::{run_variant, BlockConfig, VariantId};
use crate::matrix::{
    derive_seed, gen_identity_mix, gen_random_scaled, gen_random_scaled_rect, DenseMatrix,
};
use crate::ozaki::{count_splits, split_matrix, SplitConfig, SplitSide};

pub const MATMUL_FEATURES: [&str; 7] = [
    "size",
    "sparsity_A",
    "max_A",
    "min_A",
    "sparse_splits_A",
    "dense_splits_A",
    "splits_B",
];

pub const BLOCKWIDTH_FEATURES: [&str; 3] = ["sparsity_A", "block_width", "splits_B"];

/// Named feature values in schema order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// The seven selection features of `A * B`. The split count of `B` is the
/// total over sparse and dense splits.
pub fn extract_matmul_features(
    a: &DenseMatrix,
    b: &DenseMatrix,
    cfg: &SplitConfig,
) -> Result<FeatureVector, DataError> {
    let (sa, sb) = split_pair(a, b, cfg)?;
    let stats = a.stats()?;
    let ca = count_splits(&sa);
    let cb = count_splits(&sb);
    Ok(FeatureVector {
        names: names(&MATMUL_FEATURES),
        values: vec![
            a.rows() as f64,
            stats.sparsity,
            stats.max_abs,
            stats.min_val,
            ca.sparse as f64,
            ca.dense as f64,
            cb.total as f64,
        ],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// `u * 10^k` entries with random zeros.
    RandomScaled,
    /// Identity plus sparse U(0,1) entries.
    IdentityMix,
}

/// Cartesian block of cells for one generator. `phis` applies to the
/// scaled generator only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBlock {
    pub generator: Generator,
    pub sizes: Vec<usize>,
    pub sparsities: Vec<f64>,
    pub phis: Vec<u32>,
    /// Columns of B; `None` makes B square.
    pub b_cols: Option<usize>,
    /// Exponent cap of the dense scaled B operand.
    pub b_phi: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatmulGrid {
    pub blocks: Vec<GridBlock>,
    pub seed: u64,
    pub test_fraction: f64,
    pub split: SplitConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatmulCell {
    pub generator: Generator,
    pub size: usize,
    pub sparsity: f64,
    pub phi: Option<u32>,
    pub b_cols: usize,
    pub b_phi: u32,
    pub seed: u64,
}

impl MatmulCell {
    pub fn operands(&self) -> Result<(DenseMatrix, DenseMatrix), DataError> {
        let a = match self.generator {
            Generator::RandomScaled => gen_random_scaled(
                self.size,
                self.sparsity,
                self.phi.unwrap_or(1),
                derive_seed(self.seed, 0),
            )?,
            Generator::IdentityMix => {
                gen_identity_mix(self.size, self.sparsity, derive_seed(self.seed, 0))?
            }
        };
        let b = gen_random_scaled_rect(
            self.size,
            self.b_cols,
            0.0,
            self.b_phi,
            derive_seed(self.seed, 1),
        )?;
        Ok((a, b))
    }
}

impl MatmulGrid {
    /// 5 sizes x 4 sparsities x 2 generators.
    pub fn desk() -> Self {
        let sizes = vec![32, 48, 64, 80, 96];
        Self {
            blocks: vec![
                GridBlock {
                    generator: Generator::RandomScaled,
                    sizes: sizes.clone(),
                    sparsities: vec![0.0, 0.3, 0.6, 0.9],
                    phis: vec![16],
                    b_cols: None,
                    b_phi: 16,
                },
                GridBlock {
                    generator: Generator::IdentityMix,
                    sizes,
                    sparsities: vec![0.90, 0.92, 0.95, 0.98],
                    phis: vec![],
                    b_cols: None,
                    b_phi: 16,
                },
            ],
            seed: 1,
            test_fraction: 0.16,
            split: SplitConfig::default(),
        }
    }

    /// Orders 1000..3000 with a block of 4000-column B operands; 81 cells,
    /// 68 train and 13 test.
    pub fn paper() -> Self {
        let sizes = vec![1000, 1500, 2000, 2500, 3000];
        Self {
            blocks: vec![
                GridBlock {
                    generator: Generator::RandomScaled,
                    sizes: sizes.clone(),
                    sparsities: vec![0.0, 0.3, 0.6, 0.9],
                    phis: vec![10, 30],
                    b_cols: None,
                    b_phi: 30,
                },
                GridBlock {
                    generator: Generator::IdentityMix,
                    sizes,
                    sparsities: vec![0.90, 0.92, 0.94, 0.96, 0.98],
                    phis: vec![],
                    b_cols: None,
                    b_phi: 30,
                },
                GridBlock {
                    generator: Generator::RandomScaled,
                    sizes: vec![1500, 2000, 2500, 3000],
                    sparsities: vec![0.0, 0.9],
                    phis: vec![30],
                    b_cols: Some(4000),
                    b_phi: 30,
                },
                GridBlock {
                    generator: Generator::IdentityMix,
                    sizes: vec![1500, 2000, 2500, 3000],
                    sparsities: vec![0.90, 0.98],
                    phis: vec![],
                    b_cols: Some(4000),
                    b_phi: 30,
                },
            ],
            seed: 1,
            test_fraction: 0.16,
            split: SplitConfig::default(),
        }
    }

    pub fn cells(&self) -> Vec<MatmulCell> {
        let mut out = Vec::new();
        for blk in &self.blocks {
            let phis: Vec<Option<u32>> = match blk.generator {
                Generator::RandomScaled => blk.phis.iter().copied().map(Some).collect(),
                Generator::IdentityMix => vec![None],
            };
            for &size in &blk.sizes {
                for &sparsity in &blk.sparsities {
                    for &phi in &phis {
                        let seed = derive_seed(self.seed, out.len() as u64);
                        out.push(MatmulCell {
                            generator: blk.generator,
                            size,
                            sparsity,
                            phi,
                            b_cols: blk.b_cols.unwrap_or(size),
                            b_phi: blk.b_phi,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn planned_rows(&self) -> RowCounts {
        let total = self.cells().len();
        let (train, test) = split_counts(total, self.test_fraction);
        RowCounts { total, train, test }
    }

    pub fn plan_manifest(&self, bench: &BenchmarkConfig) -> Result<Manifest, DataError> {
        let cfg = serde_json::json!({ "grid": self, "benchmark": bench });
        let mut m = Manifest::new("matmul-select", &cfg, self.planned_rows())?;
        m.notes.push(
            "label = fastest executable variant by median time, ties to the lowest id".into(),
        );
        m.notes
            .push("splits_B counts sparse and dense splits of B together".into());
        Ok(m)
    }
}

fn timing_names(bench: &BenchmarkConfig) -> Vec<String> {
    bench
        .variants
        .iter()
        .map(|v| format!("time_v{v}"))
        .collect()
}

/// Benchmarks every grid cell and labels it with the fastest variant.
pub fn build_matmul_dataset(
    grid: &MatmulGrid,
    bench: &BenchmarkConfig,
) -> Result<(Dataset, Manifest), DataError> {
    bench.validate()?;
    let manifest = grid.plan_manifest(bench)?;
    let mut d = Dataset::new(Task::Classify, names(&MATMUL_FEATURES), timing_names(bench));
    d.manifest_hash = manifest.config_hash.clone();
    let cells = grid.cells();
    let tags = split_tags(cells.len(), grid.test_fraction, grid.seed)?;
    for (cell, split) in cells.iter().zip(tags) {
        let (a, b) = cell.operands()?;
        let features = extract_matmul_features(&a, &b, &grid.split)?;
        let (sa, sb) = split_pair(&a, &b, &grid.split)?;
        let out = benchmark_splits(&sa, &sb, bench)?;
        d.push(Sample {
            seed: cell.seed,
            split,
            features: features.values,
            target: out.best.get() as f64,
            extras: out.timings.iter().map(|t| t.median_seconds).collect(),
        })?;
    }
    Ok((d, manifest))
}

/// Fixed-order cache-blocking sweep for one blocked variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockwidthGrid {
    pub n: usize,
    pub widths: Vec<usize>,
    pub sparsities: Vec<f64>,
    /// Exponent caps of B; they set the number of B splits.
    pub b_phis: Vec<u32>,
    pub a_phi: u32,
    pub variant: VariantId,
    pub repeats: usize,
    pub warmup: usize,
    pub threads: usize,
    pub seed: u64,
    pub test_fraction: f64,
    pub split: SplitConfig,
}

impl BlockwidthGrid {
    /// Order 400, 5 widths x 4 sparsities x 2 B exponent caps.
    pub fn desk() -> Self {
        Self {
            n: 400,
            widths: vec![32, 64, 128, 256, 400],
            sparsities: vec![0.5, 0.8, 0.9, 0.95],
            b_phis: vec![4, 16],
            a_phi: 8,
            variant: VariantId::new(5).expect("valid id"),
            repeats: 5,
            warmup: 1,
            threads: 1,
            seed: 2,
            test_fraction: 0.16,
            split: SplitConfig::default(),
        }
    }

    /// Order 1500, 16 widths x 8 sparsities x 3 B exponent caps = 384 rows.
    pub fn paper() -> Self {
        Self {
            n: 1500,
            widths: (1..=16).map(|k| (1500 * k + 8) / 16).collect(),
            sparsities: vec![0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.98],
            b_phis: vec![10, 20, 30],
            a_phi: 8,
            variant: VariantId::new(5).expect("valid id"),
            repeats: 5,
            warmup: 1,
            threads: 1,
            seed: 2,
            test_fraction: 0.16,
            split: SplitConfig::default(),
        }
    }

    pub fn planned_rows(&self) -> RowCounts {
        let total = self.widths.len() * self.sparsities.len() * self.b_phis.len();
        let (train, test) = split_counts(total, self.test_fraction);
        RowCounts { total, train, test }
    }

    pub fn plan_manifest(&self) -> Result<Manifest, DataError> {
        let mut m = Manifest::new("blockwidth", self, self.planned_rows())?;
        m.notes
            .push("target = median seconds of the blocked variant at the given width".into());
        Ok(m)
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.widths.is_empty() {
            return Err(DataError::Config("block width list is empty".into()));
        }
        if let Some(&w) = self.widths.iter().find(|&&w| w == 0 || w > self.n) {
            return Err(DataError::Config(format!(
                "block width {w} outside 1..={}",
                self.n
            )));
        }
        if self.repeats == 0 {
            return Err(DataError::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// Times the blocked variant over every (sparsity, B cap, width) cell.
pub fn build_blockwidth_dataset(grid: &BlockwidthGrid) -> Result<(Dataset, Manifest), DataError> {
    grid.validate()?;
    let manifest = grid.plan_manifest()?;
    let mut d = Dataset::new(
        Task::Regress,
        names(&BLOCKWIDTH_FEATURES),
        vec!["splits_A".into()],
    );
    d.manifest_hash = manifest.config_hash.clone();
    let total = grid.planned_rows().total;
    let tags = split_tags(total, grid.test_fraction, grid.seed)?;
    let mut k = 0;
    for (si, &s) in grid.sparsities.iter().enumerate() {
        let seed_a = derive_seed(grid.seed, si as u64);
        let a = gen_random_scaled(grid.n, s, grid.a_phi, seed_a)?;
        let sa = split_matrix(&a, SplitSide::RowSplit, &grid.split)?;
        let sparsity = a.sparsity()?;
        for (bi, &bphi) in grid.b_phis.iter().enumerate() {
            let b = gen_random_scaled(grid.n, 0.0, bphi, derive_seed(grid.seed, 1000 + bi as u64))?;
            let sb = split_matrix(&b, SplitSide::ColSplit, &grid.split)?;
            for &w in &grid.widths {
                let blk = BlockConfig { block_width: w };
                for _ in 0..grid.warmup {
                    run_variant(grid.variant, &sa, &sb, blk, grid.threads)?;
                }
                let mut samples = Vec::with_capacity(grid.repeats);
                for _ in 0..grid.repeats {
                    samples.push(
                        run_variant(grid.variant, &sa, &sb, blk, grid.threads)?.elapsed_seconds,
                    );
                }
                d.push(Sample {
                    seed: seed_a,
                    split: tags[k],
                    features: vec![sparsity, w as f64, sb.len() as f64],
                    target: super::median(&samples),
                    extras: vec![sa.len() as f64],
                })?;
                k += 1;
            }
        }
    }
    Ok((d, manifest))
}

/// Selection data whose label is set by a rule rather than by timing:
/// variant 1 (dense GEMM) when `sparsity_A < 0.5`, variant 4 (CRS SpMM)
/// otherwise. Features are extracted from real generator output, so the
/// other six columns carry their usual distributions.
pub fn engineered_selection_dataset(rows: usize, seed: u64) -> Result<Dataset, DataError> {
    use rand::Rng;
    let mut rng = crate::matrix::rng_from_seed(seed);
    let cfg = SplitConfig::default();
    let mut d = Dataset::new(Task::Classify, names(&MATMUL_FEATURES), vec![]);
    let tags = split_tags(rows, 0.25, seed)?;
    for (i, split) in tags.into_iter().enumerate() {
        let cell_seed = derive_seed(seed, i as u64);
        let n = rng.gen_range(16..=48);
        let a = if rng.gen_bool(0.5) {
            let s = rng.gen_range(0.0..0.99);
            gen_random_scaled(n, s, rng.gen_range(1..=30), cell_seed)?
        } else {
            gen_identity_mix(n, rng.gen_range(0.0..=1.0), cell_seed)?
        };
        let b = gen_random_scaled(n, 0.0, rng.gen_range(1..=30), derive_seed(cell_seed, 1))?;
        let f = extract_matmul_features(&a, &b, &cfg)?;
        let label = if f.values[1] < 0.5 { 1.0 } else { 4.0 };
        d.push(Sample {
            seed: cell_seed,
            split,
            features: f.values,
            target: label,
            extras: vec![],
        })?;
    }
    debug_assert!(d.rows.iter().any(|r| r.split == Split::Test));
    Ok(d)
}
