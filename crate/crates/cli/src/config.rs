//! JSON run configuration. Every field is optional; command-line flags
//! take precedence over file values, which take precedence over the preset
//! chosen by `scale`.
//!
//! ```json
//! {
//!   "experiment": "matmul-select",
//!   "scale": "desk",
//!   "seed": 1,
//!   "out": "data/matmul.csv",
//!   "threads": 4,
//!   "ack_long_run": false,
//!   "repeats": 5,
//!   "warmup": 1,
//!   "matmul": { "blocks": [...], "seed": 1, "test_fraction": 0.16, "split": {...} },
//!   "blockwidth": { ... },
//!   "piccg": { ... },
//!   "bench": { "repeats": 5, "warmup": 1, "threads": 1, "variants": [1, 2, 3], "block_width": null }
//! }
//! ```
//!
//! `matmul`, `blockwidth` and `piccg` replace the preset grid wholesale.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use xtune::data::{BenchmarkConfig, BlockwidthGrid, MatmulGrid, PiccgSweep};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MatmulSelect,
    Blockwidth,
    Piccg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub scale: Option<Scale>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub ack_long_run: bool,
    pub repeats: Option<usize>,
    pub warmup: Option<usize>,
    pub matmul: Option<MatmulGrid>,
    pub blockwidth: Option<BlockwidthGrid>,
    pub piccg: Option<PiccgSweep>,
    pub bench: Option<BenchmarkConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }
}
