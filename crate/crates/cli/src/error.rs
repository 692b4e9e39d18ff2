use std::fmt;

use serde::Serialize;
use xtune::data::DataError;
use xtune::forest::ForestError;
use xtune::kernels::KernelError;
use xtune::matrix::{MatrixError, MmError};
use xtune::ozaki::OzakiError;
use xtune::piccg::PiccgError;
use xtune::shapley::ShapleyError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Validation,
    Numerical,
    Io,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Validation => 2,
            Kind::Numerical => 3,
            Kind::Io => 4,
        }
    }
}

/// Error printed to stderr as one JSON object.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
    /// Partial output, e.g. the solve report of a failed run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<serde_json::Value>,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            report: None,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(Kind::Validation, message)
    }

    pub fn io(path: &std::path::Path, e: impl fmt::Display) -> Self {
        Self::new(Kind::Io, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

fn csv_kind(e: &csv::Error) -> Kind {
    if e.is_io_error() {
        Kind::Io
    } else {
        Kind::Validation
    }
}

fn ozaki_kind(e: &OzakiError) -> Kind {
    match e {
        OzakiError::AccumulatorOverflow | OzakiError::OutOfRange(_) => Kind::Numerical,
        _ => Kind::Validation,
    }
}

fn piccg_kind(e: &PiccgError) -> Kind {
    match e {
        PiccgError::Breakdown { .. } => Kind::Numerical,
        _ => Kind::Validation,
    }
}

fn kernel_kind(e: &KernelError) -> Kind {
    match e {
        KernelError::Accumulate(o) => ozaki_kind(o),
        _ => Kind::Validation,
    }
}

macro_rules! from_error {
    ($t:ty, $kind:expr) => {
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                let k: fn(&$t) -> Kind = $kind;
                CliError::new(k(&e), e.to_string())
            }
        }
    };
}

from_error!(OzakiError, ozaki_kind);
from_error!(PiccgError, piccg_kind);
from_error!(KernelError, kernel_kind);
from_error!(MatrixError, |_| Kind::Validation);
from_error!(serde_json::Error, |e| if e.is_io() { Kind::Io } else { Kind::Validation });
from_error!(MmError, |e| match e {
    MmError::Io(_) => Kind::Io,
    _ => Kind::Validation,
});
from_error!(DataError, |e| match e {
    DataError::Io(_) => Kind::Io,
    DataError::Csv(c) => csv_kind(c),
    DataError::ResultMismatch { .. } => Kind::Numerical,
    DataError::Ozaki(o) => ozaki_kind(o),
    DataError::Kernel(k) => kernel_kind(k),
    DataError::Piccg(p) => piccg_kind(p),
    _ => Kind::Validation,
});
from_error!(ForestError, |e| match e {
    ForestError::Io(_) => Kind::Io,
    _ => Kind::Validation,
});
from_error!(ShapleyError, |e| match e {
    ShapleyError::Io(_) => Kind::Io,
    ShapleyError::Csv(c) => csv_kind(c),
    _ => Kind::Validation,
});
