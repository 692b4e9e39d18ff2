//! Matrix Market coordinate I/O (real, general or symmetric).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::{CrsMatrix, MatrixError};

#[derive(Debug, Error)]
pub enum MmError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: entry ({row}, {col}) outside a {rows}x{cols} matrix")]
    IndexOutOfBounds {
        line: usize,
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("duplicate entry at ({row}, {col})")]
    Duplicate { row: usize, col: usize },
    #[error("expected {expected} entries, found {found}")]
    EntryCount { expected: usize, found: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmSymmetry {
    General,
    Symmetric,
}

pub fn mm_read(path: impl AsRef<Path>) -> Result<CrsMatrix, MmError> {
    let file = File::open(path)?;
    mm_parse(BufReader::new(file))
}

pub fn mm_parse(reader: impl BufRead) -> Result<CrsMatrix, MmError> {
    let mut lines = reader.lines().enumerate();
    let (_, banner) = lines
        .next()
        .ok_or_else(|| MmError::Header("empty input".into()))?;
    let banner = banner?;
    let tokens: Vec<String> = banner
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(MmError::Header(format!("bad banner `{banner}`")));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(MmError::Header(
            "only `matrix coordinate` is supported".into(),
        ));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(MmError::Header(format!(
            "unsupported field `{}`",
            tokens[3]
        )));
    }
    let symmetry = match tokens[4].as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        other => return Err(MmError::Header(format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let Some((rows, cols, _)) = size else {
            if fields.len() != 3 {
                return Err(MmError::Header(format!("bad size line `{t}`")));
            }
            let p = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| MmError::Header(format!("bad size line `{t}`")))
            };
            let dims = (p(fields[0])?, p(fields[1])?, p(fields[2])?);
            if symmetry == MmSymmetry::Symmetric && dims.0 != dims.1 {
                return Err(MmError::Header("symmetric matrix must be square".into()));
            }
            size = Some(dims);
            triplets.reserve(dims.2);
            continue;
        };
        if fields.len() != 3 {
            return Err(MmError::Parse {
                line: lineno,
                msg: format!("expected `row col value`, got `{t}`"),
            });
        }
        let parse_idx = |s: &str| {
            s.parse::<usize>().map_err(|_| MmError::Parse {
                line: lineno,
                msg: format!("bad index `{s}`"),
            })
        };
        let i = parse_idx(fields[0])?;
        let j = parse_idx(fields[1])?;
        let v: f64 = fields[2].parse().map_err(|_| MmError::Parse {
            line: lineno,
            msg: format!("bad value `{}`", fields[2]),
        })?;
        if !v.is_finite() {
            return Err(MmError::Parse {
                line: lineno,
                msg: "non-finite value".into(),
            });
        }
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(MmError::IndexOutOfBounds {
                line: lineno,
                row: i,
                col: j,
                rows,
                cols,
            });
        }
        triplets.push((i - 1, j - 1, v));
    }
    let (rows, cols, nnz) = size.ok_or_else(|| MmError::Header("missing size line".into()))?;
    if triplets.len() != nnz {
        return Err(MmError::EntryCount {
            expected: nnz,
            found: triplets.len(),
        });
    }
    if symmetry == MmSymmetry::Symmetric {
        let mirrored: Vec<_> = triplets
            .iter()
            .filter(|&&(i, j, _)| i != j)
            .map(|&(i, j, v)| (j, i, v))
            .collect();
        triplets.extend(mirrored);
    }
    CrsMatrix::from_triplets(rows, cols, triplets).map_err(|e| match e {
        MatrixError::Duplicate { row, col } => MmError::Duplicate { row, col },
        other => MmError::Matrix(other),
    })
}

/// Writes all stored entries with a `general` banner.
pub fn mm_write(path: impl AsRef<Path>, m: &CrsMatrix) -> Result<(), MmError> {
    let mut w = BufWriter::new(File::create(path)?);
    mm_emit(&mut w, m, MmSymmetry::General)?;
    w.flush()?;
    Ok(())
}

/// Writes the lower triangle of a symmetric matrix with a `symmetric` banner.
pub fn mm_write_symmetric(path: impl AsRef<Path>, m: &CrsMatrix) -> Result<(), MmError> {
    if !m.is_symmetric() {
        return Err(MmError::Matrix(MatrixError::InvalidArgument(
            "matrix is not symmetric".into(),
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    mm_emit(&mut w, m, MmSymmetry::Symmetric)?;
    w.flush()?;
    Ok(())
}

pub fn mm_emit(w: &mut impl Write, m: &CrsMatrix, symmetry: MmSymmetry) -> Result<(), MmError> {
    let keep = |i: usize, j: usize| symmetry == MmSymmetry::General || j <= i;
    let count = (0..m.rows())
        .map(|i| m.row(i).0.iter().filter(|&&j| keep(i, j)).count())
        .sum::<usize>();
    let kind = match symmetry {
        MmSymmetry::General => "general",
        MmSymmetry::Symmetric => "symmetric",
    };
    writeln!(w, "%%MatrixMarket matrix coordinate real {kind}")?;
    writeln!(w, "{} {} {}", m.rows(), m.cols(), count)?;
    for i in 0..m.rows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if keep(i, j) {
                writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<CrsMatrix, MmError> {
        mm_parse(s.as_bytes())
    }

    #[test]
    fn identity_text() {
        let m =
            parse("%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1.0\n2 2 1.0\n")
                .unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m, CrsMatrix::identity(2));
    }

    #[test]
    fn symmetric_lower_is_expanded() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 4\n2 1 -1\n3 2 -1\n3 3 4\n";
        let m = parse(text).unwrap();
        // 2 strictly-lower entries mirrored, 2 diagonal entries kept once
        assert_eq!(m.nnz(), 2 * 2 + 2);
        assert!(m.is_symmetric());
    }

    #[test]
    fn error_kinds_are_distinct() {
        assert!(matches!(
            parse("%%MatrixMarket matrix array real general\n"),
            Err(MmError::Header(_))
        ));
        assert!(matches!(parse("garbage\n"), Err(MmError::Header(_))));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n"),
            Err(MmError::IndexOutOfBounds { .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n"),
            Err(MmError::Duplicate { row: 0, col: 0 })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n"),
            Err(MmError::EntryCount { .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n"),
            Err(MmError::Parse { .. })
        ));
    }

    #[test]
    fn seventeen_digit_values_round_trip() {
        let m =
            CrsMatrix::from_triplets(2, 3, vec![(0, 2, 0.1), (1, 0, -1.0 / 3.0), (1, 1, 6.02e23)])
                .unwrap();
        let mut buf = Vec::new();
        mm_emit(&mut buf, &m, MmSymmetry::General).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), m);
    }
}
