//! Dataset CSV files.
//!
//! ```text
//! # xtune-dataset v1 task=regress features=4 extras=5 manifest=<sha256 hex>
//! seed,split,<features...>,target,<extras...>
//! ```
//!
//! Values are written with 17 significant digits so a round trip is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{manifest_path_for, DataError, Dataset, Manifest, Sample, Split, Task};

const MAGIC: &str = "# xtune-dataset v1";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn dataset_write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    d.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "{MAGIC} task={} features={} extras={} manifest={}",
        d.task.as_str(),
        d.n_features(),
        d.extra_names.len(),
        if d.manifest_hash.is_empty() {
            "-"
        } else {
            &d.manifest_hash
        }
    )?;
    let mut cw = csv::Writer::from_writer(&mut w);
    let mut header = vec!["seed".to_string(), "split".to_string()];
    header.extend(d.feature_names.iter().cloned());
    header.push("target".into());
    header.extend(d.extra_names.iter().cloned());
    cw.write_record(&header)?;
    for r in &d.rows {
        let mut rec = vec![r.seed.to_string(), r.split.as_str().to_string()];
        rec.extend(r.features.iter().map(|&v| fmt_f64(v)));
        rec.push(fmt_f64(r.target));
        rec.extend(r.extras.iter().map(|&v| fmt_f64(v)));
        cw.write_record(&rec)?;
    }
    cw.flush()?;
    drop(cw);
    w.flush()?;
    Ok(())
}

struct Preamble {
    task: Task,
    features: usize,
    extras: usize,
    manifest: String,
}

fn parse_preamble(line: &str) -> Result<Preamble, DataError> {
    let rest = line
        .trim_end()
        .strip_prefix(MAGIC)
        .ok_or_else(|| DataError::Schema("missing dataset preamble line".into()))?;
    let (mut task, mut features, mut extras, mut manifest) = (None, None, None, None);
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| DataError::Schema(format!("bad preamble field {kv:?}")))?;
        let num = || {
            v.parse::<usize>()
                .map_err(|_| DataError::Schema(format!("bad count {v:?}")))
        };
        match k {
            "task" => task = Task::parse(v),
            "features" => features = Some(num()?),
            "extras" => extras = Some(num()?),
            "manifest" => {
                manifest = Some(if v == "-" {
                    String::new()
                } else {
                    v.to_string()
                })
            }
            _ => {}
        }
    }
    let manifest =
        manifest.ok_or_else(|| DataError::Schema("preamble lacks manifest hash".into()))?;
    if !manifest.is_empty() && (manifest.len() != 64 || hex::decode(&manifest).is_err()) {
        return Err(DataError::Manifest(format!(
            "malformed manifest hash {manifest:?}"
        )));
    }
    Ok(Preamble {
        task: task.ok_or_else(|| DataError::Schema("preamble lacks a valid task".into()))?,
        features: features
            .ok_or_else(|| DataError::Schema("preamble lacks feature count".into()))?,
        extras: extras.ok_or_else(|| DataError::Schema("preamble lacks extras count".into()))?,
        manifest,
    })
}

/// Reads a dataset. When a manifest sits next to the file its config hash
/// must match the one embedded in the preamble.
pub fn dataset_read_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    let mut first = String::new();
    r.read_line(&mut first)?;
    let pre = parse_preamble(&first)?;
    let mut body = String::new();
    r.read_to_string(&mut body)?;
    let d = parse_body(&pre, body.as_bytes())?;
    let mpath = manifest_path_for(path);
    if mpath.exists() {
        let m = Manifest::load(&mpath)?;
        m.verify(&d)?;
    }
    Ok(d)
}

fn parse_body(pre: &Preamble, body: &[u8]) -> Result<Dataset, DataError> {
    let mut cr = csv::Reader::from_reader(body);
    let header: Vec<String> = cr.headers()?.iter().map(str::to_string).collect();
    let expect = 2 + pre.features + 1 + pre.extras;
    if header.len() != expect {
        return Err(DataError::Schema(format!(
            "header has {} columns, preamble implies {expect}",
            header.len()
        )));
    }
    if header[0] != "seed" || header[1] != "split" || header[2 + pre.features] != "target" {
        return Err(DataError::Schema(
            "header must read seed,split,<features>,target,<extras>".into(),
        ));
    }
    let mut d = Dataset::new(
        pre.task,
        header[2..2 + pre.features].to_vec(),
        header[3 + pre.features..].to_vec(),
    );
    d.manifest_hash = pre.manifest.clone();
    for (i, rec) in cr.records().enumerate() {
        let rec = rec?;
        let bad = |msg: String| DataError::Malformed { row: i, msg };
        if rec.len() != expect {
            return Err(bad(format!("{} fields, expected {expect}", rec.len())));
        }
        let num = |k: usize| -> Result<f64, DataError> {
            rec[k].trim().parse::<f64>().map_err(|_| {
                bad(format!(
                    "column {:?}: {:?} is not a number",
                    header[k], &rec[k]
                ))
            })
        };
        let seed = rec[0]
            .parse::<u64>()
            .map_err(|_| bad(format!("bad seed {:?}", &rec[0])))?;
        let split = match &rec[1] {
            "train" => Split::Train,
            "test" => Split::Test,
            s => return Err(bad(format!("bad split tag {s:?}"))),
        };
        let features = (2..2 + pre.features)
            .map(num)
            .collect::<Result<Vec<_>, _>>()?;
        let target = num(2 + pre.features)?;
        let extras = (3 + pre.features..expect)
            .map(num)
            .collect::<Result<Vec<_>, _>>()?;
        d.push(Sample {
            seed,
            split,
            features,
            target,
            extras,
        })?;
    }
    d.validate()?;
    Ok(d)
}
