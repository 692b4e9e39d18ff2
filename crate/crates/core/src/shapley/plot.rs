use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use super::{rank, BeeswarmPoint, GlobalSummary, ShapleyError};
use crate::matrix::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BeeswarmFormat {
    Csv,
    Svg,
}

impl BeeswarmFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(Self::Csv),
            "svg" => Some(Self::Svg),
            _ => None,
        }
    }
}

pub fn write_beeswarm_csv(
    points: &[BeeswarmPoint],
    path: impl AsRef<Path>,
) -> Result<(), ShapleyError> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_beeswarm_csv(path: impl AsRef<Path>) -> Result<Vec<BeeswarmPoint>, ShapleyError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ["feature", "value", "phi", "instance"] {
        return Err(ShapleyError::Malformed(format!(
            "unexpected header {header:?}"
        )));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_beeswarm(
    g: &GlobalSummary,
    path: impl AsRef<Path>,
    format: BeeswarmFormat,
) -> Result<(), ShapleyError> {
    if g.points.is_empty() {
        return Err(ShapleyError::EmptyDataset);
    }
    match format {
        BeeswarmFormat::Csv => write_beeswarm_csv(&g.points, path),
        BeeswarmFormat::Svg => Ok(std::fs::write(
            path,
            beeswarm_svg(&g.points, "SHAP value")?,
        )?),
    }
}

pub fn summary_json(g: &GlobalSummary) -> Value {
    let ranking: Vec<Value> = g
        .ranking
        .iter()
        .map(|f| json!({ "feature": f, "mean_abs_phi": g.mean_abs(f) }))
        .collect();
    json!({
        "target_output": g.target_output,
        "base_value": g.base_value,
        "instances": g.points.len() / g.feature_names.len().max(1),
        "ranking": ranking,
        "background": {
            "method": "interventional",
            "source": "training rows",
            "rows": g.background_rows,
            "cap": g.background_cap,
            "seed": g.background_seed,
        },
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const WIDTH: f64 = 720.0;
const LEFT: f64 = 160.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const ROW: f64 = 36.0;

/// One strip per feature (largest mean |phi| on top), x = phi, colour from
/// the feature value scaled to its own range, blue low to red high. The
/// vertical jitter is a hash of the instance id.
pub fn beeswarm_svg(points: &[BeeswarmPoint], axis_label: &str) -> Result<String, ShapleyError> {
    if points.is_empty() {
        return Err(ShapleyError::EmptyDataset);
    }
    let mut names: Vec<String> = Vec::new();
    for p in points {
        if !names.contains(&p.feature) {
            names.push(p.feature.clone());
        }
    }
    let col = |f: &str| names.iter().position(|n| n == f).expect("collected");
    let nf = names.len();
    let mut count = vec![0usize; nf];
    let (mut lo, mut hi) = (vec![f64::INFINITY; nf], vec![f64::NEG_INFINITY; nf]);
    for p in points {
        let j = col(&p.feature);
        count[j] += 1;
        lo[j] = lo[j].min(p.value);
        hi[j] = hi[j].max(p.value);
    }
    let mut mean_abs = vec![0.0; nf];
    for p in points {
        let j = col(&p.feature);
        mean_abs[j] += p.phi.abs() / count[j] as f64;
    }
    let order = rank(&names, &mean_abs);
    let mut xmax = points
        .iter()
        .map(|p| p.phi.abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    if xmax == 0.0 {
        xmax = 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let xpos = |phi: f64| LEFT + (phi.clamp(-xmax, xmax) + xmax) / (2.0 * xmax) * plot_w;
    let height = TOP + nf as f64 * ROW + 50.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{height}" fill="white"/>"#
    );
    let x0 = xpos(0.0);
    let bottom = TOP + nf as f64 * ROW;
    let _ = writeln!(
        s,
        r##"<line x1="{x0:.2}" y1="{:.2}" x2="{x0:.2}" y2="{bottom:.2}" stroke="#999"/>"##,
        TOP - 10.0
    );
    for (r, name) in order.iter().enumerate() {
        let y = TOP + (r as f64 + 0.5) * ROW;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 10.0,
            y + 4.0,
            escape(name)
        );
    }
    let rank_of = |f: &str| order.iter().position(|n| n == f).expect("ranked");
    for p in points {
        if !p.phi.is_finite() {
            continue;
        }
        let j = col(&p.feature);
        let t = if hi[j] > lo[j] {
            (p.value - lo[j]) / (hi[j] - lo[j])
        } else {
            0.5
        };
        let red = (30.0 + 225.0 * t).round() as u8;
        let blue = (255.0 - 225.0 * t).round() as u8;
        let h = derive_seed(0x6a09_e667, p.instance as u64);
        let jitter = ((h >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.6 * ROW;
        let y = TOP + (rank_of(&p.feature) as f64 + 0.5) * ROW + jitter;
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{y:.2}" r="3" fill="rgb({red},60,{blue})" fill-opacity="0.8"/>"#,
            xpos(p.phi)
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="#333"/>"##,
        WIDTH - RIGHT
    );
    for v in [-xmax, 0.0, xmax] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.3e}</text>"#,
            xpos(v),
            bottom + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        bottom + 36.0,
        escape(axis_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="end"><tspan fill="rgb(30,60,255)">low</tspan> / <tspan fill="rgb(255,60,30)">high</tspan> feature value</text>"#,
        WIDTH - RIGHT
    );
    s.push_str("</svg>\n");
    Ok(s)
}
