use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use xtune::data::{
    build_blockwidth_dataset, build_matmul_dataset, build_piccg_dataset, converged_rows, dataset_read_csv,
    dataset_write_csv, engineered_selection_dataset, extract_matmul_features, manifest_path_for, one_hot_encode,
    benchmark_variants, BenchmarkConfig, BlockwidthGrid, Dataset, Manifest, MatmulGrid, PiccgSweep, Split,
    MATMUL_FEATURES,
};
use xtune::forest::{evaluate, model_load, model_save, train, RandomForest, TrainConfig};
use xtune::kernels::VariantId;
use xtune::matrix::{mm_read, mm_write_symmetric, DenseMatrix};
use xtune::ozaki::SplitConfig;
use xtune::piccg::{default_layer, p3d_generate, piccg_solve, IcParams, PiccgError};
use xtune::shapley::{global_summary_forest, summary_json, write_beeswarm, BackgroundSet, BeeswarmFormat};

use crate::config::{Experiment, RunConfig, Scale};
use crate::error::{CliError, Kind};
use crate::{BenchArgs, Cli, Command, EvalArgs, ExplainArgs, GenArgs, P3dArgs, SolveArgs, TrainArgs, TuneArgs};

pub fn run(cli: Cli) -> Result<Value, CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(CliError::validation("thread count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Gen(a) => gen(a, cfg),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Tune(a) => tune(a),
        Command::Solve(a) => solve(a),
        Command::P3d(a) => p3d(a),
        Command::Bench(a) => bench(a),
    }
}

fn name_of(e: Experiment) -> &'static str {
    match e {
        Experiment::MatmulSelect => "matmul-select",
        Experiment::Blockwidth => "blockwidth",
        Experiment::Piccg => "piccg",
    }
}

fn gen(a: GenArgs, cfg: RunConfig) -> Result<Value, CliError> {
    let experiment = a
        .experiment
        .or(cfg.experiment)
        .ok_or_else(|| CliError::validation("--experiment is required (matmul-select, blockwidth or piccg)"))?;
    let scale = a.scale.or(cfg.scale).unwrap_or(Scale::Desk);
    if scale == Scale::Paper && !(a.ack_long_run || cfg.ack_long_run) {
        return Err(CliError::validation(
            "paper-scale grids take hours to days on one node; rerun with --ack-long-run to proceed, \
             or use --scale desk",
        ));
    }
    let paper = scale == Scale::Paper;
    let seed = a.seed.or(cfg.seed);
    let repeats = a.repeats.or(cfg.repeats);
    let warmup = a.warmup.or(cfg.warmup);
    let out = a
        .out
        .or(cfg.out)
        .unwrap_or_else(|| PathBuf::from(format!("{}-{}.csv", name_of(experiment), if paper { "paper" } else { "desk" })));

    let (d, manifest) = match experiment {
        Experiment::MatmulSelect => {
            let mut grid = cfg.matmul.unwrap_or_else(|| if paper { MatmulGrid::paper() } else { MatmulGrid::desk() });
            let mut bench = cfg.bench.unwrap_or_default();
            if let Some(s) = seed {
                grid.seed = s;
            }
            if let Some(r) = repeats {
                bench.repeats = r;
            }
            if let Some(w) = warmup {
                bench.warmup = w;
            }
            build_matmul_dataset(&grid, &bench)?
        }
        Experiment::Blockwidth => {
            let mut grid =
                cfg.blockwidth.unwrap_or_else(|| if paper { BlockwidthGrid::paper() } else { BlockwidthGrid::desk() });
            if let Some(s) = seed {
                grid.seed = s;
            }
            if let Some(r) = repeats {
                grid.repeats = r;
            }
            if let Some(w) = warmup {
                grid.warmup = w;
            }
            build_blockwidth_dataset(&grid)?
        }
        Experiment::Piccg => {
            let mut sweep = cfg.piccg.unwrap_or_else(|| if paper { PiccgSweep::paper() } else { PiccgSweep::desk() });
            if let Some(s) = seed {
                sweep.seed = s;
            }
            if let Some(r) = repeats {
                sweep.repeats = r;
            }
            if let Some(w) = warmup {
                sweep.warmup = w;
            }
            build_piccg_dataset(&sweep)?
        }
    };
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    dataset_write_csv(&d, &out)?;
    let mpath = manifest_path_for(&out);
    let counts = Manifest::counts_of(&d);
    let manifest = Manifest { rows: counts, ..manifest };
    manifest.save(&mpath)?;
    Ok(json!({
        "experiment": name_of(experiment),
        "scale": if paper { "paper" } else { "desk" },
        "dataset": out,
        "manifest": mpath,
        "config_hash": manifest.config_hash,
        "rows": manifest.rows,
        "warnings": manifest.warnings,
    }))
}

/// Reads a dataset and drops unconverged solver rows when the dataset
/// records convergence.
fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    if !path.exists() {
        return Err(CliError::io(path, "no such file"));
    }
    let d = dataset_read_csv(path)?;
    if d.extra_names.iter().any(|n| n == "converged") {
        Ok(converged_rows(&d)?)
    } else {
        Ok(d)
    }
}

fn load_model(path: &Path) -> Result<RandomForest, CliError> {
    if !path.exists() {
        return Err(CliError::io(path, "no such file"));
    }
    Ok(model_load(path)?)
}

/// Applies the one-hot encodings the model was trained with: any dataset
/// column missing from the model schema is encoded.
fn align(d: Dataset, f: &RandomForest) -> Result<Dataset, CliError> {
    let mut d = d;
    let missing: Vec<String> = d
        .feature_names
        .iter()
        .filter(|n| !f.feature_names.contains(n))
        .cloned()
        .collect();
    for c in missing {
        d = one_hot_encode(&d, &c)?.0;
    }
    if d.feature_names != f.feature_names || d.task != f.task {
        return Err(CliError::validation(format!(
            "model expects {:?} features {:?}; dataset provides {:?} features {:?}",
            f.task, f.feature_names, d.task, d.feature_names
        )));
    }
    Ok(d)
}

fn split_or_all(d: &Dataset, split: Split, all: bool) -> Result<Dataset, CliError> {
    let out = if all { d.clone() } else { d.subset(split) };
    if out.is_empty() {
        return Err(CliError::validation(format!(
            "dataset has no {} rows; pass --all-rows to use every row",
            split.as_str()
        )));
    }
    Ok(out)
}

fn cmd_train(a: TrainArgs) -> Result<Value, CliError> {
    let mut d = load_dataset(&a.data)?;
    if let Some(c) = &a.one_hot {
        d = one_hot_encode(&d, c)?.0;
    }
    let rows = split_or_all(&d, Split::Train, a.all_rows)?;
    let cfg = TrainConfig {
        n_trees: a.trees,
        max_depth: a.max_depth,
        min_samples_leaf: a.min_samples_leaf,
        features_per_split: a.mtry,
        bootstrap: true,
        seed: a.seed,
    };
    let f = train(&rows, &cfg)?;
    model_save(&f, &a.out)?;
    Ok(json!({
        "model": a.out,
        "task": f.task,
        "trees": f.trees.len(),
        "features": f.feature_names,
        "classes": f.classes,
        "rows": rows.len(),
    }))
}

fn cmd_eval(a: EvalArgs) -> Result<Value, CliError> {
    let f = load_model(&a.model)?;
    let d = align(load_dataset(&a.data)?, &f)?;
    let rows = split_or_all(&d, Split::Test, a.all_rows)?;
    Ok(serde_json::to_value(evaluate(&f, &rows)?)?)
}

fn cmd_explain(a: ExplainArgs) -> Result<Value, CliError> {
    let f = load_model(&a.model)?;
    let d = align(load_dataset(&a.data)?, &f)?;
    let rows = split_or_all(&d, Split::Test, a.all_rows)?;
    let train_rows = d.subset(Split::Train);
    let bg_source = if train_rows.is_empty() { &d } else { &train_rows };
    let bg = BackgroundSet::from_dataset(bg_source, a.background_cap, a.seed)?;
    let g = global_summary_forest(&f, &rows, &bg, a.target)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let csv = a.out_dir.join("beeswarm.csv");
    let svg = a.out_dir.join("beeswarm.svg");
    let summary = a.out_dir.join("summary.json");
    write_beeswarm(&g, &csv, BeeswarmFormat::Csv)?;
    write_beeswarm(&g, &svg, BeeswarmFormat::Svg)?;
    let mut s = summary_json(&g);
    let text = serde_json::to_string_pretty(&s)? + "\n";
    std::fs::write(&summary, text).map_err(|e| CliError::io(&summary, e))?;
    s["files"] = json!({ "beeswarm_csv": csv, "beeswarm_svg": svg, "summary": summary });
    Ok(s)
}

fn read_dense(path: &Path) -> Result<DenseMatrix, CliError> {
    if !path.exists() {
        return Err(CliError::io(path, "no such file"));
    }
    Ok(mm_read(path)?.to_dense())
}

/// Selection model trained on rule-labelled data (dense GEMM below 50 %
/// sparsity of A, CRS SpMM above), used when `tune` gets no model.
pub fn demo_model() -> Result<RandomForest, CliError> {
    let d = engineered_selection_dataset(200, 7)?;
    Ok(train(
        &d,
        &TrainConfig {
            n_trees: 50,
            seed: 7,
            ..TrainConfig::default()
        },
    )?)
}

fn tune(a: TuneArgs) -> Result<Value, CliError> {
    let (am, bm) = (read_dense(&a.a)?, read_dense(&a.b)?);
    let (f, source) = match &a.model {
        Some(p) => (load_model(p)?, json!(p)),
        None => (demo_model()?, json!("demo")),
    };
    if f.feature_names != MATMUL_FEATURES.map(String::from) {
        return Err(CliError::validation(format!(
            "model features {:?} are not the selection features {:?}",
            f.feature_names, MATMUL_FEATURES
        )));
    }
    let split = SplitConfig::default();
    let fv = extract_matmul_features(&am, &bm, &split)?;
    let predicted = VariantId::new(f.predict(&fv.values)?.as_f64() as u8)?;
    let cfg = BenchmarkConfig {
        repeats: a.repeats,
        ..BenchmarkConfig::default()
    };
    let out = benchmark_variants(&am, &bm, &cfg, &split)?;
    let time_of = |v: VariantId| {
        out.timings
            .iter()
            .find(|t| t.variant == v)
            .map(|t| t.median_seconds)
            .expect("every executable variant timed")
    };
    let (tp, tb) = (time_of(predicted), time_of(out.best));
    let features: serde_json::Map<String, Value> = fv.names.iter().cloned().zip(fv.values.iter().map(|&v| json!(v))).collect();
    Ok(json!({
        "model": source,
        "features": features,
        "predicted_variant": predicted.get(),
        "predicted_label": predicted.info().label,
        "predicted_dense_scheme": predicted.is_dense_scheme(),
        "fastest_variant": out.best.get(),
        "predicted_is_fastest": predicted == out.best,
        "predicted_seconds": tp,
        "fastest_seconds": tb,
        "slowdown": tp / tb,
        "timings": out.timings.iter().map(|t| json!({"variant": t.variant.get(), "median_seconds": t.median_seconds})).collect::<Vec<_>>(),
    }))
}

fn read_rhs(path: &Path, n: usize) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut b = Vec::with_capacity(n);
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        b.push(
            t.parse::<f64>()
                .map_err(|e| CliError::validation(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    if b.len() != n {
        return Err(CliError::validation(format!("right-hand side has {} values, matrix order is {n}", b.len())));
    }
    Ok(b)
}

fn solve(a: SolveArgs) -> Result<Value, CliError> {
    if !a.matrix.exists() {
        return Err(CliError::io(&a.matrix, "no such file"));
    }
    let m = mm_read(&a.matrix)?;
    let b = match &a.rhs {
        Some(p) => read_rhs(p, m.rows())?,
        None => vec![1.0; m.rows()],
    };
    let params = if a.complete {
        IcParams {
            max_fill_level: None,
            threshold: a.t,
        }
    } else {
        IcParams::new(a.m, a.t)
    };
    match piccg_solve(&m, &b, &params, a.tol, a.max_iter) {
        Ok((_, report)) => {
            let v = serde_json::to_value(&report)?;
            if report.converged {
                Ok(v)
            } else {
                Err(CliError {
                    kind: Kind::Numerical,
                    message: format!("no convergence to {} within {} iterations", a.tol, a.max_iter),
                    report: Some(v),
                })
            }
        }
        Err(e @ PiccgError::Breakdown { row, shift }) => Err(CliError {
            kind: Kind::Numerical,
            message: e.to_string(),
            report: Some(json!({ "converged": false, "tol": a.tol, "breakdown_row": row, "shift_used": shift })),
        }),
        Err(e) => Err(e.into()),
    }
}

fn p3d(a: P3dArgs) -> Result<Value, CliError> {
    let layer = default_layer(a.n);
    let p = p3d_generate(a.n, a.lambda1, a.lambda2, layer.clone())?;
    mm_write_symmetric(&a.out, &p.a)?;
    if let Some(path) = &a.rhs_out {
        let text: String = p.b.iter().map(|v| format!("{v}\n")).collect();
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    }
    Ok(json!({
        "matrix": a.out,
        "rhs": a.rhs_out,
        "order": p.order(),
        "nnz": p.a.nnz(),
        "lambda1": a.lambda1,
        "lambda2": a.lambda2,
        "layer": [layer.start, layer.end],
    }))
}

fn bench(a: BenchArgs) -> Result<Value, CliError> {
    let (am, bm) = (read_dense(&a.a)?, read_dense(&a.b)?);
    let variants = if a.variants.is_empty() {
        VariantId::executable().collect()
    } else {
        a.variants.iter().map(|&v| VariantId::new(v)).collect::<Result<_, _>>()?
    };
    let cfg = BenchmarkConfig {
        repeats: a.repeats,
        warmup: a.warmup,
        threads: 1,
        variants,
        block_width: a.block_width,
    };
    let out = benchmark_variants(&am, &bm, &cfg, &SplitConfig::default())?;
    Ok(json!({
        "best": out.best.get(),
        "block_width": out.block_width,
        "timings": out.timings,
    }))
}
