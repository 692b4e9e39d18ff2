use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use xtune::data::{dataset_read_csv, dataset_write_csv, engineered_selection_dataset, GridBlock, Generator, MatmulGrid};
use xtune::matrix::{gen_identity_mix, gen_random_scaled, mm_write, CrsMatrix};
use xtune::ozaki::SplitConfig;

fn xtune(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xtune"))
        .args(args)
        .current_dir(dir)
        .env_remove("XTUNE_THREADS")
        .output()
        .expect("binary runs")
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn err_json(out: &Output, code: i32) -> Value {
    assert_eq!(out.status.code(), Some(code), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn tiny_grid(seed: u64) -> MatmulGrid {
    MatmulGrid {
        blocks: vec![GridBlock {
            generator: Generator::IdentityMix,
            sizes: vec![16, 24],
            sparsities: vec![0.5, 0.9],
            phis: vec![],
            b_cols: None,
            b_phi: 8,
        }],
        seed,
        test_fraction: 0.25,
        split: SplitConfig::default(),
    }
}

#[test]
fn gen_from_config_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "experiment": "matmul-select",
        "seed": 11,
        "repeats": 1,
        "warmup": 0,
        "matmul": tiny_grid(3),
    });
    std::fs::write(dir.path().join("run.json"), cfg.to_string()).unwrap();
    let a = ok_json(&xtune(&["--config", "run.json", "gen", "--out", "a.csv"], dir.path()));
    let b = ok_json(&xtune(&["--config", "run.json", "gen", "--out", "b.csv"], dir.path()));
    assert_eq!(a["config_hash"], b["config_hash"]);
    assert_eq!(a["rows"]["total"], 4);
    assert!(dir.path().join("a.manifest.json").exists());
    let da = dataset_read_csv(dir.path().join("a.csv")).unwrap();
    let db = dataset_read_csv(dir.path().join("b.csv")).unwrap();
    for (x, y) in da.rows.iter().zip(&db.rows) {
        assert_eq!((x.seed, x.split), (y.seed, y.split));
        assert_eq!(x.features, y.features);
    }
    // --seed overrides the file value.
    let c = ok_json(&xtune(&["--config", "run.json", "gen", "--out", "c.csv", "--seed", "12"], dir.path()));
    assert_ne!(a["config_hash"], c["config_hash"]);
}

#[test]
fn paper_scale_needs_acknowledgement() {
    let dir = tempfile::tempdir().unwrap();
    let e = err_json(&xtune(&["gen", "--experiment", "piccg", "--scale", "paper"], dir.path()), 2);
    assert!(e["message"].as_str().unwrap().contains("--ack-long-run"));
    assert!(!dir.path().join("piccg-paper.csv").exists());
}

#[test]
fn train_eval_explain_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = engineered_selection_dataset(80, 5).unwrap();
    dataset_write_csv(&d, dir.path().join("sel.csv")).unwrap();
    let t = ok_json(&xtune(
        &["train", "--data", "sel.csv", "--out", "m.json", "--trees", "20", "--all-rows"],
        dir.path(),
    ));
    assert_eq!(t["rows"], 80);
    assert_eq!(t["classes"], json!([1, 4]));

    // Fully grown trees on their own training rows.
    let e = ok_json(&xtune(&["eval", "--model", "m.json", "--data", "sel.csv", "--all-rows"], dir.path()));
    assert_eq!(e["accuracy"], 1.0);
    assert_eq!(e["n"], 80);

    let x = ok_json(&xtune(
        &["explain", "--model", "m.json", "--data", "sel.csv", "--out-dir", "ex", "--target", "4"],
        dir.path(),
    ));
    assert_eq!(x["ranking"][0]["feature"], "sparsity_A");
    for f in ["beeswarm.csv", "beeswarm.svg", "summary.json"] {
        assert!(dir.path().join("ex").join(f).exists(), "{f}");
    }
    let on_disk: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ex/summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk["ranking"], x["ranking"]);

    let bad = err_json(
        &xtune(&["explain", "--model", "m.json", "--data", "sel.csv", "--out-dir", "ex", "--target", "9"], dir.path()),
        2,
    );
    assert!(bad["message"].as_str().unwrap().contains("class 9"));
}

#[test]
fn tune_picks_sparse_scheme_for_sparse_input() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen_identity_mix(64, 0.95, 1).unwrap();
    let b = gen_random_scaled(64, 0.0, 8, 2).unwrap();
    mm_write(dir.path().join("a.mtx"), &CrsMatrix::from_dense(&a, 0.0).unwrap()).unwrap();
    mm_write(dir.path().join("b.mtx"), &CrsMatrix::from_dense(&b, 0.0).unwrap()).unwrap();
    let t = ok_json(&xtune(&["tune", "--a", "a.mtx", "--b", "b.mtx", "--repeats", "1"], dir.path()));
    assert_eq!(t["model"], "demo");
    assert_eq!(t["predicted_dense_scheme"], false, "{t}");
    assert_eq!(t["timings"].as_array().unwrap().len(), 9);
    assert!(t["slowdown"].as_f64().unwrap() >= 1.0);
}

#[test]
fn p3d_then_solve_converges() {
    let dir = tempfile::tempdir().unwrap();
    let p = ok_json(&xtune(&["p3d", "--n", "16", "--out", "p.mtx", "--rhs-out", "b.txt"], dir.path()));
    assert_eq!(p["order"], 4096);
    let s = ok_json(&xtune(
        &["solve", "--matrix", "p.mtx", "--rhs", "b.txt", "--m", "2", "--t", "0.001"],
        dir.path(),
    ));
    assert_eq!(s["converged"], true);
    assert_eq!(s["tol"], 1e-8);
    assert!(s["relative_residual"].as_f64().unwrap() <= 1e-8);

    let f = err_json(
        &xtune(&["solve", "--matrix", "p.mtx", "--max-iter", "2"], dir.path()),
        3,
    );
    assert_eq!(f["kind"], "numerical");
    assert_eq!(f["report"]["converged"], false);
}

#[test]
fn solve_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("asym.mtx"),
        "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 4.0\n1 2 1.0\n2 2 4.0\n",
    )
    .unwrap();
    let e = err_json(&xtune(&["solve", "--matrix", "asym.mtx"], dir.path()), 2);
    assert_eq!(e["kind"], "validation");
    let e = err_json(&xtune(&["solve", "--matrix", "missing.mtx"], dir.path()), 4);
    assert_eq!(e["kind"], "io");
    std::fs::write(dir.path().join("short.txt"), "1\n").unwrap();
    ok_json(&xtune(&["p3d", "--n", "4", "--out", "p.mtx"], dir.path()));
    err_json(&xtune(&["solve", "--matrix", "p.mtx", "--rhs", "short.txt"], dir.path()), 2);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_xtune"))
            .args(["p3d", "--n", "4", "--out", "p.mtx"])
            .current_dir(dir.path())
            .env("XTUNE_THREADS", v)
            .output()
            .unwrap()
    };
    ok_json(&run("2"));
    err_json(&run("0"), 2);
}

#[test]
fn bench_times_requested_variants() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen_random_scaled(24, 0.5, 4, 1).unwrap();
    mm_write(dir.path().join("a.mtx"), &CrsMatrix::from_dense(&a, 0.0).unwrap()).unwrap();
    let b = ok_json(&xtune(
        &["bench", "--a", "a.mtx", "--b", "a.mtx", "--repeats", "1", "--variants", "1,4,7"],
        dir.path(),
    ));
    let ids: Vec<u64> = b["timings"].as_array().unwrap().iter().map(|t| t["variant"].as_u64().unwrap()).collect();
    assert_eq!(ids, [1, 4, 7]);
    let e = err_json(&xtune(&["bench", "--a", "a.mtx", "--b", "a.mtx", "--variants", "12"], dir.path()), 2);
    assert_eq!(e["kind"], "validation");
}
