mod common;

use proptest::prelude::*;

use common::shap::{explain, names, oracle_value, permutation_shapley, random_case};
use xtune::data::{engineered_selection_dataset, Dataset, Sample, Split, Task};
use xtune::forest::{train, DecisionTree, Node, RandomForest, TrainConfig, MODEL_FORMAT};
use xtune::shapley::{
    beeswarm_svg, global_summary, global_summary_forest, read_beeswarm_csv, shapley_exact,
    summary_json, value_function, write_beeswarm, write_beeswarm_csv, BackgroundSet,
    BeeswarmFormat, FnModel, ForestScore, ScoreModel, ShapleyError,
};

#[test]
fn subset_form_equals_permutation_form() {
    for seed in 0..12 {
        let d = 3 + (seed as usize % 5);
        let (f, x, bg, _) = random_case(seed, d);
        let (e, m) = explain(&f, &x, &bg);
        let oracle = permutation_shapley(m.as_ref(), &x, &bg.rows);
        for (a, b) in e.phi.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn value_function_matches_composites() {
    let (f, x, bg, _) = random_case(99, 5);
    let (_, m) = explain(&f, &x, &bg);
    for mask in 0..32usize {
        let subset: Vec<usize> = (0..5).filter(|j| mask >> j & 1 == 1).collect();
        let got = value_function(m.as_ref(), &x, &subset, &bg).unwrap();
        assert!((got - oracle_value(m.as_ref(), &x, mask, &bg.rows)).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn efficiency_and_dummy(seed in any::<u64>(), d in 1usize..8) {
        let (f, x, bg, constant) = random_case(seed, d);
        let (e, m) = explain(&f, &x, &bg);
        prop_assert!(e.efficiency_gap() <= 1e-9);
        prop_assert_eq!(e.prediction, m.score(&x));
        for &j in &constant {
            prop_assert_eq!(e.phi[j], 0.0);
        }
    }
}

fn leaf(v: f64) -> Node {
    Node::Leaf {
        value: v,
        counts: vec![],
    }
}

fn split(feature: usize, threshold: f64, left: usize, right: usize) -> Node {
    Node::Split {
        feature,
        threshold,
        left,
        right,
    }
}

fn hand_forest(trees: Vec<DecisionTree>, d: usize) -> RandomForest {
    RandomForest {
        format: MODEL_FORMAT.into(),
        task: Task::Regress,
        feature_names: names(d),
        classes: vec![],
        config: TrainConfig::default(),
        target_min: 0.0,
        target_max: 100.0,
        trees,
    }
}

#[test]
fn mirrored_trees_give_symmetric_attributions() {
    // tree b is tree a with features 0 and 1 exchanged
    let a = DecisionTree {
        nodes: vec![
            split(0, 0.5, 1, 2),
            leaf(1.0),
            split(1, 0.5, 3, 4),
            leaf(3.0),
            leaf(7.0),
        ],
    };
    let b = DecisionTree {
        nodes: vec![
            split(1, 0.5, 1, 2),
            leaf(1.0),
            split(0, 0.5, 3, 4),
            leaf(3.0),
            leaf(7.0),
        ],
    };
    let f = hand_forest(vec![a, b], 3);
    let bg = BackgroundSet::from_rows(
        names(3),
        vec![
            vec![0.0, 0.0, 5.0],
            vec![1.0, 1.0, 2.0],
            vec![0.2, 0.2, 0.0],
        ],
    )
    .unwrap();
    let m = ForestScore::new(&f, None).unwrap();
    for x in [[1.0, 1.0, 0.0], [0.0, 0.0, 3.0], [0.7, 0.7, 9.0]] {
        let e = shapley_exact(&m, &x, &bg).unwrap();
        assert!((e.phi[0] - e.phi[1]).abs() <= 1e-12, "{:?}", e.phi);
        assert_eq!(e.phi[2], 0.0);
    }
}

#[test]
fn attributions_are_linear() {
    let f = hand_forest(
        vec![DecisionTree {
            nodes: vec![
                split(0, 0.5, 1, 2),
                leaf(2.0),
                split(2, 1.5, 3, 4),
                leaf(5.0),
                leaf(11.0),
            ],
        }],
        3,
    );
    let g = hand_forest(
        vec![DecisionTree {
            nodes: vec![
                split(1, 0.0, 1, 2),
                split(0, 2.0, 3, 4),
                leaf(0.5),
                leaf(4.0),
                leaf(6.0),
            ],
        }],
        3,
    );
    let fs = ForestScore::new(&f, None).unwrap();
    let gs = ForestScore::new(&g, None).unwrap();
    let sum = FnModel {
        d: 3,
        f: |x: &[f64]| fs.score(x) + gs.score(x),
    };
    let bg = BackgroundSet::from_rows(
        names(3),
        vec![
            vec![0.0, -1.0, 0.0],
            vec![1.0, 1.0, 2.0],
            vec![3.0, -2.0, 1.0],
            vec![0.4, 0.3, 9.0],
        ],
    )
    .unwrap();
    for x in [[1.0, -0.5, 2.0], [0.0, 0.5, 1.0], [2.5, -3.0, 0.0]] {
        let ef = shapley_exact(&fs, &x, &bg).unwrap();
        let eg = shapley_exact(&gs, &x, &bg).unwrap();
        let eh = shapley_exact(&sum, &x, &bg).unwrap();
        for j in 0..3 {
            assert!((eh.phi[j] - ef.phi[j] - eg.phi[j]).abs() <= 1e-12);
        }
    }
}

#[test]
fn background_is_capped_and_seeded() {
    let d = engineered_selection_dataset(150, 1).unwrap();
    let a = BackgroundSet::from_dataset(&d, 100, 7).unwrap();
    let b = BackgroundSet::from_dataset(&d, 100, 7).unwrap();
    let c = BackgroundSet::from_dataset(&d, 100, 8).unwrap();
    assert_eq!(a.len(), 100);
    assert_eq!(a, b);
    assert_ne!(a.rows, c.rows);
    assert_eq!(BackgroundSet::from_dataset(&d, 500, 7).unwrap().len(), 150);
    assert!(matches!(
        BackgroundSet::from_dataset(&d.filtered(|_| false), 100, 7),
        Err(ShapleyError::EmptyBackground)
    ));
}

fn two_by_three() -> Dataset {
    let mut d = Dataset::new(Task::Regress, vec!["a & b".into(), "c".into()], vec![]);
    for (i, (x, y)) in [(0.0, 1.0), (1.0, 0.0), (2.0, 5.0)].into_iter().enumerate() {
        d.push(Sample {
            seed: i as u64,
            split: Split::Train,
            features: vec![x, y],
            target: 1.0 + x,
            extras: vec![],
        })
        .unwrap();
    }
    d
}

#[test]
fn constant_model_ranks_in_schema_order() {
    let d = two_by_three();
    let bg = BackgroundSet::from_dataset(&d, 100, 0).unwrap();
    let m = FnModel {
        d: 2,
        f: |_: &[f64]| 4.0,
    };
    let g = global_summary(&m, &d, &bg).unwrap();
    assert!(g.points.iter().all(|p| p.phi == 0.0));
    assert_eq!(g.ranking, d.feature_names);
    assert_eq!(g.base_value, 4.0);
}

#[test]
fn beeswarm_exports_are_deterministic() {
    let d = two_by_three();
    let bg = BackgroundSet::from_dataset(&d, 100, 0).unwrap();
    let m = FnModel {
        d: 2,
        f: |x: &[f64]| 3.0 * x[0] - x[1] * x[1],
    };
    let g = global_summary(&m, &d, &bg).unwrap();
    assert_eq!(g.ranking, vec!["c", "a & b"]);
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bee.csv");
    let svg = dir.path().join("bee.svg");
    write_beeswarm(&g, &csv, BeeswarmFormat::Csv).unwrap();
    write_beeswarm(&g, &svg, BeeswarmFormat::Svg).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("feature,value,phi,instance"));
    assert_eq!(text.lines().count(), 7);

    let points = read_beeswarm_csv(&csv).unwrap();
    assert_eq!(points, g.points);
    let rendered = beeswarm_svg(&points, "SHAP value").unwrap();
    assert_eq!(rendered, std::fs::read_to_string(&svg).unwrap());
    let again = dir.path().join("again.csv");
    write_beeswarm_csv(&points, &again).unwrap();
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(&csv).unwrap());

    let doc = roxmltree::Document::parse(&rendered).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let circles = doc
        .descendants()
        .filter(|n| n.has_tag_name("circle"))
        .count();
    assert_eq!(circles, 6);
    assert!(rendered.contains("a &amp; b"));

    let j = summary_json(&g);
    assert_eq!(j["ranking"][0]["feature"], "c");
    assert_eq!(j["background"]["method"], "interventional");
}

#[test]
fn classifier_summary_defaults_to_majority_prediction() {
    let d = engineered_selection_dataset(80, 3).unwrap();
    let f = train(
        &d,
        &TrainConfig {
            n_trees: 15,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let bg = BackgroundSet::from_dataset(&d, 20, 1).unwrap();
    let test = d.subset(Split::Test);
    let g = global_summary_forest(&f, &test, &bg, None).unwrap();
    let mut counts = [0usize; 2];
    for r in &test.rows {
        counts[usize::from(f.predict_raw(&r.features).as_f64() == 4.0)] += 1;
    }
    let want = if counts[1] > counts[0] { 4 } else { 1 };
    assert_eq!(g.target_output, Some(want));
    assert!(matches!(
        global_summary_forest(&f, &test, &bg, Some(7)),
        Err(ShapleyError::Target(_))
    ));
}
