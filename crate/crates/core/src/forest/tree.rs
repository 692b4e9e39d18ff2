use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Task;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        /// Child taken when `x[feature] <= threshold`.
        left: usize,
        right: usize,
    },
    Leaf {
        /// Mean target (regression) or majority class index (classification).
        value: f64,
        /// Per-class weighted counts; empty for regression.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        counts: Vec<u32>,
    },
}

/// CART tree stored as a flat node array; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_for(&self, x: &[f64]) -> &Node {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                leaf => return leaf,
            }
        }
    }

    pub fn predict_value(&self, x: &[f64]) -> f64 {
        match self.leaf_for(x) {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    /// Features used by any split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Structural check used after deserialization: children in range and
    /// after their parent, features in range, finite thresholds.
    pub(crate) fn check(&self, n_features: usize, n_classes: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= n_features {
                        return Err(format!("node {i}: feature {feature} out of range"));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                    for &c in [left, right] {
                        if c <= i || c >= self.nodes.len() {
                            return Err(format!("node {i}: bad child index {c}"));
                        }
                    }
                }
                Node::Leaf { value, counts } => {
                    if !value.is_finite() {
                        return Err(format!("node {i}: non-finite leaf value"));
                    }
                    if n_classes > 0 && counts.len() != n_classes {
                        return Err(format!("node {i}: histogram has {} classes", counts.len()));
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) struct GrowParams {
    pub task: Task,
    pub n_classes: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
}

/// Training matrix: `x` row-major `n x d`; `y` holds targets or class
/// indices.
pub(crate) struct TrainData<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub d: usize,
}

impl TrainData<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }
}

/// `y0 + sum(y - y0) / n`, exact for constant input.
fn stable_mean(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = vals.clone();
    let Some(y0) = it.next() else { return 0.0 };
    let (mut s, mut n) = (0.0, 0usize);
    for v in vals {
        s += v - y0;
        n += 1;
    }
    y0 + s / n as f64
}

struct Best {
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

pub(crate) fn grow(
    data: &TrainData,
    samples: Vec<usize>,
    p: &GrowParams,
    rng: &mut impl Rng,
) -> DecisionTree {
    let mut tree = DecisionTree { nodes: Vec::new() };
    // canonical order of the node's multiset: arithmetic does not depend
    // on the incoming row order
    let mut samples = samples;
    samples.sort_by(|&a, &b| {
        data.row(a)
            .iter()
            .zip(data.row(b))
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(data.y[a].total_cmp(&data.y[b]))
    });
    build(data, samples, 0, p, rng, &mut tree);
    tree
}

fn leaf(data: &TrainData, s: &[usize], p: &GrowParams) -> Node {
    match p.task {
        Task::Regress => Node::Leaf {
            value: stable_mean(s.iter().map(|&i| data.y[i])),
            counts: Vec::new(),
        },
        Task::Classify => {
            let mut counts = vec![0u32; p.n_classes];
            for &i in s {
                counts[data.y[i] as usize] += 1;
            }
            let mut best = 0;
            for (c, &k) in counts.iter().enumerate() {
                if k > counts[best] {
                    best = c;
                }
            }
            Node::Leaf {
                value: best as f64,
                counts,
            }
        }
    }
}

fn impurity(data: &TrainData, s: &[usize], p: &GrowParams) -> f64 {
    match p.task {
        Task::Regress => {
            let m = stable_mean(s.iter().map(|&i| data.y[i]));
            s.iter().map(|&i| (data.y[i] - m).powi(2)).sum()
        }
        Task::Classify => {
            let mut counts = vec![0f64; p.n_classes];
            for &i in s {
                counts[data.y[i] as usize] += 1.0;
            }
            let n = s.len() as f64;
            n - counts.iter().map(|c| c * c).sum::<f64>() / n
        }
    }
}

fn build(
    data: &TrainData,
    s: Vec<usize>,
    depth: usize,
    p: &GrowParams,
    rng: &mut impl Rng,
    tree: &mut DecisionTree,
) -> usize {
    let id = tree.nodes.len();
    tree.nodes.push(leaf(data, &s, p));
    let parent = impurity(data, &s, p);
    let depth_ok = p.max_depth == 0 || depth < p.max_depth;
    if !depth_ok || s.len() < 2 * p.min_samples_leaf.max(1) || parent <= 0.0 {
        return id;
    }
    let Some(best) = best_split(data, &s, p, parent, rng) else {
        return id;
    };
    let left = build(data, best.left, depth + 1, p, rng, tree);
    let right = build(data, best.right, depth + 1, p, rng, tree);
    tree.nodes[id] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left,
        right,
    };
    id
}

/// Lowest impurity split; ties keep the earlier (lower feature, then lower
/// threshold) candidate.
fn best_split(
    data: &TrainData,
    s: &[usize],
    p: &GrowParams,
    parent: f64,
    rng: &mut impl Rng,
) -> Option<Best> {
    let d = data.d;
    let mut feats: Vec<usize> = if p.features_per_split >= d {
        (0..d).collect()
    } else {
        sample(rng, d, p.features_per_split).into_vec()
    };
    feats.sort_unstable();
    let min_leaf = p.min_samples_leaf.max(1);
    let n = s.len();
    let mut best: Option<(f64, usize, f64, usize)> = None;
    let mut order: Vec<usize> = s.to_vec();
    // centered targets keep the running sums well conditioned
    let mean = stable_mean(s.iter().map(|&i| data.y[i]));
    for &f in &feats {
        order.copy_from_slice(s);
        order.sort_by(|&a, &b| data.x[a * d + f].total_cmp(&data.x[b * d + f]));
        let val = |k: usize| data.x[order[k] * d + f];
        if val(0) == val(n - 1) {
            continue;
        }
        match p.task {
            Task::Regress => {
                let total: f64 = order.iter().map(|&i| data.y[i] - mean).sum();
                let total_sq: f64 = order.iter().map(|&i| (data.y[i] - mean).powi(2)).sum();
                let (mut ls, mut lq) = (0.0, 0.0);
                for k in 0..n - 1 {
                    let yc = data.y[order[k]] - mean;
                    ls += yc;
                    lq += yc * yc;
                    let nl = k + 1;
                    if val(k) == val(k + 1) || nl < min_leaf || n - nl < min_leaf {
                        continue;
                    }
                    let nr = (n - nl) as f64;
                    let rs = total - ls;
                    let rq = total_sq - lq;
                    let score = (lq - ls * ls / nl as f64) + (rq - rs * rs / nr);
                    if best.is_none_or(|b| score < b.0) {
                        best = Some((score, f, 0.5 * (val(k) + val(k + 1)), nl));
                    }
                }
            }
            Task::Classify => {
                let mut lc = vec![0f64; p.n_classes];
                let mut rc = vec![0f64; p.n_classes];
                for &i in &order {
                    rc[data.y[i] as usize] += 1.0;
                }
                let (mut lsq, mut rsq): (f64, f64) = (0.0, rc.iter().map(|c| c * c).sum());
                for k in 0..n - 1 {
                    let c = data.y[order[k]] as usize;
                    lsq += 2.0 * lc[c] + 1.0;
                    rsq -= 2.0 * rc[c] - 1.0;
                    lc[c] += 1.0;
                    rc[c] -= 1.0;
                    let nl = k + 1;
                    if val(k) == val(k + 1) || nl < min_leaf || n - nl < min_leaf {
                        continue;
                    }
                    let nr = (n - nl) as f64;
                    let score = (nl as f64 - lsq / nl as f64) + (nr - rsq / nr);
                    if best.is_none_or(|b| score < b.0) {
                        best = Some((score, f, 0.5 * (val(k) + val(k + 1)), nl));
                    }
                }
            }
        }
    }
    let (score, feature, threshold, _) = best?;
    if !(score < parent * (1.0 - 1e-12)) {
        return None;
    }
    // midpoint of two adjacent doubles can round onto the upper one
    let (left, right): (Vec<usize>, Vec<usize>) = s
        .iter()
        .partition(|&&i| data.x[i * d + feature] <= threshold);
    if left.is_empty() || right.is_empty() {
        return None;
    }
    Some(Best {
        feature,
        threshold,
        left,
        right,
    })
}
