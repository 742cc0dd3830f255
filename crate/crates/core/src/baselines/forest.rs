use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::Container;
use crate::corpus::{Label, N_CLASSES};
use crate::rng::{derive_seed, RngStream};
use crate::{Error, Result};

pub const FOREST_KIND: &str = "forest";

/// Columns of one flattened node-table row.
const ROW: usize = 4 + N_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means `round(sqrt(d))`, at least 1.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_features: None, bootstrap: true, seed: 0 }
    }
}

/// `feature == None` marks a leaf. Samples with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub counts: [f64; N_CLASSES],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub n_features: usize,
    pub config: ForestConfig,
    pub trees: Vec<DecisionTree>,
}

fn gini(counts: &[f64; N_CLASSES]) -> f64 {
    let n: f64 = counts.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

fn class_counts(y: &[Label], rows: &[usize]) -> [f64; N_CLASSES] {
    let mut c = [0.0; N_CLASSES];
    for &r in rows {
        c[y[r].index()] += 1.0;
    }
    c
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Lowest weighted child Gini over midpoints between consecutive distinct
/// values of `feature`; `None` when the feature is constant on `rows`.
fn best_split_on(x: &[Vec<f64>], y: &[Label], rows: &[usize], feature: usize) -> Option<Split> {
    let mut sorted: Vec<(f64, usize)> = rows.iter().map(|&r| (x[r][feature], y[r].index())).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len() as f64;
    let mut right = [0.0; N_CLASSES];
    for &(_, c) in &sorted {
        right[c] += 1.0;
    }
    let mut left = [0.0; N_CLASSES];
    let mut best: Option<Split> = None;
    for i in 0..sorted.len() - 1 {
        let c = sorted[i].1;
        left[c] += 1.0;
        right[c] -= 1.0;
        let (a, b) = (sorted[i].0, sorted[i + 1].0);
        if a == b {
            continue;
        }
        let nl = (i + 1) as f64;
        let impurity = (nl * gini(&left) + (n - nl) * gini(&right)) / n;
        if best.as_ref().is_none_or(|s| impurity < s.impurity) {
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some(Split { feature, threshold, impurity });
        }
    }
    best
}

impl DecisionTree {
    /// Grows on `rows` (repeats allowed) until nodes are pure or hold fewer
    /// than two samples. At each node features are visited in a random
    /// order; after `max_features` of them the search stops as soon as any
    /// valid split has been found.
    pub fn fit(x: &[Vec<f64>], y: &[Label], rows: Vec<usize>, max_features: usize, rng: &mut RngStream) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let mut nodes = Vec::new();
        let mut stack = vec![(rows, usize::MAX, false)];
        while let Some((rows, parent, is_right)) = stack.pop() {
            let id = nodes.len();
            if parent != usize::MAX {
                let p: &mut Node = &mut nodes[parent];
                if is_right {
                    p.right = id;
                } else {
                    p.left = id;
                }
            }
            let counts = class_counts(y, &rows);
            let mut node = Node { feature: None, threshold: 0.0, left: 0, right: 0, counts };
            let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
            if !pure && rows.len() >= 2 {
                let mut features: Vec<usize> = (0..d).collect();
                rng.shuffle(&mut features);
                let mut best: Option<Split> = None;
                for (visited, &f) in features.iter().enumerate() {
                    if visited >= max_features && best.is_some() {
                        break;
                    }
                    if let Some(s) = best_split_on(x, y, &rows, f) {
                        if best.as_ref().is_none_or(|b| s.impurity < b.impurity) {
                            best = Some(s);
                        }
                    }
                }
                if let Some(s) = best {
                    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][s.feature] <= s.threshold);
                    node.feature = Some(s.feature);
                    node.threshold = s.threshold;
                    // right pushed first so the left subtree is numbered first
                    stack.push((r, id, true));
                    stack.push((l, id, false));
                }
            }
            nodes.push(node);
        }
        Self { nodes }
    }

    pub fn leaf(&self, x: &[f64]) -> &Node {
        let mut n = &self.nodes[0];
        while let Some(f) = n.feature {
            n = &self.nodes[if x[f] <= n.threshold { n.left } else { n.right }];
        }
        n
    }

    pub fn predict_proba(&self, x: &[f64]) -> [f64; N_CLASSES] {
        let c = self.leaf(x).counts;
        let n: f64 = c.iter().sum();
        [c[0] / n, c[1] / n, c[2] / n]
    }

    fn to_table(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nodes.len() * ROW);
        for n in &self.nodes {
            out.push(n.feature.map_or(-1.0, |f| f as f64));
            out.extend([n.threshold, n.left as f64, n.right as f64]);
            out.extend(n.counts);
        }
        out
    }

    fn from_table(table: &[f64], n_features: usize) -> Result<Self> {
        let n = table.len() / ROW;
        let bad = |i: usize, what: &str| Error::Container(format!("node {i}: {what}"));
        let mut nodes = Vec::with_capacity(n);
        for (i, r) in table.chunks_exact(ROW).enumerate() {
            let counts = [r[4], r[5], r[6]];
            if counts.iter().any(|&c| !(c >= 0.0)) || counts.iter().sum::<f64>() <= 0.0 {
                return Err(bad(i, "class counts must be non-negative and non-empty"));
            }
            let feature = if r[0] == -1.0 {
                None
            } else if r[0] >= 0.0 && r[0].fract() == 0.0 && (r[0] as usize) < n_features {
                Some(r[0] as usize)
            } else {
                return Err(bad(i, "feature index out of range"));
            };
            let child = |v: f64| (v.fract() == 0.0 && v > i as f64 && v < n as f64).then_some(v as usize);
            let (left, right) = match feature {
                None => (0, 0),
                Some(_) => match (child(r[2]), child(r[3])) {
                    (Some(l), Some(rr)) => (l, rr),
                    _ => return Err(bad(i, "child index out of range")),
                },
            };
            nodes.push(Node { feature, threshold: r[1], left, right, counts });
        }
        if nodes.is_empty() {
            return Err(Error::Container("empty tree".into()));
        }
        Ok(Self { nodes })
    }
}

fn resolve_max_features(cfg: &ForestConfig, d: usize) -> usize {
    cfg.max_features.unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1))
}

/// Seed of tree `i` of a forest trained with `seed`.
pub(crate) fn tree_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, &[0xf0, i as u64])
}

/// Trees grow in parallel, each from its own derived seed, and are kept
/// in index order.
pub fn rf_train(x: &[Vec<f64>], y: &[Label], cfg: &ForestConfig) -> Result<Forest> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid(format!("forest needs matching non-empty rows and labels ({} vs {})", x.len(), y.len())));
    }
    if cfg.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    let d = x[0].len();
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(Error::Shape(format!("row {i} has width {}, expected {d}", x[i].len())));
    }
    let max_features = resolve_max_features(cfg, d);
    let n = x.len();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::new(tree_seed(cfg.seed, t));
            let rows = if cfg.bootstrap { (0..n).map(|_| rng.below(n)).collect() } else { (0..n).collect() };
            DecisionTree::fit(x, y, rows, max_features, &mut rng)
        })
        .collect();
    Ok(Forest { n_features: d, config: cfg.clone(), trees })
}

impl Forest {
    /// Mean of the per-tree leaf class distributions.
    pub fn predict_proba(&self, x: &[f64]) -> [f64; N_CLASSES] {
        let mut p = [0.0; N_CLASSES];
        for t in &self.trees {
            for (a, b) in p.iter_mut().zip(t.predict_proba(x)) {
                *a += b;
            }
        }
        p.map(|v| v / self.trees.len() as f64)
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        Label::argmax(&self.predict_proba(x))
    }

    pub fn to_container(&self) -> Container {
        let meta = serde_json::json!({ "n_features": self.n_features, "config": self.config });
        let mut c = Container::new(FOREST_KIND, meta);
        for (i, t) in self.trees.iter().enumerate() {
            c.push(format!("tree{i}"), vec![t.nodes.len(), ROW], t.to_table());
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != FOREST_KIND {
            return Err(Error::Container(format!("expected `{FOREST_KIND}`, found `{}`", c.kind)));
        }
        #[derive(Deserialize)]
        struct Meta {
            n_features: usize,
            config: ForestConfig,
        }
        let meta: Meta = serde_json::from_value(c.meta.clone()).map_err(|e| Error::Container(e.to_string()))?;
        let mut trees = Vec::with_capacity(meta.config.n_trees);
        for i in 0..meta.config.n_trees {
            let a = c.array(&format!("tree{i}"))?;
            if a.shape.len() != 2 || a.shape[1] != ROW {
                return Err(Error::Shape(format!("tree{i} has shape {:?}, expected [_, {ROW}]", a.shape)));
            }
            trees.push(DecisionTree::from_table(&a.data, meta.n_features)?);
        }
        Ok(Self { n_features: meta.n_features, config: meta.config, trees })
    }
}
