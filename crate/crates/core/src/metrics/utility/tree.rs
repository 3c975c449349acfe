use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::features::Targets;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: None, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// CART with Gini impurity for classes and squared error for values.
/// Leaves hold the majority class (lowest index on ties) or the mean.
#[derive(Debug, Clone)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a Targets,
    config: TreeConfig,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Best {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn class(&self, i: usize) -> usize {
        match self.y {
            Targets::Classes { codes, .. } => codes[i] as usize,
            Targets::Values(_) => unreachable!(),
        }
    }

    fn value(&self, i: usize) -> f64 {
        match self.y {
            Targets::Values(v) => v[i],
            Targets::Classes { .. } => unreachable!(),
        }
    }

    fn leaf_value(&self, rows: &[usize]) -> f64 {
        match self.y {
            Targets::Classes { n_classes, .. } => {
                let mut counts = vec![0usize; *n_classes];
                for &i in rows {
                    counts[self.class(i)] += 1;
                }
                let mut best = 0;
                for (c, &n) in counts.iter().enumerate() {
                    if n > counts[best] {
                        best = c;
                    }
                }
                best as f64
            }
            Targets::Values(_) => rows.iter().map(|&i| self.value(i)).sum::<f64>() / rows.len() as f64,
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        match self.y {
            Targets::Classes { codes, .. } => rows.iter().all(|&i| codes[i] == codes[rows[0]]),
            Targets::Values(v) => rows.iter().all(|&i| v[i] == v[rows[0]]),
        }
    }

    /// Best split by the weighted child impurity proxy (smaller is better).
    fn best_split(&self, rows: &[usize], order: &mut Vec<usize>) -> Option<Best> {
        let n = rows.len();
        let min_leaf = self.config.min_samples_leaf.max(1);
        let mut best: Option<Best> = None;
        for f in 0..self.x.ncols() {
            order.clear();
            order.extend_from_slice(rows);
            order.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]));
            match self.y {
                Targets::Classes { n_classes, .. } => {
                    let mut left = vec![0usize; *n_classes];
                    let mut right = vec![0usize; *n_classes];
                    for &i in order.iter() {
                        right[self.class(i)] += 1;
                    }
                    let (mut sl, mut sr) = (0.0f64, right.iter().map(|&c| (c * c) as f64).sum::<f64>());
                    for pos in 0..n - 1 {
                        let c = self.class(order[pos]);
                        // Σ count² updates in O(1)
                        sl += (2 * left[c] + 1) as f64;
                        sr -= (2 * right[c] - 1) as f64;
                        left[c] += 1;
                        right[c] -= 1;
                        let (nl, nr) = (pos + 1, n - pos - 1);
                        let (a, b) = (self.x[[order[pos], f]], self.x[[order[pos + 1], f]]);
                        if a == b || nl < min_leaf || nr < min_leaf {
                            continue;
                        }
                        // n·weighted Gini = nl - Σl²/nl + nr - Σr²/nr
                        let score = (nl as f64 - sl / nl as f64) + (nr as f64 - sr / nr as f64);
                        if best.is_none_or(|b| score < b.score) {
                            best = Some(Best { feature: f, threshold: midpoint(a, b), score });
                        }
                    }
                }
                Targets::Values(_) => {
                    let total: f64 = order.iter().map(|&i| self.value(i)).sum();
                    let mut sum_l = 0.0;
                    for pos in 0..n - 1 {
                        sum_l += self.value(order[pos]);
                        let (nl, nr) = (pos + 1, n - pos - 1);
                        let (a, b) = (self.x[[order[pos], f]], self.x[[order[pos + 1], f]]);
                        if a == b || nl < min_leaf || nr < min_leaf {
                            continue;
                        }
                        // SSE = Σy² - (Σl)²/nl - (Σr)²/nr; the Σy² term is shared.
                        let sum_r = total - sum_l;
                        let score = -(sum_l * sum_l / nl as f64) - sum_r * sum_r / nr as f64;
                        if best.is_none_or(|b| score < b.score) {
                            best = Some(Best { feature: f, threshold: midpoint(a, b), score });
                        }
                    }
                }
            }
        }
        best
    }

    fn build(&mut self, n: usize) {
        let mut order = Vec::with_capacity(n);
        // (node id, rows, depth); explicit stack because unlimited depth can
        // get arbitrarily deep on peeling splits
        let mut stack = vec![(0usize, (0..n).collect::<Vec<usize>>(), 0usize)];
        self.nodes.push(Node::Leaf(0.0));
        while let Some((id, rows, depth)) = stack.pop() {
            self.nodes[id] = Node::Leaf(self.leaf_value(&rows));
            let depth_ok = self.config.max_depth.is_none_or(|d| depth < d);
            if rows.len() < 2 || !depth_ok || self.is_pure(&rows) {
                continue;
            }
            let Some(best) = self.best_split(&rows, &mut order) else {
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| self.x[[i, best.feature]] <= best.threshold);
            let left = self.nodes.len();
            let right = left + 1;
            self.nodes.push(Node::Leaf(0.0));
            self.nodes.push(Node::Leaf(0.0));
            self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
            stack.push((right, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // guard against rounding up to `b`
    if m >= b { a } else { m }
}

impl DecisionTree {
    pub fn fit(x: ArrayView2<'_, f64>, y: &Targets, config: &TreeConfig) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::shape(x.nrows(), y.len()));
        }
        if x.nrows() == 0 {
            return Err(Error::invalid("decision tree on zero rows"));
        }
        let mut b = Builder { x, y, config: *config, nodes: Vec::new() };
        b.build(x.nrows());
        Ok(DecisionTree { nodes: b.nodes })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    id = if row(feature) <= threshold { left } else { right };
                }
            }
        }
    }

    /// Leaf values: class indices as `f64` for classification trees.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict_row(|f| x[[i, f]])).collect()
    }
}
