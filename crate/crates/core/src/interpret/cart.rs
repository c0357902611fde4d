use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        Self {
            max_depth: 4,
            min_leaf: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum CartNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        depth: usize,
        counts: Vec<usize>,
        left: Box<CartNode>,
        right: Box<CartNode>,
    },
    Leaf {
        class: usize,
        depth: usize,
        counts: Vec<usize>,
    },
}

impl CartNode {
    pub fn counts(&self) -> &[usize] {
        match self {
            CartNode::Split { counts, .. } | CartNode::Leaf { counts, .. } => counts,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            CartNode::Split { depth, .. } | CartNode::Leaf { depth, .. } => *depth,
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        match self {
            CartNode::Leaf { class, .. } => *class,
            CartNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    /// Largest node depth in the tree.
    pub fn max_depth(&self) -> usize {
        match self {
            CartNode::Leaf { depth, .. } => *depth,
            CartNode::Split { left, right, .. } => left.max_depth().max(right.max_depth()),
        }
    }

    /// Features used by split nodes at depth `<= max_depth`.
    pub fn features_up_to(&self, max_depth: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_features(max_depth, &mut out);
        out
    }

    fn collect_features(&self, max_depth: usize, out: &mut BTreeSet<usize>) {
        if let CartNode::Split {
            feature,
            depth,
            left,
            right,
            ..
        } = self
        {
            if *depth <= max_depth {
                out.insert(*feature);
                left.collect_features(max_depth, out);
                right.collect_features(max_depth, out);
            }
        }
    }

    /// Indented text rendering using `names` for features.
    pub fn render(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.render_into(names, "", &mut out);
        out
    }

    fn render_into(&self, names: &[String], prefix: &str, out: &mut String) {
        let indent = "  ".repeat(self.depth());
        let n: usize = self.counts().iter().sum();
        match self {
            CartNode::Leaf { class, counts, .. } => {
                let _ = writeln!(
                    out,
                    "{indent}{prefix}cluster {class} (n={n}, counts={counts:?})"
                );
            }
            CartNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let name = names
                    .get(*feature)
                    .map_or_else(|| format!("x{feature}"), Clone::clone);
                let _ = writeln!(out, "{indent}{prefix}{name} <= {threshold:.4} (n={n})");
                left.render_into(names, "yes: ", out);
                right.render_into(names, "no:  ", out);
            }
        }
    }
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Parent impurity minus size-weighted child impurity.
    pub gain: f64,
}

/// Best split of `rows` over midpoints of sorted distinct feature values.
/// Equal gains resolve to the lower feature index, then the lower threshold.
pub fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    rows: &[usize],
    n_classes: usize,
    min_leaf: usize,
) -> Option<SplitChoice> {
    let p = x.first().map_or(0, Vec::len);
    let mut parent = vec![0usize; n_classes];
    for &i in rows {
        parent[y[i]] += 1;
    }
    let parent_gini = gini(&parent);
    let n = rows.len();
    let min_leaf = min_leaf.max(1);
    let mut best: Option<SplitChoice> = None;
    let mut sorted = rows.to_vec();
    #[allow(clippy::needless_range_loop)]
    for f in 0..p {
        sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left = vec![0usize; n_classes];
        for k in 0..n.saturating_sub(1) {
            left[y[sorted[k]]] += 1;
            let (lo, hi) = (x[sorted[k]][f], x[sorted[k + 1]][f]);
            if lo == hi {
                continue;
            }
            let n_left = k + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let right: Vec<usize> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
            let child = (n_left as f64 * gini(&left) + n_right as f64 * gini(&right)) / n as f64;
            let gain = parent_gini - child;
            if best.is_none_or(|b| gain > b.gain + 1e-12) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: 0.5 * (lo + hi),
                    gain,
                });
            }
        }
    }
    best
}

/// Greedy Gini CART. Returns the tree and its accuracy on the training rows.
pub fn fit_cart(x: &[Vec<f64>], y: &[usize], params: &CartParams) -> Result<(CartNode, f64)> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "{} rows for {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Domain("cannot fit a tree on zero rows".into()));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::Shape("rows differ in length".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            name: "tree features".into(),
        });
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let rows: Vec<usize> = (0..x.len()).collect();
    let tree = grow(x, y, &rows, 0, n_classes, params);
    let correct = x
        .iter()
        .zip(y)
        .filter(|(r, &c)| tree.predict(r) == c)
        .count();
    Ok((tree, correct as f64 / x.len() as f64))
}

fn grow(
    x: &[Vec<f64>],
    y: &[usize],
    rows: &[usize],
    depth: usize,
    n_classes: usize,
    params: &CartParams,
) -> CartNode {
    let mut counts = vec![0usize; n_classes];
    for &i in rows {
        counts[y[i]] += 1;
    }
    let leaf = |counts: Vec<usize>| CartNode::Leaf {
        class: majority(&counts),
        depth,
        counts,
    };
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || depth >= params.max_depth || rows.len() < 2 * params.min_leaf.max(1) {
        return leaf(counts);
    }
    let Some(split) = best_split(x, y, rows, n_classes, params.min_leaf) else {
        return leaf(counts);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&i| x[i][split.feature] <= split.threshold);
    CartNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        depth,
        counts,
        left: Box::new(grow(x, y, &l, depth + 1, n_classes, params)),
        right: Box::new(grow(x, y, &r, depth + 1, n_classes, params)),
    }
}
