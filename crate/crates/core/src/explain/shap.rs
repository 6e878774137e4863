//! Exact path-dependent TreeSHAP for the forest's crash probability.
//!
//! Node covers are counted from a background set rather than taken from the
//! training counts, so the base value is exactly the mean background
//! prediction and attributions sum to the model output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Forest, Node, Tree};
use crate::ingest::LabeledDataset;
use crate::types::DrivingContext;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub base_value: f64,
    pub contributions: Vec<f64>,
    pub model_output: f64,
}

impl ShapExplanation {
    /// `base + Σ φ − output`; zero up to rounding when attributions are exact.
    pub fn residual(&self) -> f64 {
        self.base_value + self.contributions.iter().sum::<f64>() - self.model_output
    }
}

/// Number of background rows reaching each node.
pub fn background_covers(tree: &Tree, rows: &[&[f64]]) -> Vec<f64> {
    let mut cover = vec![0.0; tree.nodes.len()];
    for row in rows {
        let mut i = 0;
        loop {
            cover[i] += 1.0;
            match tree.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[feature] < threshold { left } else { right },
                Node::Leaf { .. } => break,
            }
        }
    }
    cover
}

fn leaf_value(node: &Node) -> f64 {
    match *node {
        Node::Leaf { p_crash, .. } => p_crash,
        Node::Split { .. } => unreachable!("called on a split"),
    }
}

/// Cover-weighted mean of the tree's leaves: its expected output with no
/// features known.
pub fn expected_value(tree: &Tree, cover: &[f64]) -> f64 {
    if cover[0] == 0.0 {
        return 0.0;
    }
    tree.nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| matches!(n, Node::Leaf { .. }))
        .map(|(i, n)| cover[i] / cover[0] * leaf_value(n))
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: isize,
    zero: f64,
    one: f64,
    weight: f64,
}

/// Append an element to the path held in `path[..len]`; returns the new length.
fn extend(path: &mut [PathElement], len: usize, zero: f64, one: f64, feature: isize) -> usize {
    let depth = len;
    path[depth] = PathElement {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let d = depth as f64;
    let (one, zero) = (one / (d + 1.0), zero / (d + 1.0));
    for i in (0..depth).rev() {
        let fi = i as f64;
        let w = path[i].weight;
        path[i + 1].weight += one * w * (fi + 1.0);
        path[i].weight = zero * w * (d - fi);
    }
    len + 1
}

/// Remove element `index` from `path[..len]`; returns the new length.
fn unwind(path: &mut [PathElement], len: usize, index: usize) -> usize {
    let depth = len - 1;
    let d = depth as f64;
    let PathElement { zero, one, .. } = path[index];
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        let fi = i as f64;
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * (d + 1.0) / ((fi + 1.0) * one);
            next = tmp - path[i].weight * zero * (d - fi) / (d + 1.0);
        } else {
            path[i].weight = path[i].weight * (d + 1.0) / (zero * (d - fi));
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    depth
}

/// Per-leaf buffers, reused across the walk.
#[derive(Debug, Default)]
struct Scratch {
    // One entry per element the input follows, stored column-wise so the
    // inner loop of `leaf_contributions` vectorizes.
    feature: Vec<usize>,
    scale: Vec<f64>,
    zero: Vec<f64>,
    inv_one: Vec<f64>,
    next: Vec<f64>,
    total: Vec<f64>,
    cold: Vec<(usize, f64)>,
}

/// Add each path element's share of the leaf value to `phi`.
///
/// An element's share is its total permutation weight with the element
/// unwound from the path. For elements the input follows (`one != 0`) that sum
/// is a serial recurrence, so positions run in the outer loop and elements in
/// the inner one, leaving independent chains for the CPU to overlap. For
/// elements it does not follow (`one == 0`) the sum is the same weighted total
/// for every element, divided by its `zero`, and is computed once.
fn leaf_contributions(path: &[PathElement], value: f64, recip: &[f64], s: &mut Scratch, phi: &mut [f64]) {
    let depth = path.len() - 1;
    let d = depth as f64;
    s.feature.clear();
    s.scale.clear();
    s.zero.clear();
    s.inv_one.clear();
    s.cold.clear();
    let top = path[depth].weight;
    for el in &path[1..] {
        let scale = (el.one - el.zero) * value * (d + 1.0);
        if el.one != 0.0 {
            s.feature.push(el.feature as usize);
            s.scale.push(scale);
            s.zero.push(el.zero);
            s.inv_one.push(1.0 / el.one);
        } else {
            s.cold.push((el.feature as usize, scale / el.zero));
        }
    }
    let n = s.feature.len();
    s.next.clear();
    s.next.resize(n, top);
    s.total.clear();
    s.total.resize(n, 0.0);
    let (zeros, inv_ones) = (&s.zero[..n], &s.inv_one[..n]);
    let (next, total) = (&mut s.next[..n], &mut s.total[..n]);
    for (i, el) in path[..depth].iter().enumerate().rev() {
        let (r, w, k) = (recip[i + 1], el.weight, d - i as f64);
        for j in 0..n {
            let tmp = next[j] * r * inv_ones[j];
            total[j] += tmp;
            next[j] = w - tmp * zeros[j] * k;
        }
    }
    for j in 0..n {
        phi[s.feature[j]] += total[j] * s.scale[j];
    }
    if !s.cold.is_empty() {
        let shared: f64 = path[..depth]
            .iter()
            .enumerate()
            .rev()
            .map(|(i, el)| el.weight * recip[depth - i])
            .sum();
        for &(feature, scale) in &s.cold {
            phi[feature] += shared * scale;
        }
    }
}

const EMPTY: PathElement = PathElement {
    feature: -1,
    zero: 0.0,
    one: 0.0,
    weight: 0.0,
};

/// Recursion state. Each level copies its parent's path into the next
/// segment of `buf`, so one allocation serves the whole walk.
struct Walk<'a> {
    tree: &'a Tree,
    cover: &'a [f64],
    row: &'a [f64],
    phi: &'a mut [f64],
    buf: Vec<PathElement>,
    recip: Vec<f64>,
    scratch: Scratch,
}

impl Walk<'_> {
    fn recurse(&mut self, node: usize, parent: usize, parent_len: usize, zero: f64, one: f64, feature: isize) {
        let seg = parent + parent_len;
        self.buf.copy_within(parent..seg, seg);
        let path = &mut self.buf[seg..];
        // A split that sends every background row the way the input goes is
        // a null player for this path: it changes no other feature's
        // Shapley value and earns zero itself, so it is left off the path.
        let null_player = feature >= 0 && zero == 1.0 && one == 1.0;
        let mut len = if null_player {
            parent_len
        } else {
            extend(path, parent_len, zero, one, feature)
        };
        match self.tree.nodes[node] {
            Node::Leaf { p_crash, .. } => {
                let path = &path[..len];
                leaf_contributions(path, p_crash, &self.recip, &mut self.scratch, self.phi);
            }
            Node::Split {
                feature: split,
                threshold,
                left,
                right,
                ..
            } => {
                let (hot, cold) = if self.row[split] < threshold {
                    (left, right)
                } else {
                    (right, left)
                };
                let w = self.cover[node];
                let frac = |c: usize| if w > 0.0 { self.cover[c] / w } else { 0.0 };
                let (mut in_zero, mut in_one) = (1.0, 1.0);
                if let Some(k) = path[..len].iter().position(|e| e.feature == split as isize) {
                    in_zero = path[k].zero;
                    in_one = path[k].one;
                    len = unwind(path, len, k);
                }
                let hot_zero = frac(hot) * in_zero;
                let cold_zero = frac(cold) * in_zero;
                if hot_zero != 0.0 || in_one != 0.0 {
                    self.recurse(hot, seg, len, hot_zero, in_one, split as isize);
                }
                if cold_zero != 0.0 {
                    self.recurse(cold, seg, len, cold_zero, 0.0, split as isize);
                }
            }
        }
    }
}

impl<'a> Walk<'a> {
    /// Walk state sized for trees up to depth `max_depth`.
    fn new(row: &'a [f64], phi: &'a mut [f64], tree: &'a Tree, cover: &'a [f64], max_depth: usize) -> Self {
        // The path at a node of depth k holds at most k + 1 elements, so the
        // stacked segments fit in (depth + 1) * (depth + 2) / 2 slots.
        let d = max_depth;
        Walk {
            tree,
            cover,
            row,
            phi,
            buf: vec![EMPTY; (d + 1) * (d + 2) / 2],
            recip: (0..d + 2).map(|k| 1.0 / k as f64).collect(),
            scratch: Scratch::default(),
        }
    }

    /// Add this tree's attributions to `phi`.
    fn run(&mut self, tree: &'a Tree, cover: &'a [f64]) {
        if cover[0] > 0.0 {
            self.tree = tree;
            self.cover = cover;
            self.recurse(0, 0, 0, 1.0, 1.0, -1);
        }
    }
}

/// SHAP values of one tree for one row, given node covers.
pub fn tree_shap_single(tree: &Tree, cover: &[f64], row: &[f64], n_features: usize) -> Vec<f64> {
    let mut phi = vec![0.0; n_features];
    Walk::new(row, &mut phi, tree, cover, tree.depth()).run(tree, cover);
    phi
}

/// Forest bound to background covers, ready to explain many contexts.
#[derive(Debug, Clone)]
pub struct ShapExplainer<'a> {
    model: &'a Forest,
    covers: Vec<Vec<f64>>,
    max_depth: usize,
    base_value: f64,
}

impl<'a> ShapExplainer<'a> {
    pub fn new(model: &'a Forest, background: &LabeledDataset) -> Result<Self> {
        if background.is_empty() {
            return Err(Error::Explanation("background set is empty".into()));
        }
        if background.n_features() != model.n_features {
            return Err(Error::Explanation(format!(
                "background has {} features, model expects {}",
                background.n_features(),
                model.n_features
            )));
        }
        let rows: Vec<&[f64]> = background.contexts.iter().map(|c| c.values.as_slice()).collect();
        let covers: Vec<Vec<f64>> = model.trees.par_iter().map(|t| background_covers(t, &rows)).collect();
        let base_value = model
            .trees
            .iter()
            .zip(&covers)
            .map(|(t, c)| expected_value(t, c))
            .sum::<f64>()
            / model.trees.len() as f64;
        let max_depth = model.trees.iter().map(Tree::depth).max().unwrap_or(0);
        Ok(Self {
            model,
            covers,
            max_depth,
            base_value,
        })
    }

    pub fn base_value(&self) -> f64 {
        self.base_value
    }

    pub fn explain_row(&self, row: &[f64]) -> ShapExplanation {
        let n = self.model.n_features;
        let mut phi = vec![0.0; n];
        let (trees, covers) = (&self.model.trees, &self.covers);
        if let (Some(tree), Some(cover)) = (trees.first(), covers.first()) {
            let mut walk = Walk::new(row, &mut phi, tree, cover, self.max_depth);
            for (tree, cover) in trees.iter().zip(covers) {
                walk.run(tree, cover);
            }
        }
        let k = self.model.trees.len() as f64;
        for p in &mut phi {
            *p /= k;
        }
        ShapExplanation {
            base_value: self.base_value,
            contributions: phi,
            model_output: self.model.predict_row(row),
        }
    }

    pub fn explain(&self, context: &DrivingContext) -> Result<ShapExplanation> {
        if *context.schema_id != *self.model.schema_id || context.len() != self.model.n_features {
            return Err(Error::Explanation(format!(
                "context (`{}`, {} values) does not fit model `{}`",
                context.schema_id,
                context.len(),
                self.model.schema_id
            )));
        }
        Ok(self.explain_row(&context.values))
    }

    pub fn explain_batch(&self, contexts: &[DrivingContext]) -> Result<Vec<ShapExplanation>> {
        contexts.par_iter().map(|c| self.explain(c)).collect()
    }
}

pub fn tree_shap(model: &Forest, context: &DrivingContext, background: &LabeledDataset) -> Result<ShapExplanation> {
    ShapExplainer::new(model, background)?.explain(context)
}
