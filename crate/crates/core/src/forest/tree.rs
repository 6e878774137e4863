//! CART classification tree grown by weighted Gini minimization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Class counts indexed `[safe, crash]`. Under bootstrap these are weighted by
/// sample multiplicity and stay integral.
pub type ClassCounts = [u64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `value < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: ClassCounts,
    },
    Leaf {
        counts: ClassCounts,
        p_crash: f64,
    },
}

impl Node {
    pub fn counts(&self) -> ClassCounts {
        match *self {
            Node::Split { counts, .. } | Node::Leaf { counts, .. } => counts,
        }
    }

    fn leaf(counts: ClassCounts) -> Self {
        let total = counts[0] + counts[1];
        let p_crash = if total == 0 {
            0.0
        } else {
            counts[1] as f64 / total as f64
        };
        Node::Leaf { counts, p_crash }
    }
}

/// Flat node arena; index 0 is the root and children always follow parents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// A one-leaf tree with a fixed crash probability.
    pub fn constant(p_crash: f64, counts: ClassCounts) -> Self {
        Tree {
            nodes: vec![Node::Leaf { counts, p_crash }],
        }
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[feature] < threshold { left } else { right },
                Node::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { p_crash, .. } => p_crash,
            Node::Split { .. } => unreachable!("leaf_index stops at a leaf"),
        }
    }

    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = *n {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
                max = max.max(depth[i] + 1);
            }
        }
        max
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Check structural invariants; returns a description of the first
    /// problem found.
    pub fn check(&self, n_features: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            match *n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if feature >= n_features {
                        return Err(format!("node {i}: feature {feature} out of range"));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                    for c in [left, right] {
                        if c <= i || c >= self.nodes.len() {
                            return Err(format!("node {i}: child index {c} invalid"));
                        }
                        parents[c] += 1;
                    }
                }
                Node::Leaf { p_crash, .. } => {
                    if !(0.0..=1.0).contains(&p_crash) {
                        return Err(format!("node {i}: leaf probability {p_crash} outside [0, 1]"));
                    }
                }
            }
        }
        if let Some(i) = (1..self.nodes.len()).find(|&i| parents[i] != 1) {
            return Err(format!("node {i}: has {} parents", parents[i]));
        }
        Ok(())
    }
}

pub fn gini(counts: ClassCounts) -> f64 {
    let total = (counts[0] + counts[1]) as f64;
    if total == 0.0 {
        return 0.0;
    }
    let p = counts[1] as f64 / total;
    2.0 * p * (1.0 - p)
}

/// Weighted Gini of a two-way partition.
pub fn split_impurity(left: ClassCounts, right: ClassCounts) -> f64 {
    let nl = (left[0] + left[1]) as f64;
    let nr = (right[0] + right[1]) as f64;
    (nl * gini(left) + nr * gini(right)) / (nl + nr)
}

/// Column-major feature matrix with 0/1 labels.
#[derive(Debug, Clone)]
pub struct TrainingMatrix {
    pub n_rows: usize,
    pub n_features: usize,
    pub columns: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl TrainingMatrix {
    pub fn from_rows(rows: &[&[f64]], labels: Vec<u8>) -> Self {
        let n_features = rows.first().map_or(0, |r| r.len());
        let columns = (0..n_features)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        Self {
            n_rows: rows.len(),
            n_features,
            columns,
            labels,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: u64,
    pub features_per_split: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub impurity: f64,
}

/// Strict lexicographic preference on (impurity, feature, threshold).
fn better(a: &SplitChoice, b: &SplitChoice) -> bool {
    (a.impurity, a.feature, a.threshold)
        .partial_cmp(&(b.impurity, b.feature, b.threshold))
        .is_some_and(|o| o.is_lt())
}

/// Best threshold on one feature for the given weighted samples. `None` when
/// the feature is constant here or no threshold satisfies the leaf minimum.
/// The second value reports whether the feature was constant.
pub fn best_threshold(
    values: &mut [(f64, u32, u8)],
    feature: usize,
    total: ClassCounts,
    min_leaf: u64,
) -> (Option<SplitChoice>, bool) {
    values.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    if values.first().map(|v| v.0) == values.last().map(|v| v.0) {
        return (None, true);
    }
    let mut left: ClassCounts = [0, 0];
    let mut best: Option<SplitChoice> = None;
    for k in 0..values.len() - 1 {
        let (v, w, y) = values[k];
        left[y as usize] += w as u64;
        let next = values[k + 1].0;
        if next == v {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        if left[0] + left[1] < min_leaf || right[0] + right[1] < min_leaf {
            continue;
        }
        let mut threshold = v + (next - v) / 2.0;
        if threshold <= v {
            threshold = next;
        }
        let cand = SplitChoice {
            feature,
            threshold,
            impurity: split_impurity(left, right),
        };
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    (best, false)
}

/// Grow one tree on weighted rows. `weights[i]` is the multiplicity of row i
/// (0 excludes it). Features are drawn in random order until
/// `features_per_split` non-constant ones have been examined.
pub fn grow(data: &TrainingMatrix, weights: &[u32], params: GrowParams, rng: &mut ChaCha8Rng) -> Tree {
    let mut samples: Vec<u32> = (0..data.n_rows as u32).filter(|&i| weights[i as usize] > 0).collect();
    let count = |idx: &[u32]| -> ClassCounts {
        let mut c = [0u64; 2];
        for &i in idx {
            c[data.labels[i as usize] as usize] += weights[i as usize] as u64;
        }
        c
    };

    let mut nodes = vec![Node::leaf(count(&samples))];
    // (node index, sample range, depth)
    let mut stack = vec![(0usize, 0usize, samples.len(), 0usize)];
    let mut buf: Vec<(f64, u32, u8)> = Vec::with_capacity(samples.len());
    let mut order: Vec<usize> = (0..data.n_features).collect();

    while let Some((node, start, end, depth)) = stack.pop() {
        let counts = nodes[node].counts();
        let total = counts[0] + counts[1];
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || total < 2 * params.min_samples_leaf || params.max_depth.is_some_and(|d| depth >= d) {
            continue;
        }

        let mut best: Option<SplitChoice> = None;
        let mut examined = 0;
        for drawn in 0..order.len() {
            if examined >= params.features_per_split {
                break;
            }
            let pick = rng.gen_range(drawn..order.len());
            order.swap(drawn, pick);
            let f = order[drawn];
            buf.clear();
            buf.extend(samples[start..end].iter().map(|&i| {
                (data.columns[f][i as usize], weights[i as usize], data.labels[i as usize])
            }));
            let (choice, constant) = best_threshold(&mut buf, f, counts, params.min_samples_leaf);
            if constant {
                continue;
            }
            examined += 1;
            if let Some(c) = choice {
                if best.as_ref().is_none_or(|b| better(&c, b)) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else { continue };

        // Partition the node's sample range in place.
        let col = &data.columns[split.feature];
        let range = &mut samples[start..end];
        let mut mid = 0;
        for k in 0..range.len() {
            if col[range[k] as usize] < split.threshold {
                range.swap(mid, k);
                mid += 1;
            }
        }
        let mid = start + mid;
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::leaf(count(&samples[start..mid])));
        nodes.push(Node::leaf(count(&samples[mid..end])));
        nodes[node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            counts,
        };
        stack.push((right, mid, end, depth + 1));
        stack.push((left, start, mid, depth + 1));
    }
    Tree { nodes }
}
