//! CART induction with Gini impurity over axis-aligned thresholds.

use std::collections::BTreeMap;

use crate::catalog::ShapeId;
use crate::dtree::dataset::LabeledDataset;
use crate::dtree::features::{FeatureVector, FEATURE_COUNT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 12,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        label: ShapeId,
        counts: BTreeMap<ShapeId, usize>,
    },
}

impl Node {
    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Node::Leaf { .. } => Ok(()),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= FEATURE_COUNT {
                    return Err(Error::invariant("tree model", format!("feature index {feature}")));
                }
                if !threshold.is_finite() {
                    return Err(Error::invariant("tree model", "non-finite threshold"));
                }
                left.check()?;
                right.check()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    root: Node,
    sample_count: usize,
    depth: usize,
    max_depth: usize,
}

impl TreeModel {
    /// Assembles a model from a (deserialized) root, checking its shape.
    pub fn new(root: Node, sample_count: usize, max_depth: usize) -> Result<Self> {
        root.check()?;
        let depth = root.depth();
        if depth > max_depth {
            return Err(Error::invariant(
                "tree model",
                format!("depth {depth} exceeds max_depth {max_depth}"),
            ));
        }
        Ok(Self {
            root,
            sample_count,
            depth,
            max_depth,
        })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaves()
    }

    pub fn classify(&self, fv: &FeatureVector) -> ShapeId {
        classify_tree(self, fv)
    }
}

/// Descends left while the feature is below the threshold.
pub fn classify_tree(model: &TreeModel, fv: &FeatureVector) -> ShapeId {
    let v = fv.to_array();
    let mut node = &model.root;
    loop {
        match node {
            Node::Leaf { label, .. } => return *label,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => node = if v[*feature] < *threshold { left } else { right },
        }
    }
}

pub fn train_tree(data: &LabeledDataset, config: &TreeConfig) -> Result<TreeModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.min_leaf == 0 {
        return Err(Error::Config("min_leaf must be at least 1".into()));
    }
    let rows: Vec<([f64; FEATURE_COUNT], ShapeId)> = data
        .samples()
        .iter()
        .map(|(fv, id)| (fv.to_array(), *id))
        .collect();
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    let root = grow(&rows, &mut idx, 0, config);
    TreeModel::new(root, rows.len(), config.max_depth)
}

fn class_counts(rows: &[([f64; FEATURE_COUNT], ShapeId)], idx: &[usize]) -> [usize; 12] {
    let mut c = [0usize; 12];
    for &i in idx {
        c[rows[i].1.index()] += 1;
    }
    c
}

fn leaf(counts: &[usize; 12]) -> Node {
    let mut label = ShapeId::A;
    let mut best = 0;
    for id in ShapeId::ALL {
        if counts[id.index()] > best {
            best = counts[id.index()];
            label = id;
        }
    }
    Node::Leaf {
        label,
        counts: ShapeId::ALL
            .iter()
            .filter(|id| counts[id.index()] > 0)
            .map(|&id| (id, counts[id.index()]))
            .collect(),
    }
}

/// Sum of squared class counts over the side size; maximizing the sum over
/// both sides minimizes weighted Gini impurity.
fn purity(counts: &[usize; 12], n: usize) -> f64 {
    let sq: usize = counts.iter().map(|c| c * c).sum();
    sq as f64 / n as f64
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
    // gap between the two values straddling the threshold, over the node's
    // range for that feature; invariant under positive affine rescaling
    gap: f64,
    left_len: usize,
}

const SCORE_EPS: f64 = 1e-9;

fn better(c: &Candidate, best: &Option<Candidate>) -> bool {
    let Some(b) = best else { return true };
    if c.score > b.score + SCORE_EPS {
        return true;
    }
    if c.score < b.score - SCORE_EPS {
        return false;
    }
    c.gap > b.gap * (1.0 + 1e-9)
}

fn best_split(
    rows: &[([f64; FEATURE_COUNT], ShapeId)],
    idx: &mut [usize],
    min_leaf: usize,
) -> Option<Candidate> {
    let n = idx.len();
    let total = class_counts(rows, idx);
    let mut best: Option<Candidate> = None;
    for feature in 0..FEATURE_COUNT {
        idx.sort_by(|&a, &b| rows[a].0[feature].total_cmp(&rows[b].0[feature]));
        let lo = rows[idx[0]].0[feature];
        let hi = rows[idx[n - 1]].0[feature];
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        let mut left = [0usize; 12];
        for pos in 0..n - 1 {
            left[rows[idx[pos]].1.index()] += 1;
            let (a, b) = (rows[idx[pos]].0[feature], rows[idx[pos + 1]].0[feature]);
            let nl = pos + 1;
            if a == b || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let mut right = total;
            for (r, l) in right.iter_mut().zip(&left) {
                *r -= l;
            }
            let mut threshold = a + (b - a) / 2.0;
            if threshold <= a {
                threshold = b;
            }
            let cand = Candidate {
                feature,
                threshold,
                score: purity(&left, nl) + purity(&right, n - nl),
                gap: (b - a) / range,
                left_len: nl,
            };
            if better(&cand, &best) {
                best = Some(cand);
            }
        }
    }
    best
}

fn grow(
    rows: &[([f64; FEATURE_COUNT], ShapeId)],
    idx: &mut [usize],
    depth: usize,
    config: &TreeConfig,
) -> Node {
    let counts = class_counts(rows, idx);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || depth >= config.max_depth || idx.len() < 2 * config.min_leaf {
        return leaf(&counts);
    }
    let Some(split) = best_split(rows, idx, config.min_leaf) else {
        return leaf(&counts);
    };
    idx.sort_by(|&a, &b| rows[a].0[split.feature].total_cmp(&rows[b].0[split.feature]));
    let (l, r) = idx.split_at_mut(split.left_len);
    debug_assert!(l.iter().all(|&i| rows[i].0[split.feature] < split.threshold));
    Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(rows, l, depth + 1, config)),
        right: Box::new(grow(rows, r, depth + 1, config)),
    }
}
