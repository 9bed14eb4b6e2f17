//! Depth-2 decision trees grown greedily on weighted Gini impurity.
//!
//! A split sends `x[feature] < threshold` left. Candidate thresholds are the
//! midpoints between consecutive distinct values of a feature within the
//! node. Among equally good splits the lowest feature index wins, then the
//! lowest threshold. Leaves take the weighted majority label, `+1` on ties.

use super::{check_dims, BoostError, Label, Sample};

/// Impurity differences below this are treated as ties.
const TIE_EPS: f64 = 1e-12;

/// Maximum number of split levels.
pub const MAX_DEPTH: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf(Label),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> Label {
        let mut node = self;
        loop {
            match node {
                Node::Leaf(label) => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] < *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        match self {
            Node::Leaf(_) => None,
            Node::Split {
                feature,
                left,
                right,
                ..
            } => Some(
                (*feature)
                    .max(left.max_feature().unwrap_or(0))
                    .max(right.max_feature().unwrap_or(0)),
            ),
        }
    }

    fn negated(&self) -> Node {
        match self {
            Node::Leaf(l) => Node::Leaf(l.flipped()),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => Node::Split {
                feature: *feature,
                threshold: *threshold,
                left: Box::new(left.negated()),
                right: Box::new(right.negated()),
            },
        }
    }
}

/// Binary tree with at most two split levels (four leaves).
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    root: Node,
}

impl DecisionTree {
    /// `None` if the tree is deeper than two split levels.
    pub fn new(root: Node) -> Option<DecisionTree> {
        (root.depth() <= MAX_DEPTH).then_some(DecisionTree { root })
    }

    pub fn leaf(label: Label) -> DecisionTree {
        DecisionTree {
            root: Node::Leaf(label),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        self.root.predict(x)
    }

    /// Same structure with every leaf label flipped.
    pub fn negated(&self) -> DecisionTree {
        DecisionTree {
            root: self.root.negated(),
        }
    }
}

/// Sum of the weights of misclassified samples.
pub fn weighted_error<S: Sample>(tree: &DecisionTree, samples: &[S], weights: &[f64]) -> f64 {
    samples
        .iter()
        .zip(weights)
        .filter(|(s, _)| tree.predict(s.values()) != s.label())
        .map(|(_, &w)| w)
        .sum()
}

/// Trains one tree on explicit per-sample weights.
pub fn train_tree<S: Sample>(samples: &[S], weights: &[f64]) -> Result<DecisionTree, BoostError> {
    let store = ColumnStore::new(samples)?;
    if weights.len() != samples.len() {
        return Err(BoostError::WeightCount {
            expected: samples.len(),
            found: weights.len(),
        });
    }
    Ok(store.train_tree(weights))
}

/// Column-major copy of a training set with every column pre-sorted, so each
/// boosting round can grow a tree with linear sweeps.
pub struct ColumnStore {
    n: usize,
    dim: usize,
    columns: Vec<f64>,
    order: Vec<u32>,
    labels: Vec<Label>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Mass {
    pos: f64,
    neg: f64,
}

impl Mass {
    fn add(&mut self, label: Label, w: f64) {
        match label {
            Label::Positive => self.pos += w,
            Label::Negative => self.neg += w,
        }
    }

    fn gini(self) -> f64 {
        let total = self.pos + self.neg;
        if total <= 0.0 {
            0.0
        } else {
            total - (self.pos * self.pos + self.neg * self.neg) / total
        }
    }

    fn is_pure(self) -> bool {
        self.pos <= 0.0 || self.neg <= 0.0
    }

    fn majority(self) -> Label {
        Label::from_positive(self.pos >= self.neg)
    }
}

const NO_NODE: u8 = u8::MAX;

impl ColumnStore {
    pub fn new<S: Sample>(samples: &[S]) -> Result<ColumnStore, BoostError> {
        let dim = check_dims(samples)?;
        let n = samples.len();
        assert!(n <= u32::MAX as usize, "too many samples");
        let mut columns = vec![0.0; dim * n];
        for (i, s) in samples.iter().enumerate() {
            for (f, &v) in s.values().iter().enumerate() {
                columns[f * n + i] = v;
            }
        }
        let mut order = Vec::with_capacity(dim * n);
        let mut idx: Vec<u32> = (0..n as u32).collect();
        for f in 0..dim {
            let col = &columns[f * n..(f + 1) * n];
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            order.extend_from_slice(&idx);
        }
        Ok(ColumnStore {
            n,
            dim,
            columns,
            order,
            labels: samples.iter().map(|s| s.label()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    fn value(&self, i: usize, feature: usize) -> f64 {
        self.columns[feature * self.n + i]
    }

    pub fn predict(&self, tree: &DecisionTree, i: usize) -> Label {
        let mut node = &tree.root;
        loop {
            match node {
                Node::Leaf(label) => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if self.value(i, *feature) < *threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn weighted_error(&self, tree: &DecisionTree, weights: &[f64]) -> f64 {
        (0..self.n)
            .filter(|&i| self.predict(tree, i) != self.labels[i])
            .map(|i| weights[i])
            .sum()
    }

    pub fn train_tree(&self, weights: &[f64]) -> DecisionTree {
        assert_eq!(weights.len(), self.n);
        let mut root_mass = Mass::default();
        for (i, &w) in weights.iter().enumerate() {
            root_mass.add(self.labels[i], w);
        }
        let mut node_of = vec![0u8; self.n];
        let root_split = if root_mass.is_pure() {
            None
        } else {
            self.best_splits(weights, &node_of, &[root_mass])[0]
        };
        let Some(root) = root_split else {
            return DecisionTree::leaf(root_mass.majority());
        };

        let mut child_mass = [Mass::default(); 2];
        for i in 0..self.n {
            let side = usize::from(self.value(i, root.feature) >= root.threshold);
            node_of[i] = side as u8;
            child_mass[side].add(self.labels[i], weights[i]);
        }
        // Pure children are excluded from the search.
        for (side, mass) in child_mass.iter().enumerate() {
            if mass.is_pure() {
                for slot in node_of.iter_mut().filter(|s| **s == side as u8) {
                    *slot = NO_NODE;
                }
            }
        }
        let child_splits = self.best_splits(weights, &node_of, &child_mass);

        let children: Vec<Node> = (0..2)
            .map(|side| match child_splits[side] {
                Some(split) if !child_mass[side].is_pure() => {
                    let mut masses = [Mass::default(); 2];
                    let in_child = |i: usize| {
                        let goes_right = self.value(i, root.feature) >= root.threshold;
                        usize::from(goes_right) == side
                    };
                    for i in 0..self.n {
                        if in_child(i) {
                            let s = usize::from(self.value(i, split.feature) >= split.threshold);
                            masses[s].add(self.labels[i], weights[i]);
                        }
                    }
                    Node::Split {
                        feature: split.feature,
                        threshold: split.threshold,
                        left: Box::new(Node::Leaf(masses[0].majority())),
                        right: Box::new(Node::Leaf(masses[1].majority())),
                    }
                }
                _ => Node::Leaf(child_mass[side].majority()),
            })
            .collect();
        let [left, right]: [Node; 2] = children.try_into().expect("two children");
        DecisionTree {
            root: Node::Split {
                feature: root.feature,
                threshold: root.threshold,
                left: Box::new(left),
                right: Box::new(right),
            },
        }
    }

    /// Best split for every node id in `0..totals.len()`, in one sweep per
    /// feature over the pre-sorted order.
    fn best_splits(&self, weights: &[f64], node_of: &[u8], totals: &[Mass]) -> Vec<Option<Candidate>> {
        let nodes = totals.len();
        let mut best: Vec<Option<Candidate>> = vec![None; nodes];
        let mut left = vec![Mass::default(); nodes];
        let mut last: Vec<Option<f64>> = vec![None; nodes];
        for f in 0..self.dim {
            left.fill(Mass::default());
            last.fill(None);
            let col = &self.columns[f * self.n..(f + 1) * self.n];
            for &i in &self.order[f * self.n..(f + 1) * self.n] {
                let i = i as usize;
                let node = node_of[i];
                if node == NO_NODE {
                    continue;
                }
                let node = node as usize;
                let v = col[i];
                if let Some(prev) = last[node] {
                    if v > prev {
                        let l = left[node];
                        let r = Mass {
                            pos: totals[node].pos - l.pos,
                            neg: totals[node].neg - l.neg,
                        };
                        let impurity = l.gini() + r.gini();
                        let better = match best[node] {
                            None => true,
                            Some(b) => impurity < b.impurity - TIE_EPS,
                        };
                        if better {
                            best[node] = Some(Candidate {
                                impurity,
                                feature: f,
                                threshold: midpoint(prev, v),
                            });
                        }
                    }
                }
                left[node].add(self.labels[i], weights[i]);
                last[node] = Some(v);
            }
        }
        best
    }
}

/// Midpoint of `lo < hi` that still separates them under `x < t`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = (lo + hi) / 2.0;
    if m > lo && m <= hi {
        m
    } else {
        hi
    }
}
