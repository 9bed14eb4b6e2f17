//! Brute-force reference learners used to check the optimized ones.
//!
//! Everything here works on plain row vectors and recomputes every sum from
//! scratch, without presorting or incremental sweeps.

#![allow(dead_code)]

use roadcascade::boosting::{Label, Node};

pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub impurity: f64,
}

fn mass(labels: &[Label], weights: &[f64], members: &[usize]) -> (f64, f64) {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for &i in members {
        if labels[i].is_positive() {
            pos += weights[i];
        } else {
            neg += weights[i];
        }
    }
    (pos, neg)
}

pub fn gini(pos: f64, neg: f64) -> f64 {
    let w = pos + neg;
    if w <= 0.0 {
        0.0
    } else {
        w - (pos * pos + neg * neg) / w
    }
}

/// Thresholds that separate consecutive distinct values of `values`.
pub fn candidate_thresholds(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v.windows(2)
        .map(|p| {
            let m = (p[0] + p[1]) / 2.0;
            if m > p[0] && m <= p[1] {
                m
            } else {
                p[1]
            }
        })
        .collect()
}

/// Weighted Gini impurity of splitting `members` on `x[f] < t`.
pub fn split_impurity(rows: &[Vec<f64>], labels: &[Label], weights: &[f64], members: &[usize], f: usize, t: f64) -> f64 {
    let (left, right): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| rows[i][f] < t);
    let (lp, ln) = mass(labels, weights, &left);
    let (rp, rn) = mass(labels, weights, &right);
    gini(lp, ln) + gini(rp, rn)
}

/// Every candidate split of `members` in (feature, threshold) order.
pub fn all_splits(rows: &[Vec<f64>], labels: &[Label], weights: &[f64], members: &[usize]) -> Vec<Split> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for f in 0..dim {
        let values: Vec<f64> = members.iter().map(|&i| rows[i][f]).collect();
        for t in candidate_thresholds(&values) {
            out.push(Split {
                feature: f,
                threshold: t,
                impurity: split_impurity(rows, labels, weights, members, f, t),
            });
        }
    }
    out
}

/// Lowest-impurity split; earlier candidates win ties within `TIE_EPS`.
pub fn best_split(rows: &[Vec<f64>], labels: &[Label], weights: &[f64], members: &[usize]) -> Option<Split> {
    all_splits(rows, labels, weights, members)
        .into_iter()
        .fold(None, |best, s| match best {
            Some(b) if !(s.impurity < b.impurity - TIE_EPS) => Some(b),
            _ => Some(s),
        })
}

fn majority(labels: &[Label], weights: &[f64], members: &[usize]) -> Label {
    let (p, n) = mass(labels, weights, members);
    if p >= n {
        Label::Positive
    } else {
        Label::Negative
    }
}

fn grow(rows: &[Vec<f64>], labels: &[Label], weights: &[f64], members: &[usize], depth: usize) -> Node {
    let (p, n) = mass(labels, weights, members);
    let pure = p <= 0.0 || n <= 0.0;
    if depth == 0 || pure {
        return Node::Leaf(majority(labels, weights, members));
    }
    match best_split(rows, labels, weights, members) {
        None => Node::Leaf(majority(labels, weights, members)),
        Some(s) => {
            let (left, right): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| rows[i][s.feature] < s.threshold);
            Node::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: Box::new(grow(rows, labels, weights, &left, depth - 1)),
                right: Box::new(grow(rows, labels, weights, &right, depth - 1)),
            }
        }
    }
}

/// Greedy Gini tree of the given depth.
pub fn tree(rows: &[Vec<f64>], labels: &[Label], weights: &[f64], depth: usize) -> Node {
    let all: Vec<usize> = (0..rows.len()).collect();
    grow(rows, labels, weights, &all, depth)
}

pub fn predict(node: &Node, x: &[f64]) -> Label {
    match node {
        Node::Leaf(l) => *l,
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if x[*feature] < *threshold {
                predict(left, x)
            } else {
                predict(right, x)
            }
        }
    }
}

pub fn error(node: &Node, rows: &[Vec<f64>], labels: &[Label], weights: &[f64]) -> f64 {
    rows.iter()
        .zip(labels)
        .zip(weights)
        .filter(|((x, y), _)| predict(node, x) != **y)
        .map(|(_, w)| *w)
        .sum()
}

#[derive(Debug, Clone)]
pub struct Round {
    pub tree: Node,
    pub error: f64,
    pub alpha: f64,
    /// Normalized weights after this round's update.
    pub weights: Vec<f64>,
}

/// Textbook discrete AdaBoost with depth-2 Gini trees, run for up to
/// `rounds` rounds. Stops early when a learner is no better than chance or
/// the data is fit perfectly.
pub fn adaboost(rows: &[Vec<f64>], labels: &[Label], rounds: usize, eps_min: f64) -> Vec<Round> {
    let m = rows.len();
    let mut d = vec![1.0 / m as f64; m];
    let mut out = Vec::new();
    for _ in 0..rounds {
        let h = tree(rows, labels, &d, 2);
        let eps = error(&h, rows, labels, &d);
        if eps >= 0.5 {
            break;
        }
        let e = eps.max(eps_min);
        let alpha = 0.5 * ((1.0 - e) / e).ln();
        let mut next: Vec<f64> = (0..m)
            .map(|i| {
                let agree = predict(&h, &rows[i]) == labels[i];
                d[i] * if agree { (-alpha).exp() } else { alpha.exp() }
            })
            .collect();
        let z: f64 = next.iter().sum();
        for w in &mut next {
            *w /= z;
        }
        d = next.clone();
        out.push(Round {
            tree: h,
            error: eps,
            alpha,
            weights: next,
        });
        if eps <= eps_min {
            break;
        }
    }
    out
}
