//! Plain-text model files.
//!
//! ```text
//! roadcascade-model v1
//! roi 15 15
//! config roi_size 15
//! ...
//! stages 2
//! stage 0 trees 3 threshold 0.41 dr 0.995 fpr 0.38
//! tree 0.5493061443340549 S 12 0.5 L -1 L +1
//! ...
//! end
//! ```
//!
//! Trees are written in prefix order: `S feature threshold <left> <right>`
//! or `L +1` / `L -1`. Floats use Rust's shortest round-trip formatting so
//! loading and saving reproduces the file byte for byte.

use std::fmt::Write as _;

use thiserror::Error;

use crate::boosting::{DecisionTree, Label, Node, StageModel};
use crate::cascade::{CascadeConfig, CascadeModel, StageRates};
use crate::config::{cascade_entries, set_cascade_key, CASCADE_KEYS};
use crate::features::feature_dim;

pub const MAGIC: &str = "roadcascade-model v1";

#[derive(Debug, Error, PartialEq)]
pub enum ModelIoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model is inconsistent: {0}")]
    Invalid(String),
}

fn perr(line: usize, message: impl Into<String>) -> ModelIoError {
    ModelIoError::Parse {
        line,
        message: message.into(),
    }
}

fn write_node(out: &mut String, node: &Node) {
    match node {
        Node::Leaf(label) => {
            let _ = write!(out, " L {label}");
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let _ = write!(out, " S {feature} {threshold:?}");
            write_node(out, left);
            write_node(out, right);
        }
    }
}

pub fn serialize_model(model: &CascadeModel) -> String {
    let mut out = String::new();
    let (w, h) = model.roi_size();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "roi {w} {h}");
    for (k, v) in cascade_entries(model.config()) {
        let _ = writeln!(out, "config {k} {v}");
    }
    let _ = writeln!(out, "stages {}", model.stages().len());
    for (i, (stage, rates)) in model.stages().iter().zip(model.rates()).enumerate() {
        let _ = writeln!(
            out,
            "stage {i} trees {} threshold {:?} dr {:?} fpr {:?}",
            stage.trees().len(),
            stage.threshold(),
            rates.dr,
            rates.fpr
        );
        for (tree, alpha) in stage.trees().iter().zip(stage.alphas()) {
            let _ = write!(out, "tree {alpha:?}");
            write_node(&mut out, tree.root());
            out.push('\n');
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>), ModelIoError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l.split_ascii_whitespace().collect()))
            }
            None => Err(perr(self.last + 1, "unexpected end of file")),
        }
    }

    /// Next line, which must start with `keyword` and have `arity` fields after it.
    fn expect(&mut self, keyword: &str, arity: usize) -> Result<(usize, Vec<&'a str>), ModelIoError> {
        let (n, toks) = self.next()?;
        if toks.first() != Some(&keyword) || toks.len() != arity + 1 {
            return Err(perr(n, format!("expected `{keyword}` with {arity} fields")));
        }
        Ok((n, toks[1..].to_vec()))
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T, ModelIoError> {
    tok.parse().map_err(|_| perr(line, format!("bad number {tok:?}")))
}

fn read_node<'a, I: Iterator<Item = &'a str>>(line: usize, toks: &mut I, depth: usize) -> Result<Node, ModelIoError> {
    if depth > 2 {
        return Err(perr(line, "tree deeper than 2"));
    }
    match toks.next() {
        Some("L") => match toks.next() {
            Some("+1") => Ok(Node::Leaf(Label::Positive)),
            Some("-1") => Ok(Node::Leaf(Label::Negative)),
            other => Err(perr(line, format!("bad leaf label {other:?}"))),
        },
        Some("S") => {
            let feature = num(line, toks.next().ok_or_else(|| perr(line, "truncated split"))?)?;
            let threshold: f64 = num(line, toks.next().ok_or_else(|| perr(line, "truncated split"))?)?;
            if threshold.is_nan() {
                return Err(perr(line, "NaN split threshold"));
            }
            let left = read_node(line, toks, depth + 1)?;
            let right = read_node(line, toks, depth + 1)?;
            Ok(Node::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        other => Err(perr(line, format!("expected `S` or `L`, found {other:?}"))),
    }
}

pub fn parse_model(text: &str) -> Result<CascadeModel, ModelIoError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (n, _) = lines.next()?;
    if text.lines().next().map(str::trim_end) != Some(MAGIC) {
        return Err(perr(n, "not a roadcascade model file"));
    }
    let (n, roi) = lines.expect("roi", 2)?;
    let (roi_w, roi_h): (usize, usize) = (num(n, roi[0])?, num(n, roi[1])?);
    if roi_w == 0 || roi_h == 0 {
        return Err(perr(n, "ROI size must be positive"));
    }

    let mut config = CascadeConfig::default();
    for key in CASCADE_KEYS {
        let (n, toks) = lines.expect("config", 2)?;
        if toks[0] != key {
            return Err(perr(n, format!("expected config key {key}, found {}", toks[0])));
        }
        if set_cascade_key(&mut config, key, toks[1]) != Ok(true) {
            return Err(perr(n, format!("bad value {:?} for {key}", toks[1])));
        }
    }

    let (n, toks) = lines.expect("stages", 1)?;
    let n_stages: usize = num(n, toks[0])?;
    let dim = feature_dim(roi_w, roi_h);
    let mut stages = Vec::with_capacity(n_stages);
    let mut rates = Vec::with_capacity(n_stages);
    for i in 0..n_stages {
        let (n, t) = lines.expect("stage", 9)?;
        if t[0] != i.to_string() || t[1] != "trees" || t[3] != "threshold" || t[5] != "dr" || t[7] != "fpr" {
            return Err(perr(n, format!("malformed header for stage {i}")));
        }
        let n_trees: usize = num(n, t[2])?;
        let threshold: f64 = num(n, t[4])?;
        rates.push(StageRates {
            dr: num(n, t[6])?,
            fpr: num(n, t[8])?,
        });
        let mut trees = Vec::with_capacity(n_trees);
        let mut alphas = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let (n, toks) = lines.next()?;
            if toks.first() != Some(&"tree") || toks.len() < 4 {
                return Err(perr(n, "expected `tree`"));
            }
            alphas.push(num::<f64>(n, toks[1])?);
            let mut rest = toks[2..].iter().copied();
            let root = read_node(n, &mut rest, 0)?;
            if rest.next().is_some() {
                return Err(perr(n, "trailing tokens after tree"));
            }
            trees.push(DecisionTree::new(root).ok_or_else(|| perr(n, "tree deeper than 2"))?);
        }
        let stage = StageModel::new(trees, alphas, threshold, dim)
            .map_err(|e| ModelIoError::Invalid(format!("stage {i}: {e}")))?;
        stages.push(stage);
    }
    lines.expect("end", 0)?;
    if let Some((i, l)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(perr(i + 1, format!("content after `end`: {l:?}")));
    }
    CascadeModel::new(stages, rates, roi_w, roi_h, config).map_err(|e| ModelIoError::Invalid(e.to_string()))
}
