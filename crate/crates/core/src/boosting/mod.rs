//! Discrete AdaBoost over depth-2 binary decision trees.

mod stage;
mod tree;

use std::fmt;

use thiserror::Error;

use crate::annotation::Provenance;
use crate::features::FeatureVector;

pub use stage::{
    adaboost_bound, alpha_for_error, calibrate_threshold, train_stage, train_stage_observed,
    RoundReport, StageConfig, StageModel, StageTraining,
};
pub use tree::{train_tree, weighted_error, ColumnStore, DecisionTree, Node};

#[derive(Debug, Error, PartialEq)]
pub enum BoostError {
    #[error("no training samples")]
    EmptySamples,
    #[error("training samples carry a single label; both classes are required")]
    SingleLabel,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no positive samples to calibrate against")]
    NoPositives,
    #[error("feature vector has {found} values, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("samples have inconsistent dimensions ({first} vs {other})")]
    RaggedSamples { first: usize, other: usize },
    #[error("weights have {found} entries for {expected} samples")]
    WeightCount { expected: usize, found: usize },
    #[error("first weak learner has weighted error {0} >= 1/2")]
    NoUsefulWeakLearner(f64),
}

/// Binary class; road is positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// `+1` or `-1`.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_positive(positive: bool) -> Label {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "+1",
            Label::Negative => "-1",
        })
    }
}

/// Anything the learners can train on: a feature row plus its label.
pub trait Sample {
    fn values(&self) -> &[f64];
    fn label(&self) -> Label;
}

/// Where an ROI example came from, for pool audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleOrigin {
    pub frame: usize,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: Label,
    pub provenance: Provenance,
    pub origin: Option<SampleOrigin>,
}

impl Sample for LabeledSample {
    fn values(&self) -> &[f64] {
        self.features.values()
    }

    fn label(&self) -> Label {
        self.label
    }
}

impl<T: Sample + ?Sized> Sample for &T {
    fn values(&self) -> &[f64] {
        (**self).values()
    }

    fn label(&self) -> Label {
        (**self).label()
    }
}

/// Plain `(row, label)` pair, handy for small hand-built problems.
impl Sample for (Vec<f64>, Label) {
    fn values(&self) -> &[f64] {
        &self.0
    }

    fn label(&self) -> Label {
        self.1
    }
}

fn check_dims<S: Sample>(samples: &[S]) -> Result<usize, BoostError> {
    let first = samples.first().ok_or(BoostError::EmptySamples)?.values().len();
    for s in samples {
        if s.values().len() != first {
            return Err(BoostError::RaggedSamples {
                first,
                other: s.values().len(),
            });
        }
    }
    Ok(first)
}
