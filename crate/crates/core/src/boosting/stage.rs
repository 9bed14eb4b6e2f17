//! One AdaBoost stage: weighted trees, vote weights, and a pass threshold.

use super::tree::{ColumnStore, DecisionTree};
use super::{BoostError, Label, Sample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageConfig {
    /// Upper bound on weak learners per stage.
    pub max_trees: usize,
    /// Fraction of training positives the calibrated threshold must keep.
    pub target_stage_dr: f64,
    /// Stage stops adding trees once its training FPR is at most this.
    pub max_stage_fpr: f64,
    /// Lower clamp on the weighted error, keeps `alpha` finite.
    pub eps_min: f64,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            max_trees: 40,
            target_stage_dr: 0.995,
            max_stage_fpr: 0.5,
            eps_min: 1e-10,
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<(), BoostError> {
        let bad = |msg: &str| Err(BoostError::InvalidConfig(msg.to_string()));
        if self.max_trees < 1 {
            return bad("max_trees must be at least 1");
        }
        if !(self.target_stage_dr > 0.0 && self.target_stage_dr <= 1.0) {
            return bad("target_stage_dr must lie in (0, 1]");
        }
        if !(self.max_stage_fpr > 0.0 && self.max_stage_fpr <= 1.0) {
            return bad("max_stage_fpr must lie in (0, 1]");
        }
        if !(self.eps_min > 0.0 && self.eps_min < 0.5) {
            return bad("eps_min must lie in (0, 1/2)");
        }
        Ok(())
    }
}

/// Boosted vote `f(x) = sum_t alpha_t h_t(x)`; accepts when `f(x) >= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageModel {
    trees: Vec<DecisionTree>,
    alphas: Vec<f64>,
    threshold: f64,
    dim: usize,
}

impl StageModel {
    pub fn new(
        trees: Vec<DecisionTree>,
        alphas: Vec<f64>,
        threshold: f64,
        dim: usize,
    ) -> Result<StageModel, BoostError> {
        if trees.is_empty() || trees.len() != alphas.len() {
            return Err(BoostError::InvalidConfig(format!(
                "stage needs matching non-empty trees and alphas ({} vs {})",
                trees.len(),
                alphas.len()
            )));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(BoostError::InvalidConfig(format!("alpha {a} is not positive")));
        }
        if let Some(f) = trees.iter().filter_map(|t| t.root().max_feature()).find(|&f| f >= dim) {
            return Err(BoostError::DimensionMismatch {
                expected: dim,
                found: f + 1,
            });
        }
        if threshold.is_nan() {
            return Err(BoostError::InvalidConfig("threshold is NaN".into()));
        }
        Ok(StageModel {
            trees,
            alphas,
            threshold,
            dim,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_threshold(&self, threshold: f64) -> StageModel {
        StageModel {
            threshold,
            ..self.clone()
        }
    }

    /// Every tree's vote flipped; scores change sign.
    pub fn negated(&self) -> StageModel {
        StageModel {
            trees: self.trees.iter().map(DecisionTree::negated).collect(),
            ..self.clone()
        }
    }

    fn check(&self, x: &[f64]) -> Result<(), BoostError> {
        if x.len() == self.dim {
            Ok(())
        } else {
            Err(BoostError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            })
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64, BoostError> {
        self.check(x)?;
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .zip(&self.alphas)
            .map(|(t, a)| a * t.predict(x).sign())
            .sum()
    }

    pub fn accepts(&self, x: &[f64]) -> Result<bool, BoostError> {
        Ok(self.score(x)? >= self.threshold)
    }
}

/// `alpha = 1/2 ln((1 - eps) / eps)`.
pub fn alpha_for_error(eps: f64) -> f64 {
    0.5 * ((1.0 - eps) / eps).ln()
}

/// Upper bound `prod_t 2 sqrt(eps_t (1 - eps_t))` on the training error of
/// the threshold-0 vote.
pub fn adaboost_bound(errors: &[f64]) -> f64 {
    errors.iter().map(|e| 2.0 * (e * (1.0 - e)).sqrt()).product()
}

/// Largest threshold that keeps at least `target_dr` of the positives.
pub fn calibrate_threshold<V: AsRef<[f64]>>(
    stage: &StageModel,
    positives: &[V],
    target_dr: f64,
) -> Result<f64, BoostError> {
    let mut scores = positives
        .iter()
        .map(|p| stage.score(p.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    threshold_for_scores(&mut scores, target_dr)
}

pub(crate) fn threshold_for_scores(scores: &mut [f64], target_dr: f64) -> Result<f64, BoostError> {
    if scores.is_empty() {
        return Err(BoostError::NoPositives);
    }
    if !(target_dr > 0.0 && target_dr <= 1.0) {
        return Err(BoostError::InvalidConfig("target_dr must lie in (0, 1]".into()));
    }
    scores.sort_by(|a, b| b.total_cmp(a));
    let n = scores.len();
    // Guard against products like 0.995 * 200 = 199.00000000000003.
    let keep = ((target_dr * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(scores[keep - 1])
}

/// Per-round boosting state handed to observers.
#[derive(Debug)]
pub struct RoundReport<'a> {
    pub round: usize,
    pub tree: &'a DecisionTree,
    /// Weighted error before clamping.
    pub error: f64,
    pub alpha: f64,
    /// Normalized weights after the update.
    pub weights: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTraining {
    pub model: StageModel,
    /// Clamped weighted error of every accepted round.
    pub round_errors: Vec<f64>,
    /// Misclassification rate of the threshold-0 vote on the training set.
    pub training_error: f64,
    /// Detection and false-positive rate at the calibrated threshold.
    pub training_dr: f64,
    pub training_fpr: f64,
}

impl StageTraining {
    pub fn bound(&self) -> f64 {
        adaboost_bound(&self.round_errors)
    }
}

pub fn train_stage<S: Sample>(samples: &[S], config: &StageConfig) -> Result<StageTraining, BoostError> {
    train_stage_observed(samples, config, |_| {})
}

/// Trains a stage, calling `observer` after every accepted round.
pub fn train_stage_observed<S: Sample>(
    samples: &[S],
    config: &StageConfig,
    mut observer: impl FnMut(&RoundReport<'_>),
) -> Result<StageTraining, BoostError> {
    config.validate()?;
    let store = ColumnStore::new(samples)?;
    let n = store.len();
    let n_pos = store.labels().iter().filter(|l| l.is_positive()).count();
    if n_pos == 0 || n_pos == n {
        return Err(BoostError::SingleLabel);
    }

    let mut weights = vec![1.0 / n as f64; n];
    let mut scores = vec![0.0; n];
    let mut trees = Vec::new();
    let mut alphas = Vec::new();
    let mut round_errors = Vec::new();
    let mut predictions = vec![Label::Positive; n];

    loop {
        let tree = store.train_tree(&weights);
        for (i, p) in predictions.iter_mut().enumerate() {
            *p = store.predict(&tree, i);
        }
        let error: f64 = (0..n)
            .filter(|&i| predictions[i] != store.label(i))
            .map(|i| weights[i])
            .sum();
        if error >= 0.5 {
            if trees.is_empty() {
                return Err(BoostError::NoUsefulWeakLearner(error));
            }
            break;
        }
        let clamped = error.max(config.eps_min);
        let alpha = alpha_for_error(clamped);

        // Correctly classified samples lose weight, mistakes gain it.
        let mut total = 0.0;
        for i in 0..n {
            let margin = store.label(i).sign() * predictions[i].sign();
            weights[i] *= (-alpha * margin).exp();
            total += weights[i];
        }
        for w in &mut weights {
            *w /= total;
        }
        for i in 0..n {
            scores[i] += alpha * predictions[i].sign();
        }

        observer(&RoundReport {
            round: trees.len(),
            tree: &tree,
            error,
            alpha,
            weights: &weights,
        });
        trees.push(tree);
        alphas.push(alpha);
        round_errors.push(clamped);

        let threshold = positive_threshold(&store, &scores, config.target_stage_dr)?;
        let fpr = rate(&store, &scores, threshold, Label::Negative);

        if error <= config.eps_min || fpr <= config.max_stage_fpr || trees.len() >= config.max_trees {
            break;
        }
    }

    let threshold = positive_threshold(&store, &scores, config.target_stage_dr)?;

    let training_error = (0..n)
        .filter(|&i| Label::from_positive(scores[i] >= 0.0) != store.label(i))
        .count() as f64
        / n as f64;
    let training_dr = rate(&store, &scores, threshold, Label::Positive);
    let training_fpr = rate(&store, &scores, threshold, Label::Negative);
    let model = StageModel::new(trees, alphas, threshold, store.dim())?;
    Ok(StageTraining {
        model,
        round_errors,
        training_error,
        training_dr,
        training_fpr,
    })
}

fn positive_threshold(store: &ColumnStore, scores: &[f64], target_dr: f64) -> Result<f64, BoostError> {
    let mut positive_scores: Vec<f64> = (0..store.len())
        .filter(|&i| store.label(i).is_positive())
        .map(|i| scores[i])
        .collect();
    threshold_for_scores(&mut positive_scores, target_dr)
}

/// Fraction of samples with `label` whose score reaches `threshold`.
fn rate(store: &ColumnStore, scores: &[f64], threshold: f64, label: Label) -> f64 {
    let (hit, total) = (0..store.len())
        .filter(|&i| store.label(i) == label)
        .fold((0usize, 0usize), |(h, t), i| {
            (h + usize::from(scores[i] >= threshold), t + 1)
        });
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}
