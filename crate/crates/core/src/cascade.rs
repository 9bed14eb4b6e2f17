//! Cascades of boosted stages and their training loop.
//!
//! Training starts from randomly drawn positive and negative ROIs. After
//! each stage, samples the stage rejects leave the pools and the negative
//! pool is topped up with sliding-window false positives of the cascade
//! trained so far. Every stage therefore sees only what its predecessors let
//! through, and its measured rates are conditional on that.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::annotation::{label_roi, AnnotationError, Provenance};
use crate::boosting::{train_stage, BoostError, Label, LabeledSample, SampleOrigin, StageConfig, StageModel};
use crate::dataset::Frame;
use crate::features::{feature_dim, FeatureError};
use crate::sampler::{frame_seed, sample_random_rois, seeded_rng, sliding_windows, splitmix64, SamplerError};
use crate::imaging::Rect;

#[derive(Debug, Error, PartialEq)]
pub enum CascadeError {
    #[error("no training frame has a road polygon")]
    NoRoadPolygons,
    #[error("initial sampling produced no negative examples")]
    NegativePoolUnfillable,
    #[error("detection and false-positive lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("feature vector has {found} values, cascade expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid cascade configuration: {0}")]
    InvalidConfig(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: BoostError,
    },
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeConfig {
    /// Side of the square ROI in pixels.
    pub roi_size: usize,
    /// Random ROIs drawn per class from every training frame.
    pub samples_per_class: usize,
    /// Training stops once the product of stage FPRs is at most this.
    pub target_cascade_fpr: f64,
    pub max_stages: usize,
    pub stage: StageConfig,
    /// Sliding-window step used when mining negatives.
    pub mining_stride: usize,
    pub seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            roi_size: 15,
            samples_per_class: 140,
            target_cascade_fpr: 0.01,
            max_stages: 8,
            stage: StageConfig::default(),
            mining_stride: 5,
            seed: 0,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<(), CascadeError> {
        let bad = |m: &str| Err(CascadeError::InvalidConfig(m.to_string()));
        if self.roi_size < 1 {
            return bad("roi_size must be at least 1");
        }
        if self.samples_per_class < 1 {
            return bad("samples_per_class must be at least 1");
        }
        if self.max_stages < 1 {
            return bad("max_stages must be at least 1");
        }
        if self.mining_stride < 1 {
            return bad("mining_stride must be at least 1");
        }
        if !(self.target_cascade_fpr > 0.0 && self.target_cascade_fpr <= 1.0) {
            return bad("target_cascade_fpr must lie in (0, 1]");
        }
        self.stage.validate()?;
        Ok(())
    }
}

/// Overall rates of a cascade from its per-stage rates.
pub fn cascade_rates(dr: &[f64], fpr: &[f64]) -> Result<(f64, f64), CascadeError> {
    if dr.len() != fpr.len() {
        return Err(CascadeError::LengthMismatch(dr.len(), fpr.len()));
    }
    Ok((dr.iter().product(), fpr.iter().product()))
}

/// Conditional detection and false-positive rate a stage achieved on the
/// pools it was trained on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRates {
    pub dr: f64,
    pub fpr: f64,
}

/// Outcome of running a sample through a cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub accepted: bool,
    /// Stages scored before the decision, including a rejecting one.
    pub stages_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    stages: Vec<StageModel>,
    rates: Vec<StageRates>,
    roi_w: usize,
    roi_h: usize,
    config: CascadeConfig,
}

impl CascadeModel {
    pub fn new(
        stages: Vec<StageModel>,
        rates: Vec<StageRates>,
        roi_w: usize,
        roi_h: usize,
        config: CascadeConfig,
    ) -> Result<CascadeModel, CascadeError> {
        if stages.is_empty() {
            return Err(CascadeError::InvalidConfig("cascade needs at least one stage".into()));
        }
        if stages.len() != rates.len() {
            return Err(CascadeError::LengthMismatch(stages.len(), rates.len()));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if rates.iter().any(|r| !unit(r.dr) || !unit(r.fpr)) {
            return Err(CascadeError::InvalidConfig("stage rates must lie in [0, 1]".into()));
        }
        let dim = feature_dim(roi_w, roi_h);
        if let Some(s) = stages.iter().find(|s| s.dim() != dim) {
            return Err(CascadeError::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
        Ok(CascadeModel {
            stages,
            rates,
            roi_w,
            roi_h,
            config,
        })
    }

    pub fn stages(&self) -> &[StageModel] {
        &self.stages
    }

    pub fn rates(&self) -> &[StageRates] {
        &self.rates
    }

    pub fn roi_size(&self) -> (usize, usize) {
        (self.roi_w, self.roi_h)
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        feature_dim(self.roi_w, self.roi_h)
    }

    /// Products of the recorded stage rates.
    pub fn overall_rates(&self) -> (f64, f64) {
        let dr: Vec<f64> = self.rates.iter().map(|r| r.dr).collect();
        let fpr: Vec<f64> = self.rates.iter().map(|r| r.fpr).collect();
        cascade_rates(&dr, &fpr).expect("equal lengths by construction")
    }

    /// The first `n` stages (at least one).
    pub fn prefix(&self, n: usize) -> CascadeModel {
        let n = n.clamp(1, self.stages.len());
        CascadeModel {
            stages: self.stages[..n].to_vec(),
            rates: self.rates[..n].to_vec(),
            ..self.clone()
        }
    }

    /// Copy with the last stage's threshold replaced.
    pub fn with_final_threshold(&self, threshold: f64) -> CascadeModel {
        let mut out = self.clone();
        let last = out.stages.len() - 1;
        out.stages[last] = out.stages[last].with_threshold(threshold);
        out
    }

    fn check(&self, x: &[f64]) -> Result<(), CascadeError> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(CascadeError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            })
        }
    }

    /// Runs the stages in order and stops at the first rejection.
    pub fn evaluate(&self, x: &[f64]) -> Result<Verdict, CascadeError> {
        self.check(x)?;
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.score_unchecked(x) < stage.threshold() {
                return Ok(Verdict {
                    accepted: false,
                    stages_evaluated: i + 1,
                });
            }
        }
        Ok(Verdict {
            accepted: true,
            stages_evaluated: self.stages.len(),
        })
    }

    pub fn accepts(&self, x: &[f64]) -> Result<bool, CascadeError> {
        Ok(self.evaluate(x)?.accepted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Product of stage FPRs reached `target_cascade_fpr`.
    TargetReached,
    MaxStages,
    /// Sliding-window mining found no further false positives.
    MiningExhausted,
    /// Every training positive has been rejected by some stage.
    PositivesExhausted,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::TargetReached => "target false-positive rate reached",
            StopReason::MaxStages => "maximum stage count reached",
            StopReason::MiningExhausted => "no false positives left to mine",
            StopReason::PositivesExhausted => "no positives left",
        }
    }
}

/// Training record of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub positives: usize,
    pub negatives: usize,
    pub trees: usize,
    pub rates: StageRates,
    /// Clamped weighted error of every boosting round.
    pub round_errors: Vec<f64>,
    /// Error of the threshold-0 vote on the stage's training pools.
    pub training_error: f64,
    pub threshold: f64,
    /// Negatives the stage was trained on, with their labeling provenance.
    pub negative_pool: Vec<(SampleOrigin, Provenance)>,
    /// Negatives added by mining after this stage.
    pub mined: usize,
}

impl StageReport {
    pub fn bound(&self) -> f64 {
        crate::boosting::adaboost_bound(&self.round_errors)
    }

    pub fn bound_holds(&self) -> bool {
        self.training_error <= self.bound()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTraining {
    pub model: CascadeModel,
    pub stages: Vec<StageReport>,
    pub stop: StopReason,
}

/// Trains a cascade on `frames`. Frames without a road polygon are skipped.
pub fn train_cascade(frames: &[Frame], config: &CascadeConfig) -> Result<CascadeTraining, CascadeError> {
    train_cascade_with_progress(frames, config, |_, _| {})
}

/// As [`train_cascade`], reporting each finished stage.
pub fn train_cascade_with_progress(
    frames: &[Frame],
    config: &CascadeConfig,
    mut progress: impl FnMut(usize, &StageReport),
) -> Result<CascadeTraining, CascadeError> {
    config.validate()?;
    let usable: Vec<&Frame> = frames.iter().filter(|f| f.annotation.road().is_some()).collect();
    if usable.is_empty() {
        return Err(CascadeError::NoRoadPolygons);
    }

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for frame in &usable {
        let mut rng = seeded_rng(frame_seed(config.seed, &frame.annotation.frame_id));
        let drawn = sample_random_rois(
            frame.index,
            &frame.annotation,
            &frame.prepared,
            config.samples_per_class,
            config.roi_size,
            &mut rng,
        )?;
        for s in drawn {
            if s.label.is_positive() {
                positives.push(s);
            } else {
                negatives.push(s);
            }
        }
    }
    if negatives.is_empty() {
        return Err(CascadeError::NegativePoolUnfillable);
    }
    let negative_target = negatives.len();

    let mut stages: Vec<StageModel> = Vec::new();
    let mut rates = Vec::new();
    let mut reports = Vec::new();
    let stop = loop {
        let k = stages.len();
        let pool: Vec<&LabeledSample> = positives.iter().chain(negatives.iter()).collect();
        let trained = train_stage(&pool, &config.stage).map_err(|source| CascadeError::Stage { stage: k, source })?;
        let stage = trained.model;

        let pos_pass: Vec<bool> = positives.iter().map(|s| stage.score_unchecked(s.features.values()) >= stage.threshold()).collect();
        let neg_pass: Vec<bool> = negatives.iter().map(|s| stage.score_unchecked(s.features.values()) >= stage.threshold()).collect();
        let stage_rates = StageRates {
            dr: fraction(&pos_pass),
            fpr: fraction(&neg_pass),
        };
        let mut report = StageReport {
            positives: positives.len(),
            negatives: negatives.len(),
            trees: stage.trees().len(),
            rates: stage_rates,
            round_errors: trained.round_errors,
            training_error: trained.training_error,
            threshold: stage.threshold(),
            negative_pool: negatives
                .iter()
                .filter_map(|s| s.origin.map(|o| (o, s.provenance)))
                .collect(),
            mined: 0,
        };
        stages.push(stage);
        rates.push(stage_rates);

        let overall_fpr: f64 = rates.iter().map(|r: &StageRates| r.fpr).product();
        let decided = if overall_fpr <= config.target_cascade_fpr {
            Some(StopReason::TargetReached)
        } else if stages.len() >= config.max_stages {
            Some(StopReason::MaxStages)
        } else {
            None
        };
        if let Some(reason) = decided {
            progress(k, &report);
            reports.push(report);
            break reason;
        }

        retain_flagged(&mut positives, &pos_pass);
        retain_flagged(&mut negatives, &neg_pass);
        if positives.is_empty() {
            progress(k, &report);
            reports.push(report);
            break StopReason::PositivesExhausted;
        }

        let current = CascadeModel::new(stages.clone(), rates.clone(), config.roi_size, config.roi_size, *config)?;
        let wanted = negative_target.saturating_sub(negatives.len());
        let mined = mine_false_positives(&usable, &current, &negatives, wanted, splitmix64(config.seed ^ k as u64))?;
        report.mined = mined.len();
        progress(k, &report);
        reports.push(report);
        if mined.is_empty() {
            break StopReason::MiningExhausted;
        }
        negatives.extend(mined);
    };

    let model = CascadeModel::new(stages, rates, config.roi_size, config.roi_size, *config)?;
    Ok(CascadeTraining {
        model,
        stages: reports,
        stop,
    })
}

fn fraction(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        0.0
    } else {
        flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
    }
}

fn retain_flagged<T>(items: &mut Vec<T>, keep: &[bool]) {
    let mut it = keep.iter();
    items.retain(|_| *it.next().unwrap());
}

/// Negative sliding windows the cascade accepts, excluding those already in
/// `existing`. When more than `wanted` are found a seeded subset is kept.
/// Returned samples are ordered by frame, then row-major position.
pub fn mine_false_positives(
    frames: &[&Frame],
    cascade: &CascadeModel,
    existing: &[LabeledSample],
    wanted: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>, CascadeError> {
    if wanted == 0 {
        return Ok(Vec::new());
    }
    let (w, h) = cascade.roi_size();
    let taken: HashSet<SampleOrigin> = existing.iter().filter_map(|s| s.origin).collect();
    let mut found: Vec<(usize, Rect, Provenance)> = Vec::new();
    for (fi, frame) in frames.iter().enumerate() {
        let img = frame.image();
        for roi in sliding_windows(img.width(), img.height(), w.max(h), cascade.config().mining_stride) {
            let roi = Rect::new(roi.x, roi.y, w, h);
            let origin = SampleOrigin {
                frame: frame.index,
                x: roi.x,
                y: roi.y,
            };
            if taken.contains(&origin) {
                continue;
            }
            let label = label_roi(roi, &frame.annotation)?;
            if label.is_positive() {
                continue;
            }
            let fv = frame.prepared.features(roi)?;
            if cascade.accepts(fv.values())? {
                found.push((fi, roi, label.provenance()));
            }
        }
    }
    if found.len() > wanted {
        found.shuffle(&mut seeded_rng(seed));
        found.truncate(wanted);
        found.sort_by_key(|&(fi, roi, _)| (fi, roi.y, roi.x));
    }
    found
        .into_iter()
        .map(|(fi, roi, provenance)| {
            let frame = frames[fi];
            Ok(LabeledSample {
                features: frame.prepared.features(roi)?,
                label: Label::Negative,
                provenance,
                origin: Some(SampleOrigin {
                    frame: frame.index,
                    x: roi.x,
                    y: roi.y,
                }),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::{DecisionTree, Node};

    fn threshold_stage(feature: usize, cut: f64, dim: usize) -> StageModel {
        let tree = DecisionTree::new(Node::Split {
            feature,
            threshold: cut,
            left: Box::new(Node::Leaf(Label::Negative)),
            right: Box::new(Node::Leaf(Label::Positive)),
        })
        .unwrap();
        StageModel::new(vec![tree], vec![1.0], 0.0, dim).unwrap()
    }

    fn two_stage(size: usize) -> CascadeModel {
        let dim = feature_dim(size, size);
        CascadeModel::new(
            vec![threshold_stage(0, 0.5, dim), threshold_stage(1, 0.5, dim)],
            vec![StageRates { dr: 0.9, fpr: 0.5 }, StageRates { dr: 0.8, fpr: 0.25 }],
            size,
            size,
            CascadeConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn rate_products() {
        let (dr, _) = cascade_rates(&[0.99; 10], &[0.5; 10]).unwrap();
        assert!((dr - 0.99f64.powi(10)).abs() < 1e-15);
        assert!((dr - 0.9044).abs() < 1e-4);
        assert_eq!(cascade_rates(&[1.0; 5], &[0.5; 5]).unwrap().1, 0.03125);
        assert_eq!(cascade_rates(&[], &[]).unwrap(), (1.0, 1.0));
        assert_eq!(cascade_rates(&[0.5], &[]), Err(CascadeError::LengthMismatch(1, 0)));
    }

    #[test]
    fn evaluation_short_circuits() {
        let model = two_stage(1);
        let mut x = vec![0.0; model.dim()];
        x[0] = 1.0;
        x[1] = 1.0;
        assert_eq!(model.evaluate(&x).unwrap(), Verdict { accepted: true, stages_evaluated: 2 });
        x[0] = 0.0;
        assert_eq!(model.evaluate(&x).unwrap(), Verdict { accepted: false, stages_evaluated: 1 });
        x[0] = 1.0;
        x[1] = 0.0;
        assert_eq!(model.evaluate(&x).unwrap(), Verdict { accepted: false, stages_evaluated: 2 });

        let single = model.prefix(1);
        for v in [0.0, 1.0] {
            x[0] = v;
            assert_eq!(single.accepts(&x).unwrap(), model.stages()[0].accepts(&x).unwrap());
        }
        assert!(matches!(model.accepts(&[0.0]), Err(CascadeError::DimensionMismatch { .. })));
        let (dr, fpr) = model.overall_rates();
        assert!((dr - 0.72).abs() < 1e-15);
        assert_eq!(fpr, 0.125);
    }

    #[test]
    fn model_validation() {
        let dim = feature_dim(2, 2);
        assert!(CascadeModel::new(vec![], vec![], 2, 2, CascadeConfig::default()).is_err());
        assert!(matches!(
            CascadeModel::new(
                vec![threshold_stage(0, 0.5, dim)],
                vec![StageRates { dr: 1.0, fpr: 1.0 }],
                3,
                3,
                CascadeConfig::default()
            ),
            Err(CascadeError::DimensionMismatch { .. })
        ));
        assert!(CascadeModel::new(
            vec![threshold_stage(0, 0.5, dim)],
            vec![StageRates { dr: 1.5, fpr: 1.0 }],
            2,
            2,
            CascadeConfig::default()
        )
        .is_err());
    }

    #[test]
    fn config_validation() {
        assert!(CascadeConfig::default().validate().is_ok());
        for bad in [
            CascadeConfig { roi_size: 0, ..Default::default() },
            CascadeConfig { samples_per_class: 0, ..Default::default() },
            CascadeConfig { max_stages: 0, ..Default::default() },
            CascadeConfig { mining_stride: 0, ..Default::default() },
            CascadeConfig { target_cascade_fpr: 0.0, ..Default::default() },
            CascadeConfig { target_cascade_fpr: 1.5, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(CascadeError::InvalidConfig(_))));
        }
    }

    #[test]
    fn no_road_frames_is_an_error() {
        assert_eq!(
            train_cascade(&[], &CascadeConfig::default()).unwrap_err(),
            CascadeError::NoRoadPolygons
        );
    }
}
