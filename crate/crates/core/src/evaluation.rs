//! Confusion counts, ROC sweeps over the final stage, and road masks.

use std::fmt::Write as _;

use thiserror::Error;

use crate::boosting::{LabeledSample, Sample};
use crate::cascade::{CascadeError, CascadeModel, StageRates};
use crate::dataset::Frame;
use crate::features::{FeatureError, PreparedFrame};
use crate::imaging::{GrayImage, Rect};
use crate::sampler::{frame_seed, sample_random_rois, seeded_rng, sliding_windows, SamplerError};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    EmptySamples,
    #[error("{width}x{height} image is smaller than the {roi_w}x{roi_h} ROI")]
    ImageTooSmall {
        width: usize,
        height: usize,
        roi_w: usize,
        roi_h: usize,
    },
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.fp + self.tn
    }

    /// `tp / (tp + fn)`, 0 without positives.
    pub fn dr(&self) -> f64 {
        ratio(self.tp, self.positives())
    }

    /// `fp / (fp + tn)`, 0 without negatives.
    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.negatives())
    }

    fn record(&mut self, positive: bool, accepted: bool) {
        match (positive, accepted) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Random ROIs, `per_class` of each label from every frame with a road.
/// Each frame draws from its own stream derived from `seed` and its id.
pub fn held_out_samples(
    frames: &[Frame],
    roi_size: usize,
    per_class: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>, EvalError> {
    let mut out = Vec::new();
    for frame in frames.iter().filter(|f| f.annotation.road().is_some()) {
        let mut rng = seeded_rng(frame_seed(seed, &frame.annotation.frame_id));
        out.extend(sample_random_rois(
            frame.index,
            &frame.annotation,
            &frame.prepared,
            per_class,
            roi_size,
            &mut rng,
        )?);
    }
    if out.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    Ok(out)
}

pub fn confusion<S: Sample>(model: &CascadeModel, samples: &[S]) -> Result<ConfusionCounts, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    let mut counts = ConfusionCounts::default();
    for s in samples {
        counts.record(s.label().is_positive(), model.accepts(s.values())?);
    }
    Ok(counts)
}

/// Per-stage detection and false-positive rates, each measured on the
/// samples that survived all earlier stages. Their products equal the
/// cascade's overall rates on the same samples.
pub fn stage_breakdown<S: Sample>(model: &CascadeModel, samples: &[S]) -> Result<Vec<StageRates>, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    let mut alive: Vec<&S> = samples.iter().collect();
    let mut out = Vec::with_capacity(model.stages().len());
    for stage in model.stages() {
        let mut counts = ConfusionCounts::default();
        let mut next = Vec::with_capacity(alive.len());
        for s in alive {
            let accepted = stage.accepts(s.values()).map_err(CascadeError::from)?;
            counts.record(s.label().is_positive(), accepted);
            if accepted {
                next.push(s);
            }
        }
        out.push(StageRates {
            dr: counts.dr(),
            fpr: counts.fpr(),
        });
        alive = next;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub dr: f64,
}

/// Operating points ordered by decreasing final-stage threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// `threshold,fpr,dr` with six decimals per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,dr\n");
        for p in &self.points {
            let _ = writeln!(out, "{:.6},{:.6},{:.6}", p.threshold, p.fpr, p.dr);
        }
        out
    }

    /// Highest-DR point with FPR at most `max_fpr`; the larger threshold
    /// wins ties.
    pub fn best_dr_at_fpr(&self, max_fpr: f64) -> Option<RocPoint> {
        self.points
            .iter()
            .filter(|p| p.fpr <= max_fpr)
            .fold(None, |best: Option<RocPoint>, p| match best {
                Some(b) if b.dr >= p.dr => Some(b),
                _ => Some(*p),
            })
    }
}

/// Sweeps the final stage's threshold with earlier stages fixed. One point
/// for `+inf`, one per distinct final-stage score among samples that pass
/// the earlier stages, and one for `-inf`.
pub fn roc_sweep<S: Sample>(model: &CascadeModel, samples: &[S]) -> Result<RocCurve, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    let stages = model.stages();
    let (last, earlier) = stages.split_last().expect("cascade has at least one stage");
    let mut positives = 0usize;
    let mut negatives = 0usize;
    let mut survivors: Vec<(f64, bool)> = Vec::new();
    for s in samples {
        let x = s.values();
        let positive = s.label().is_positive();
        if positive {
            positives += 1;
        } else {
            negatives += 1;
        }
        let mut passes = true;
        for stage in earlier {
            if !stage.accepts(x).map_err(CascadeError::from)? {
                passes = false;
                break;
            }
        }
        if passes {
            survivors.push((last.score(x).map_err(CascadeError::from)?, positive));
        }
    }
    survivors.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        dr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < survivors.len() {
        let threshold = survivors[i].0;
        while i < survivors.len() && survivors[i].0 == threshold {
            if survivors[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: ratio(fp, negatives),
            dr: ratio(tp, positives),
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: ratio(fp, negatives),
        dr: ratio(tp, positives),
    });
    Ok(RocCurve { points })
}

/// Paints every accepted sliding window black on a white canvas.
pub fn render_mask(model: &CascadeModel, img: &GrayImage, stride: usize) -> Result<GrayImage, EvalError> {
    render_mask_prepared(model, &PreparedFrame::new(img.clone()), stride)
}

pub fn render_mask_prepared(model: &CascadeModel, frame: &PreparedFrame, stride: usize) -> Result<GrayImage, EvalError> {
    if stride == 0 {
        return Err(EvalError::ZeroStride);
    }
    let (roi_w, roi_h) = model.roi_size();
    let (width, height) = (frame.image.width(), frame.image.height());
    if roi_w > width || roi_h > height {
        return Err(EvalError::ImageTooSmall {
            width,
            height,
            roi_w,
            roi_h,
        });
    }
    let mut mask = GrayImage::filled(width, height, 255).expect("valid dimensions");
    for win in sliding_windows(width, height, roi_w.max(roi_h), stride) {
        let roi = Rect::new(win.x, win.y, roi_w, roi_h);
        if model.accepts(frame.features(roi)?.values())? {
            for y in roi.y..roi.bottom() {
                for x in roi.x..roi.right() {
                    mask.set(x, y, 0);
                }
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::{DecisionTree, Label, Node, StageModel};
    use crate::cascade::CascadeConfig;
    use crate::features::feature_dim;

    /// One-stage cascade on 1x1 ROIs whose score is +1 when feature 0 is at
    /// least `cut`, -1 otherwise.
    fn cut_stage(feature: usize, cut: f64, threshold: f64) -> StageModel {
        let tree = DecisionTree::new(Node::Split {
            feature,
            threshold: cut,
            left: Box::new(Node::Leaf(Label::Negative)),
            right: Box::new(Node::Leaf(Label::Positive)),
        })
        .unwrap();
        StageModel::new(vec![tree], vec![1.0], threshold, feature_dim(1, 1)).unwrap()
    }

    fn model(stages: Vec<StageModel>) -> CascadeModel {
        let rates = vec![StageRates { dr: 1.0, fpr: 1.0 }; stages.len()];
        CascadeModel::new(stages, rates, 1, 1, CascadeConfig::default()).unwrap()
    }

    fn sample(v0: f64, v1: f64, positive: bool) -> (Vec<f64>, Label) {
        let mut x = vec![0.0; feature_dim(1, 1)];
        x[0] = v0;
        x[1] = v1;
        (x, Label::from_positive(positive))
    }

    fn balanced() -> Vec<(Vec<f64>, Label)> {
        (0..20).map(|i| sample(i as f64 / 20.0, 0.0, i % 2 == 0)).collect()
    }

    #[test]
    fn degenerate_acceptors() {
        let all = model(vec![cut_stage(0, 0.5, f64::NEG_INFINITY)]);
        let c = confusion(&all, &balanced()).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (10, 10, 0, 0));
        assert_eq!((c.dr(), c.fpr()), (1.0, 1.0));

        let none = model(vec![cut_stage(0, 0.5, f64::INFINITY)]);
        let c = confusion(&none, &balanced()).unwrap();
        assert_eq!((c.dr(), c.fpr()), (0.0, 0.0));
        assert_eq!(c.positives(), 10);

        let empty: Vec<(Vec<f64>, Label)> = vec![];
        assert_eq!(confusion(&all, &empty), Err(EvalError::EmptySamples));
        assert_eq!(roc_sweep(&all, &empty), Err(EvalError::EmptySamples));
    }

    #[test]
    fn separable_roc_hits_the_corner() {
        // Scores come from a two-tree stage so they are distinct.
        let t = |cut: f64| {
            DecisionTree::new(Node::Split {
                feature: 0,
                threshold: cut,
                left: Box::new(Node::Leaf(Label::Negative)),
                right: Box::new(Node::Leaf(Label::Positive)),
            })
            .unwrap()
        };
        let stage = StageModel::new(vec![t(0.5), t(0.85)], vec![1.0, 0.5], 0.0, feature_dim(1, 1)).unwrap();
        let m = model(vec![stage]);
        let s = vec![sample(0.9, 0.0, true), sample(0.8, 0.0, true), sample(0.2, 0.0, false), sample(0.1, 0.0, false)];
        let roc = roc_sweep(&m, &s).unwrap();
        assert!(roc.points.iter().any(|p| p.fpr == 0.0 && p.dr == 1.0));
        assert_eq!(roc.best_dr_at_fpr(0.0).unwrap().dr, 1.0);
    }

    #[test]
    fn identical_scores_give_two_points() {
        let m = model(vec![cut_stage(0, 10.0, 0.0)]);
        let roc = roc_sweep(&m, &balanced()).unwrap();
        let mut pts: Vec<(f64, f64)> = roc.points.iter().map(|p| (p.fpr, p.dr)).collect();
        pts.dedup();
        assert_eq!(pts, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(roc.points.first().unwrap().threshold, f64::INFINITY);
        assert_eq!(roc.points.last().unwrap().threshold, f64::NEG_INFINITY);
    }

    #[test]
    fn earlier_stages_cap_the_curve() {
        // Stage 1 rejects v1 < 0.5, so the -inf endpoint is the prefix rate.
        let first = cut_stage(1, 0.5, 0.0);
        let m = model(vec![first, cut_stage(0, 0.5, 0.0)]);
        let s: Vec<_> = (0..8).map(|i| sample(i as f64 / 8.0, if i < 4 { 1.0 } else { 0.0 }, i % 2 == 0)).collect();
        let roc = roc_sweep(&m, &s).unwrap();
        let end = roc.points.last().unwrap();
        assert_eq!((end.fpr, end.dr), (0.5, 0.5));
        for pair in roc.points.windows(2) {
            assert!(pair[0].threshold > pair[1].threshold || pair[1].threshold == f64::NEG_INFINITY);
            assert!(pair[1].dr >= pair[0].dr && pair[1].fpr >= pair[0].fpr);
        }
    }

    #[test]
    fn csv_format() {
        let m = model(vec![cut_stage(0, 10.0, 0.0)]);
        let csv = roc_sweep(&m, &balanced()).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "threshold,fpr,dr");
        assert_eq!(lines[1], "inf,0.000000,0.000000");
        assert_eq!(lines[2], "-1.000000,1.000000,1.000000");
        assert_eq!(lines[3], "-inf,1.000000,1.000000");
    }

    #[test]
    fn breakdown_telescopes() {
        let m = model(vec![cut_stage(1, 0.5, 0.0), cut_stage(0, 0.3, 0.0)]);
        let s: Vec<_> = (0..40)
            .map(|i| sample((i * 7 % 40) as f64 / 40.0, if i % 3 == 0 { 0.0 } else { 1.0 }, i % 2 == 0))
            .collect();
        let parts = stage_breakdown(&m, &s).unwrap();
        let c = confusion(&m, &s).unwrap();
        let dr: f64 = parts.iter().map(|r| r.dr).product();
        let fpr: f64 = parts.iter().map(|r| r.fpr).product();
        assert!((dr - c.dr()).abs() < 1e-12);
        assert!((fpr - c.fpr()).abs() < 1e-12);
    }

    #[test]
    fn masks() {
        let img = GrayImage::from_fn(20, 12, |x, _| (x * 10) as u8).unwrap();
        let none = model(vec![cut_stage(0, 0.5, f64::INFINITY)]);
        let mask = render_mask(&none, &img, 5).unwrap();
        assert!(mask.samples().iter().all(|&v| v == 255));

        let all = model(vec![cut_stage(0, 0.5, f64::NEG_INFINITY)]);
        let mask = render_mask(&all, &img, 1).unwrap();
        assert!(mask.samples().iter().all(|&v| v == 0));

        // Bright half accepted: mask is binary and black exactly where x >= 5.
        let half = model(vec![cut_stage(0, 50.0 / 255.0, 0.0)]);
        let mask = render_mask(&half, &img, 1).unwrap();
        assert!(mask.samples().iter().all(|&v| v == 0 || v == 255));
        for x in 0..20 {
            assert_eq!(mask.get(x, 3), if x >= 5 { 0 } else { 255 });
        }

        let tiny = GrayImage::filled(1, 1, 0).unwrap();
        let big = CascadeModel::new(
            vec![StageModel::new(vec![DecisionTree::leaf(Label::Positive)], vec![1.0], 0.0, feature_dim(2, 2)).unwrap()],
            vec![StageRates { dr: 1.0, fpr: 1.0 }],
            2,
            2,
            CascadeConfig::default(),
        )
        .unwrap();
        assert!(matches!(render_mask(&big, &tiny, 5), Err(EvalError::ImageTooSmall { .. })));
        assert_eq!(render_mask(&all, &img, 0), Err(EvalError::ZeroStride));
    }
}
