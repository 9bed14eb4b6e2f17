//! Train/test frame splits, random ROI draws, and sliding-window grids.
//!
//! All randomness goes through [`ChaCha8Rng`], which produces the same
//! stream on every platform for a given seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::annotation::{label_roi, AnnotationError, FrameAnnotation};
use crate::boosting::{Label, LabeledSample, SampleOrigin};
use crate::features::{FeatureError, PreparedFrame};
use crate::imaging::Rect;

/// Draws allowed per requested sample of a class before giving up.
pub const ATTEMPTS_PER_SAMPLE: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("cannot take {n_train} training frames from {total}")]
    TooManyTrainFrames { n_train: usize, total: usize },
    #[error("{width}x{height} image is smaller than the {size}x{size} ROI")]
    ImageTooSmall {
        width: usize,
        height: usize,
        size: usize,
    },
    #[error("ROI size must be at least 1")]
    ZeroRoiSize,
    #[error("frame {frame}: gave up on {class} samples after {attempts} draws ({found} of {wanted} found)")]
    AttemptCapExceeded {
        frame: String,
        class: &'static str,
        attempts: usize,
        found: usize,
        wanted: usize,
    },
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream seed for one frame, stable across runs and platforms.
pub fn frame_seed(master_seed: u64, frame_id: &str) -> u64 {
    // FNV-1a over the id, folded with the master seed through splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in frame_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(master_seed ^ splitmix64(h))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSplit {
    pub seed: u64,
    pub n_train: usize,
}

/// Seeded shuffle of `0..total`, then a train prefix and test suffix. Both
/// halves keep the shuffled order.
pub fn split_indices(total: usize, plan: FrameSplit) -> Result<(Vec<usize>, Vec<usize>), SamplerError> {
    if plan.n_train > total {
        return Err(SamplerError::TooManyTrainFrames {
            n_train: plan.n_train,
            total,
        });
    }
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(&mut seeded_rng(plan.seed));
    let test = idx.split_off(plan.n_train);
    Ok((idx, test))
}

pub fn split_frames<T: Clone>(frames: &[T], plan: FrameSplit) -> Result<(Vec<T>, Vec<T>), SamplerError> {
    let (train, test) = split_indices(frames.len(), plan)?;
    let pick = |ix: Vec<usize>| ix.into_iter().map(|i| frames[i].clone()).collect();
    Ok((pick(train), pick(test)))
}

/// Square windows of side `size` at multiples of `stride`, row-major, each
/// fully inside a `width x height` image.
pub fn sliding_windows(width: usize, height: usize, size: usize, stride: usize) -> Vec<Rect> {
    assert!(size >= 1 && stride >= 1, "size and stride must be positive");
    if size > width || size > height {
        return Vec::new();
    }
    let xs: Vec<usize> = (0..=width - size).step_by(stride).collect();
    (0..=height - size)
        .step_by(stride)
        .flat_map(|y| xs.iter().map(move |&x| Rect::square(x, y, size)))
        .collect()
}

/// Draws uniformly placed `size x size` ROIs until `count_per_class`
/// positives and as many negatives are collected. Draws for a class that is
/// already full are discarded.
pub fn sample_random_rois(
    frame_index: usize,
    annotation: &FrameAnnotation,
    frame: &PreparedFrame,
    count_per_class: usize,
    size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<LabeledSample>, SamplerError> {
    if size == 0 {
        return Err(SamplerError::ZeroRoiSize);
    }
    let (width, height) = (frame.image.width(), frame.image.height());
    if size > width || size > height {
        return Err(SamplerError::ImageTooSmall {
            width,
            height,
            size,
        });
    }
    let mut out = Vec::with_capacity(2 * count_per_class);
    let mut found = [0usize; 2];
    let mut attempts = [0usize; 2];
    let cap = ATTEMPTS_PER_SAMPLE.saturating_mul(count_per_class);
    while found[0] < count_per_class || found[1] < count_per_class {
        for class in 0..2 {
            if found[class] < count_per_class {
                attempts[class] += 1;
                if attempts[class] > cap {
                    return Err(SamplerError::AttemptCapExceeded {
                        frame: annotation.frame_id.clone(),
                        class: if class == 0 { "positive" } else { "negative" },
                        attempts: cap,
                        found: found[class],
                        wanted: count_per_class,
                    });
                }
            }
        }
        let x = rng.gen_range(0..=width - size);
        let y = rng.gen_range(0..=height - size);
        let roi = Rect::square(x, y, size);
        let label = label_roi(roi, annotation)?;
        let class = usize::from(!label.is_positive());
        if found[class] == count_per_class {
            continue;
        }
        found[class] += 1;
        out.push(LabeledSample {
            features: frame.features(roi)?,
            label: Label::from_positive(label.is_positive()),
            provenance: label.provenance(),
            origin: Some(SampleOrigin { frame: frame_index, x, y }),
        });
    }
    Ok(out)
}
