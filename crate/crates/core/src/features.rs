//! ROI feature vectors.
//!
//! Layout for a `w x h` ROI, `3wh + 256` values in total:
//!
//! | block                | length | range      |
//! |----------------------|--------|------------|
//! | normalized pixels    | `w*h`  | `[0, 1]`   |
//! | intensity histogram  | 256    | sums to 1  |
//! | gradient magnitudes  | `w*h`  | `>= 0`     |
//! | gradient directions  | `w*h`  | `(-pi, pi]`|
//!
//! Pixel and gradient blocks are row-major. Gradients come from the
//! full-frame field so ROI borders see their true neighbours.

use thiserror::Error;

use crate::imaging::{intensity_histogram, normalize, GradientField, GrayImage, ImageError, Rect, LEVELS};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("gradient field is {grad_w}x{grad_h} but image is {img_w}x{img_h}")]
    GradientMismatch {
        img_w: usize,
        img_h: usize,
        grad_w: usize,
        grad_h: usize,
    },
}

/// Number of features for a `w x h` ROI.
pub const fn feature_dim(w: usize, h: usize) -> usize {
    3 * w * h + LEVELS
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    roi_w: usize,
    roi_h: usize,
}

impl FeatureVector {
    /// Wraps raw values; `None` unless the length is `3*roi_w*roi_h + 256`.
    pub fn from_values(values: Vec<f64>, roi_w: usize, roi_h: usize) -> Option<FeatureVector> {
        (values.len() == feature_dim(roi_w, roi_h)).then_some(FeatureVector {
            values,
            roi_w,
            roi_h,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn roi_size(&self) -> (usize, usize) {
        (self.roi_w, self.roi_h)
    }

    fn area(&self) -> usize {
        self.roi_w * self.roi_h
    }

    pub fn pixels(&self) -> &[f64] {
        &self.values[..self.area()]
    }

    pub fn histogram(&self) -> &[f64] {
        &self.values[self.area()..self.area() + LEVELS]
    }

    pub fn magnitudes(&self) -> &[f64] {
        let start = self.area() + LEVELS;
        &self.values[start..start + self.area()]
    }

    pub fn directions(&self) -> &[f64] {
        &self.values[2 * self.area() + LEVELS..]
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

pub fn extract_features(
    img: &GrayImage,
    grad: &GradientField,
    roi: Rect,
) -> Result<FeatureVector, FeatureError> {
    if grad.width() != img.width() || grad.height() != img.height() {
        return Err(FeatureError::GradientMismatch {
            img_w: img.width(),
            img_h: img.height(),
            grad_w: grad.width(),
            grad_h: grad.height(),
        });
    }
    img.check_rect(roi)?;

    let mut values = Vec::with_capacity(feature_dim(roi.w, roi.h));
    let rows = roi.y..roi.bottom();
    for y in rows.clone() {
        values.extend((roi.x..roi.right()).map(|x| normalize(img.get(x, y))));
    }
    values.extend_from_slice(&intensity_histogram(img, roi)?);
    for y in rows.clone() {
        values.extend((roi.x..roi.right()).map(|x| grad.magnitude(x, y)));
    }
    for y in rows {
        values.extend((roi.x..roi.right()).map(|x| grad.direction(x, y)));
    }
    Ok(FeatureVector {
        values,
        roi_w: roi.w,
        roi_h: roi.h,
    })
}

/// Gray image plus its gradient field, computed once per frame.
#[derive(Debug, Clone)]
pub struct PreparedFrame {
    pub image: GrayImage,
    pub gradients: GradientField,
}

impl PreparedFrame {
    pub fn new(image: GrayImage) -> PreparedFrame {
        let gradients = GradientField::compute(&image);
        PreparedFrame { image, gradients }
    }

    pub fn features(&self, roi: Rect) -> Result<FeatureVector, FeatureError> {
        extract_features(&self.image, &self.gradients, roi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn noisy(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.gen()).unwrap()
    }

    #[test]
    fn dimensions() {
        let frame = PreparedFrame::new(noisy(40, 30, 1));
        assert_eq!(frame.features(Rect::square(3, 4, 15)).unwrap().len(), 931);
        assert_eq!(frame.features(Rect::square(0, 0, 1)).unwrap().len(), 259);
    }

    #[test]
    fn constant_roi() {
        let frame = PreparedFrame::new(GrayImage::filled(20, 20, 100).unwrap());
        let fv = frame.features(Rect::square(2, 3, 15)).unwrap();
        assert!(fv.pixels().iter().all(|&v| v == 100.0 / 255.0));
        assert_eq!(fv.histogram()[100], 1.0);
        assert_eq!(fv.histogram().iter().filter(|&&v| v != 0.0).count(), 1);
        assert!(fv.magnitudes().iter().all(|&v| v == 0.0));
        assert!(fv.directions().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors() {
        let frame = PreparedFrame::new(noisy(10, 10, 2));
        assert!(matches!(
            frame.features(Rect::square(0, 0, 11)),
            Err(FeatureError::Image(ImageError::OutOfBounds { .. }))
        ));
        let other = GradientField::compute(&noisy(9, 10, 3));
        assert!(matches!(
            extract_features(&frame.image, &other, Rect::square(0, 0, 3)),
            Err(FeatureError::GradientMismatch { .. })
        ));
    }

    #[test]
    fn gradients_are_cropped_from_the_full_field() {
        // A vertical step just left of the ROI shows up in its first column.
        let img = GrayImage::from_fn(10, 5, |x, _| if x < 3 { 0 } else { 255 }).unwrap();
        let frame = PreparedFrame::new(img);
        let fv = frame.features(Rect::new(3, 0, 4, 4)).unwrap();
        assert!(fv.magnitudes()[0] > 0.0);
        let cropped = PreparedFrame::new(frame.image.crop(Rect::new(3, 0, 4, 4)).unwrap());
        assert_eq!(cropped.gradients.magnitude(0, 0), 0.0);
    }

    proptest! {
        #[test]
        fn length_and_ranges(w in 1usize..=32, h in 1usize..=32, seed in any::<u64>()) {
            let frame = PreparedFrame::new(noisy(w + 3, h + 2, seed));
            let fv = frame.features(Rect::new(1, 1, w, h)).unwrap();
            prop_assert_eq!(fv.len(), 3 * w * h + 256);
            prop_assert!(fv.pixels().iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((fv.histogram().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(fv.magnitudes().iter().all(|&v| v >= 0.0));
            prop_assert!(fv.directions().iter().all(|&v| v > -PI && v <= PI));
            let again = frame.features(Rect::new(1, 1, w, h)).unwrap();
            prop_assert!(fv.values().iter().zip(again.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }

        #[test]
        fn histogram_is_permutation_invariant(seed in any::<u64>(), swap_seed in any::<u64>()) {
            let img = noisy(6, 6, seed);
            let mut shuffled = img.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(swap_seed);
            for _ in 0..10 {
                let (a, b) = ((rng.gen_range(0..6), rng.gen_range(0..6)), (rng.gen_range(0..6), rng.gen_range(0..6)));
                let (va, vb) = (shuffled.get(a.0, a.1), shuffled.get(b.0, b.1));
                shuffled.set(a.0, a.1, vb);
                shuffled.set(b.0, b.1, va);
            }
            let roi = Rect::square(0, 0, 6);
            let f1 = PreparedFrame::new(img).features(roi).unwrap();
            let f2 = PreparedFrame::new(shuffled).features(roi).unwrap();
            prop_assert_eq!(f1.histogram(), f2.histogram());
        }
    }
}
