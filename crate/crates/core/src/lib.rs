//! Road / non-road classification of gray-scale frames.
//!
//! Polygon-annotated frames are cut into square regions of interest, each
//! region is turned into a flat feature vector (pixels, intensity histogram,
//! gradient magnitudes and directions), and a cascade of AdaBoost stages over
//! depth-2 decision trees separates road from non-road. Trained cascades are
//! evaluated with ROC sweeps and rendered as sliding-window masks.

pub mod annotation;
pub mod boosting;
pub mod cascade;
pub mod config;
pub mod dataset;
pub mod evaluation;
pub mod features;
pub mod imaging;
pub mod model_io;
pub mod sampler;
pub mod synthdata;

pub use annotation::{FrameAnnotation, ObjectClass, Polygon, Provenance, RoiLabel, RoiRelation};
pub use boosting::{DecisionTree, Label, LabeledSample, StageConfig, StageModel};
pub use cascade::{CascadeConfig, CascadeModel};
pub use features::FeatureVector;
pub use imaging::{GradientField, GrayImage, Rect};
