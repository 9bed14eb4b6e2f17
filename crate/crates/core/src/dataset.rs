//! Annotated corpora on disk: one `annotations.xml` next to the PGM frames
//! it references.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::annotation::{parse_annotation_xml, serialize_annotation_xml, AnnotationError, FrameAnnotation};
use crate::features::PreparedFrame;
use crate::imaging::{GrayImage, ImageError};
use crate::sampler::{split_indices, SamplerError, FrameSplit};

pub const ANNOTATION_FILE: &str = "annotations.xml";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: ImageError,
    },
    #[error("{path}: {source}")]
    Annotation {
        path: PathBuf,
        #[source]
        source: AnnotationError,
    },
    #[error("{path}: image is {found_w}x{found_h}, annotation says {want_w}x{want_h}")]
    SizeMismatch {
        path: PathBuf,
        found_w: usize,
        found_h: usize,
        want_w: usize,
        want_h: usize,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One annotated frame with its gradients precomputed. `index` is the
/// frame's position in the corpus file.
#[derive(Debug, Clone)]
pub struct Frame {
    pub index: usize,
    pub annotation: FrameAnnotation,
    pub prepared: PreparedFrame,
}

impl Frame {
    pub fn new(index: usize, annotation: FrameAnnotation, image: GrayImage) -> Frame {
        Frame {
            index,
            annotation,
            prepared: PreparedFrame::new(image),
        }
    }

    pub fn image(&self) -> &GrayImage {
        &self.prepared.image
    }
}

pub fn read_image(path: &Path) -> Result<GrayImage, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    GrayImage::load_pgm(&bytes).map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_image(path: &Path, img: &GrayImage) -> Result<(), DatasetError> {
    fs::write(path, img.save_pgm()).map_err(io_err(path))
}

pub fn read_annotations(dir: &Path) -> Result<Vec<FrameAnnotation>, DatasetError> {
    let path = dir.join(ANNOTATION_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    parse_annotation_xml(&text).map_err(|source| DatasetError::Annotation { path, source })
}

/// Loads every frame listed in `dir/annotations.xml`.
pub fn load_dataset(dir: &Path) -> Result<Vec<Frame>, DatasetError> {
    read_annotations(dir)?
        .into_iter()
        .enumerate()
        .map(|(index, annotation)| {
            let path = dir.join(&annotation.image_ref);
            let image = read_image(&path)?;
            if image.width() != annotation.width || image.height() != annotation.height {
                return Err(DatasetError::SizeMismatch {
                    path,
                    found_w: image.width(),
                    found_h: image.height(),
                    want_w: annotation.width,
                    want_h: annotation.height,
                });
            }
            Ok(Frame::new(index, annotation, image))
        })
        .collect()
}

/// Writes each image under its `image_ref` plus the shared annotation file.
pub fn save_dataset(dir: &Path, frames: &[(FrameAnnotation, GrayImage)]) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (ann, img) in frames {
        write_image(&dir.join(&ann.image_ref), img)?;
    }
    let annotations: Vec<FrameAnnotation> = frames.iter().map(|(a, _)| a.clone()).collect();
    let path = dir.join(ANNOTATION_FILE);
    fs::write(&path, serialize_annotation_xml(&annotations)).map_err(io_err(&path))
}

/// Moves `frames` into the seeded train/test split of [`split_indices`].
pub fn split_dataset(frames: Vec<Frame>, plan: FrameSplit) -> Result<(Vec<Frame>, Vec<Frame>), SamplerError> {
    let (train, test) = split_indices(frames.len(), plan)?;
    let mut slots: Vec<Option<Frame>> = frames.into_iter().map(Some).collect();
    let mut take = |ix: Vec<usize>| -> Vec<Frame> { ix.into_iter().filter_map(|i| slots[i].take()).collect() };
    let train = take(train);
    let test = take(test);
    Ok((train, test))
}
