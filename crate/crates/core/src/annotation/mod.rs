//! Per-frame polygon annotations, their XML persistence, and the rules that
//! turn an ROI into a positive (road) or negative training example.

mod geometry;
mod xml;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::imaging::Rect;

pub use geometry::{rect_polygon_relation, segments_intersect, Point, Polygon, RoiRelation};
pub use xml::{parse_annotation_xml, serialize_annotation_xml};

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("unknown object class {0:?}")]
    UnknownClass(String),
    #[error("frame {frame}: polygon has {count} vertices, at least 3 required")]
    TooFewVertices { frame: String, count: usize },
    #[error("frame {frame}: polygon is not simple")]
    SelfIntersecting { frame: String },
    #[error("frame {frame}: vertex ({x}, {y}) lies outside the {width}x{height} frame")]
    VertexOutOfBounds {
        frame: String,
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("frame {0}: more than one road polygon")]
    MultipleRoads(String),
    #[error("frame {0}: no road polygon")]
    MissingRoad(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectClass {
    Road,
    LaneMarker,
    Pedestrian,
    Car,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 4] = [
        ObjectClass::Road,
        ObjectClass::LaneMarker,
        ObjectClass::Pedestrian,
        ObjectClass::Car,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::Road => "road",
            ObjectClass::LaneMarker => "lane_marker",
            ObjectClass::Pedestrian => "pedestrian",
            ObjectClass::Car => "car",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObjectClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| AnnotationError::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedObject {
    pub class: ObjectClass,
    pub polygon: Polygon,
}

/// Labeled polygons for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnnotation {
    pub frame_id: String,
    pub image_ref: String,
    pub width: usize,
    pub height: usize,
    pub objects: Vec<AnnotatedObject>,
}

impl FrameAnnotation {
    /// Checks the frame-level invariants: simple polygons, vertices inside
    /// `[0, width] x [0, height]`, and at most one road.
    pub fn validate(&self) -> Result<(), AnnotationError> {
        let mut roads = 0;
        for obj in &self.objects {
            if obj.class == ObjectClass::Road {
                roads += 1;
            }
            for p in obj.polygon.vertices() {
                let inside = p.x >= 0.0
                    && p.y >= 0.0
                    && p.x <= self.width as f64
                    && p.y <= self.height as f64;
                if !inside {
                    return Err(AnnotationError::VertexOutOfBounds {
                        frame: self.frame_id.clone(),
                        x: p.x,
                        y: p.y,
                        width: self.width,
                        height: self.height,
                    });
                }
            }
            if !obj.polygon.is_simple() {
                return Err(AnnotationError::SelfIntersecting {
                    frame: self.frame_id.clone(),
                });
            }
        }
        if roads > 1 {
            return Err(AnnotationError::MultipleRoads(self.frame_id.clone()));
        }
        Ok(())
    }

    pub fn road(&self) -> Option<&Polygon> {
        self.polygons(ObjectClass::Road).next()
    }

    pub fn polygons(&self, class: ObjectClass) -> impl Iterator<Item = &Polygon> {
        self.objects
            .iter()
            .filter(move |o| o.class == class)
            .map(|o| &o.polygon)
    }
}

/// Why an ROI received its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    PureRoad,
    OffRoad,
    MixedBoundary,
    CarOverlap,
}

impl Provenance {
    pub const ALL: [Provenance; 4] = [
        Provenance::PureRoad,
        Provenance::OffRoad,
        Provenance::MixedBoundary,
        Provenance::CarOverlap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::PureRoad => "pure_road",
            Provenance::OffRoad => "off_road",
            Provenance::MixedBoundary => "mixed_boundary",
            Provenance::CarOverlap => "car_overlap",
        }
    }
}

/// Binary class of an ROI together with its provenance. Only `PureRoad`
/// ROIs are positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoiLabel {
    provenance: Provenance,
}

impl RoiLabel {
    pub fn from_provenance(provenance: Provenance) -> RoiLabel {
        RoiLabel { provenance }
    }

    pub fn is_positive(self) -> bool {
        self.provenance == Provenance::PureRoad
    }

    pub fn provenance(self) -> Provenance {
        self.provenance
    }
}

/// Labels an ROI against the frame's road and car polygons. Lane markers and
/// pedestrians do not take part.
pub fn label_roi(roi: Rect, frame: &FrameAnnotation) -> Result<RoiLabel, AnnotationError> {
    let road = frame
        .road()
        .ok_or_else(|| AnnotationError::MissingRoad(frame.frame_id.clone()))?;
    Ok(RoiLabel::from_provenance(label_against(roi, road, frame)))
}

fn label_against(roi: Rect, road: &Polygon, frame: &FrameAnnotation) -> Provenance {
    match rect_polygon_relation(roi, road) {
        RoiRelation::Outside => Provenance::OffRoad,
        RoiRelation::Partial => Provenance::MixedBoundary,
        RoiRelation::Inside => {
            let hits_car = frame
                .polygons(ObjectClass::Car)
                .any(|car| rect_polygon_relation(roi, car) != RoiRelation::Outside);
            if hits_car {
                Provenance::CarOverlap
            } else {
                Provenance::PureRoad
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_poly(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
        .unwrap()
    }

    fn frame(objects: Vec<(ObjectClass, Polygon)>) -> FrameAnnotation {
        FrameAnnotation {
            frame_id: "f".into(),
            image_ref: "f.pgm".into(),
            width: 200,
            height: 200,
            objects: objects
                .into_iter()
                .map(|(class, polygon)| AnnotatedObject { class, polygon })
                .collect(),
        }
    }

    #[test]
    fn label_table() {
        let road = rect_poly(0.0, 100.0, 200.0, 200.0);
        let f = frame(vec![
            (ObjectClass::Road, road),
            (ObjectClass::Car, rect_poly(120.0, 150.0, 160.0, 180.0)),
            (ObjectClass::LaneMarker, rect_poly(10.0, 120.0, 14.0, 190.0)),
            (ObjectClass::Pedestrian, rect_poly(60.0, 110.0, 70.0, 140.0)),
        ]);
        let cases = [
            (Rect::new(20, 150, 15, 15), true, Provenance::PureRoad),
            (Rect::new(130, 160, 15, 15), false, Provenance::CarOverlap),
            // touching the car's left edge counts as overlap
            (Rect::new(105, 150, 15, 15), false, Provenance::CarOverlap),
            (Rect::new(20, 90, 15, 15), false, Provenance::MixedBoundary),
            (Rect::new(20, 20, 15, 15), false, Provenance::OffRoad),
            // lane markers and pedestrians are ignored
            (Rect::new(5, 130, 15, 15), true, Provenance::PureRoad),
            (Rect::new(58, 115, 15, 15), true, Provenance::PureRoad),
        ];
        for (roi, positive, provenance) in cases {
            let label = label_roi(roi, &f).unwrap();
            assert_eq!(label.provenance(), provenance, "roi {roi}");
            assert_eq!(label.is_positive(), positive, "roi {roi}");
        }
    }

    #[test]
    fn missing_road_is_an_error() {
        let f = frame(vec![(ObjectClass::Car, rect_poly(0.0, 0.0, 10.0, 10.0))]);
        assert_eq!(
            label_roi(Rect::new(0, 0, 5, 5), &f),
            Err(AnnotationError::MissingRoad("f".into()))
        );
    }

    #[test]
    fn validate_catches_invariants() {
        let f = frame(vec![
            (ObjectClass::Road, rect_poly(0.0, 0.0, 10.0, 10.0)),
            (ObjectClass::Road, rect_poly(20.0, 20.0, 30.0, 30.0)),
        ]);
        assert_eq!(f.validate(), Err(AnnotationError::MultipleRoads("f".into())));
        let f = frame(vec![(ObjectClass::Road, rect_poly(0.0, 0.0, 210.0, 10.0))]);
        assert!(matches!(f.validate(), Err(AnnotationError::VertexOutOfBounds { .. })));
    }

    #[test]
    fn class_names() {
        for c in ObjectClass::ALL {
            assert_eq!(c.as_str().parse::<ObjectClass>().unwrap(), c);
        }
        assert_eq!(
            "bicycle".parse::<ObjectClass>(),
            Err(AnnotationError::UnknownClass("bicycle".into()))
        );
    }
}
