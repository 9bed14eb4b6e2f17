//! Annotation XML:
//!
//! ```xml
//! <dataset>
//!   <frame id="..." image="..." width="640" height="480">
//!     <object class="road|lane_marker|pedestrian|car">
//!       <pt x="..." y="..."/>
//!     </object>
//!   </frame>
//! </dataset>
//! ```
//!
//! Coordinates are decimal pixels with a top-left origin, written with six
//! decimal places.

use std::fmt::Write as _;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{AnnotatedObject, AnnotationError, FrameAnnotation, ObjectClass, Point, Polygon};

pub fn parse_annotation_xml(text: &str) -> Result<Vec<FrameAnnotation>, AnnotationError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);

    let mut frames = Vec::new();
    let mut seen_dataset = false;
    let mut frame: Option<FrameAnnotation> = None;
    let mut object: Option<(ObjectClass, Vec<Point>)> = None;

    loop {
        let event = reader.read_event().map_err(malformed)?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                match e.name().as_ref() {
                    b"dataset" if !seen_dataset => seen_dataset = true,
                    b"frame" if seen_dataset && frame.is_none() => {
                        let f = FrameAnnotation {
                            frame_id: attr(e, "id")?,
                            image_ref: attr(e, "image")?,
                            width: parse_num(&attr(e, "width")?, "width")?,
                            height: parse_num(&attr(e, "height")?, "height")?,
                            objects: Vec::new(),
                        };
                        if empty {
                            frames.push(finish_frame(f)?);
                        } else {
                            frame = Some(f);
                        }
                    }
                    b"object" if frame.is_some() && object.is_none() => {
                        let class: ObjectClass = attr(e, "class")?.parse()?;
                        object = Some((class, Vec::new()));
                        if empty {
                            close_object(&mut frame, &mut object)?;
                        }
                    }
                    b"pt" if object.is_some() => {
                        let x = parse_num(&attr(e, "x")?, "x")?;
                        let y = parse_num(&attr(e, "y")?, "y")?;
                        // A non-empty <pt></pt> is tolerated; its End event is ignored.
                        object.as_mut().unwrap().1.push(Point::new(x, y));
                    }
                    other => {
                        return Err(AnnotationError::MalformedXml(format!(
                            "unexpected element <{}>",
                            String::from_utf8_lossy(other)
                        )))
                    }
                }
            }
            Event::End(ref e) => match e.name().as_ref() {
                b"object" => close_object(&mut frame, &mut object)?,
                b"frame" => {
                    let f = frame.take().ok_or_else(|| malformed("stray </frame>"))?;
                    frames.push(finish_frame(f)?);
                }
                b"dataset" | b"pt" => {}
                _ => return Err(malformed("unexpected closing tag")),
            },
            Event::Text(ref t) => {
                let t = t.unescape().map_err(malformed)?;
                if !t.trim().is_empty() {
                    return Err(malformed("unexpected text content"));
                }
            }
            Event::Eof => break,
            // Declarations, comments, processing instructions.
            _ => {}
        }
    }
    if !seen_dataset {
        return Err(malformed("missing <dataset> root"));
    }
    if frame.is_some() || object.is_some() {
        return Err(malformed("unterminated element"));
    }
    Ok(frames)
}

pub fn serialize_annotation_xml(frames: &[FrameAnnotation]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<dataset>\n");
    for f in frames {
        let _ = writeln!(
            out,
            "  <frame id=\"{}\" image=\"{}\" width=\"{}\" height=\"{}\">",
            escape(f.frame_id.as_str()),
            escape(f.image_ref.as_str()),
            f.width,
            f.height
        );
        for obj in &f.objects {
            let _ = writeln!(out, "    <object class=\"{}\">", obj.class);
            for p in obj.polygon.vertices() {
                let _ = writeln!(out, "      <pt x=\"{:.6}\" y=\"{:.6}\"/>", p.x, p.y);
            }
            out.push_str("    </object>\n");
        }
        out.push_str("  </frame>\n");
    }
    out.push_str("</dataset>\n");
    out
}

fn malformed(e: impl std::fmt::Display) -> AnnotationError {
    AnnotationError::MalformedXml(e.to_string())
}

fn attr(e: &BytesStart<'_>, name: &str) -> Result<String, AnnotationError> {
    let a = e
        .try_get_attribute(name)
        .map_err(malformed)?
        .ok_or_else(|| {
            malformed(format!(
                "<{}> lacks attribute {name:?}",
                String::from_utf8_lossy(e.name().as_ref())
            ))
        })?;
    Ok(a.unescape_value().map_err(malformed)?.into_owned())
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, AnnotationError> {
    s.trim()
        .parse()
        .map_err(|_| malformed(format!("invalid {what} value {s:?}")))
}

fn close_object(
    frame: &mut Option<FrameAnnotation>,
    object: &mut Option<(ObjectClass, Vec<Point>)>,
) -> Result<(), AnnotationError> {
    let (class, pts) = object.take().ok_or_else(|| malformed("stray </object>"))?;
    let frame = frame.as_mut().ok_or_else(|| malformed("object outside frame"))?;
    let count = pts.len();
    let polygon = Polygon::new(pts).ok_or_else(|| AnnotationError::TooFewVertices {
        frame: frame.frame_id.clone(),
        count,
    })?;
    frame.objects.push(AnnotatedObject { class, polygon });
    Ok(())
}

fn finish_frame(f: FrameAnnotation) -> Result<FrameAnnotation, AnnotationError> {
    if f.width == 0 || f.height == 0 {
        return Err(malformed(format!("frame {} has zero size", f.frame_id)));
    }
    f.validate()?;
    Ok(f)
}
