//! Polygon predicates used for ROI labeling.
//!
//! Boundary points count as inside (even-odd rule otherwise). Rectangles are
//! treated as the closed region `[x, x+w] x [y, y+h]` in pixel coordinates.

use crate::imaging::Rect;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }
}

/// Closed, implicitly-closed ring of at least three vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Returns `None` for fewer than three vertices. Simplicity is checked
    /// separately by [`Polygon::is_simple`].
    pub fn new(vertices: Vec<Point>) -> Option<Polygon> {
        (vertices.len() >= 3).then_some(Polygon { vertices })
    }

    pub fn from_rect(rect: Rect) -> Polygon {
        let (x0, y0) = (rect.x as f64, rect.y as f64);
        let (x1, y1) = (rect.right() as f64, rect.bottom() as f64);
        Polygon {
            vertices: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }

    /// Even-odd containment; points on an edge count as inside.
    pub fn contains(&self, p: Point) -> bool {
        if self.edges().any(|(a, b)| on_segment(p, a, b)) {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// No two non-adjacent edges meet and no edge is degenerate.
    pub fn is_simple(&self) -> bool {
        let edges: Vec<_> = self.edges().collect();
        let n = edges.len();
        if edges.iter().any(|(a, b)| a == b) {
            return false;
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    // Adjacent edges may only share their common vertex.
                    if n > 3 && collinear_overlap(a, b, c, d) {
                        return false;
                    }
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

/// How a rectangle sits relative to a polygon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoiRelation {
    Outside,
    Partial,
    Inside,
}

/// `Inside` when the whole closed rectangle lies in the closed polygon,
/// `Outside` when they share no point, `Partial` otherwise.
pub fn rect_polygon_relation(roi: Rect, poly: &Polygon) -> RoiRelation {
    let (x0, y0) = (roi.x as f64, roi.y as f64);
    let (x1, y1) = (roi.right() as f64, roi.bottom() as f64);
    let center = Point::new((x0 + x1) / 2.0, (y0 + y1) / 2.0);

    let mut touches = false;
    let mut enters_interior = false;
    for (a, b) in poly.edges() {
        if let Some((p, q)) = clip_segment(a, b, x0, y0, x1, y1) {
            touches = true;
            // The clipped piece is convex; it reaches the open interior iff
            // its midpoint does.
            let m = Point::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0);
            if m.x > x0 && m.x < x1 && m.y > y0 && m.y < y1 {
                enters_interior = true;
                break;
            }
        }
    }

    let center_in = poly.contains(center);
    if !enters_interior && center_in {
        RoiRelation::Inside
    } else if !touches && !center_in {
        RoiRelation::Outside
    } else {
        RoiRelation::Partial
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    cross(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

/// Closed segments `ab` and `cd` share at least one point.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

fn collinear_overlap(a: Point, b: Point, c: Point, d: Point) -> bool {
    if cross(a, b, c) != 0.0 || cross(a, b, d) != 0.0 {
        return false;
    }
    // Shared endpoint only counts as overlap if the other endpoints fold back.
    let shared = if a == c || a == d {
        a
    } else if b == c || b == d {
        b
    } else {
        return segments_intersect(a, b, c, d);
    };
    let other1 = if a == shared { b } else { a };
    let other2 = if c == shared { d } else { c };
    let dot = (other1.x - shared.x) * (other2.x - shared.x) + (other1.y - shared.y) * (other2.y - shared.y);
    dot > 0.0
}

/// Liang-Barsky clip of segment `ab` against the closed box; `None` if the
/// segment misses it entirely.
fn clip_segment(a: Point, b: Point, x0: f64, y0: f64, x1: f64, y1: f64) -> Option<(Point, Point)> {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [
        (-dx, a.x - x0),
        (dx, x1 - a.x),
        (-dy, a.y - y0),
        (dy, y1 - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    let at = |t: f64| Point::new(a.x + t * dx, a.y + t * dy);
    Some((at(t0), at(t1)))
}
