//! Planar geometry: points, polygons and centerline paths built from
//! straight runs and circular arcs.

use std::f64::consts::PI;

/// Maximum deviation of a discretized arc from the true circle, µm.
pub const ARC_TOLERANCE_UM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn empty() -> Self {
        Self {
            min: Point::new(f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn include(&mut self, p: Point) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(mut self, o: &BBox) -> BBox {
        self.include(o.min);
        self.include(o.max);
        self
    }

    pub fn expand(&self, d: f64) -> BBox {
        BBox {
            min: Point::new(self.min.x - d, self.min.y - d),
            max: Point::new(self.max.x + d, self.max.y + d),
        }
    }

    pub fn intersects(&self, o: &BBox) -> bool {
        self.min.x < o.max.x && o.min.x < self.max.x && self.min.y < o.max.y && o.min.y < self.max.y
    }

    pub fn contains_box(&self, o: &BBox) -> bool {
        o.min.x >= self.min.x
            && o.max.x <= self.max.x
            && o.min.y >= self.min.y
            && o.max.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Simple polygon, counter-clockwise, closing edge implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub points: Vec<Point>,
}

impl Polygon {
    /// Builds a polygon, dropping repeated vertices and normalizing to CCW.
    pub fn new(mut points: Vec<Point>) -> Self {
        points.dedup_by(|a, b| a.dist(*b) < 1e-9);
        while points.len() > 1 && points[0].dist(*points.last().unwrap()) < 1e-9 {
            points.pop();
        }
        let mut poly = Self { points };
        if poly.signed_area() < 0.0 {
            poly.points.reverse();
        }
        poly
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        let mut a = 0.0;
        for i in 0..n {
            let p = self.points[i];
            let q = self.points[(i + 1) % n];
            a += p.x * q.y - q.x * p.y;
        }
        0.5 * a
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn bbox(&self) -> BBox {
        let mut b = BBox::empty();
        for &p in &self.points {
            b.include(p);
        }
        b
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    /// Even-odd containment; points on the boundary may go either way.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if x > p.x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// True if two non-adjacent edges cross or touch.
    pub fn self_intersects(&self) -> bool {
        let n = self.points.len();
        if n < 4 {
            return false;
        }
        let edges: Vec<(Point, Point, BBox)> = self
            .edges()
            .map(|(a, b)| {
                let mut bb = BBox::empty();
                bb.include(a);
                bb.include(b);
                (a, b, bb)
            })
            .collect();
        for i in 0..n {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b, ba) = &edges[i];
                let (c, d, bc) = &edges[j];
                if ba.expand(1e-12).intersects(&bc.expand(1e-12))
                    && segments_intersect(*a, *b, *c, *d)
                {
                    return true;
                }
            }
        }
        false
    }

    pub fn transformed(&self, t: &Transform) -> Polygon {
        Polygon::new(self.points.iter().map(|&p| t.apply(p)).collect())
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    p.x >= a.x.min(b.x) - 1e-12
        && p.x <= a.x.max(b.x) + 1e-12
        && p.y >= a.y.min(b.y) - 1e-12
        && p.y <= a.y.max(b.y) + 1e-12
}

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
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

pub fn segment_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Translation with an optional mirror about the local x axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub offset: Point,
    pub mirror_y: bool,
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            offset: Point::new(0.0, 0.0),
            mirror_y: false,
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        let y = if self.mirror_y { -p.y } else { p.y };
        Point::new(p.x + self.offset.x, y + self.offset.y)
    }

    pub fn apply_box(&self, b: &BBox) -> BBox {
        let mut out = BBox::empty();
        out.include(self.apply(b.min));
        out.include(self.apply(b.max));
        out
    }
}

/// Number of chords for an arc of `radius` sweeping `sweep` radians.
pub fn arc_chords(radius: f64, sweep: f64) -> usize {
    if radius <= ARC_TOLERANCE_UM {
        return ((sweep.abs() / (PI / 8.0)).ceil() as usize).max(1);
    }
    let step = 2.0 * (1.0 - ARC_TOLERANCE_UM / radius).acos();
    ((sweep.abs() / step).ceil() as usize).max(1)
}

/// Points on a circular arc, both ends included.
pub fn arc_points(center: Point, radius: f64, start: f64, sweep: f64) -> Vec<Point> {
    let n = arc_chords(radius, sweep);
    (0..=n)
        .map(|i| {
            let a = start + sweep * i as f64 / n as f64;
            Point::new(center.x + radius * a.cos(), center.y + radius * a.sin())
        })
        .collect()
}

/// One piece of a centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Line {
        start: Point,
        heading: f64,
        length: f64,
    },
    /// `sweep > 0` turns left (counter-clockwise).
    Arc {
        center: Point,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { length, .. } => length,
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn start(&self) -> Point {
        self.point_at(0.0, 0.0)
    }

    pub fn end(&self) -> Point {
        self.point_at(1.0, 0.0)
    }

    /// Heading (radians) at fraction `t` along the segment.
    pub fn heading_at(&self, t: f64) -> f64 {
        match *self {
            Segment::Line { heading, .. } => heading,
            Segment::Arc {
                start_angle, sweep, ..
            } => start_angle + sweep * t + sweep.signum() * PI / 2.0,
        }
    }

    /// Point at fraction `t`, displaced `offset` to the left of travel.
    pub fn point_at(&self, t: f64, offset: f64) -> Point {
        match *self {
            Segment::Line {
                start,
                heading,
                length,
            } => {
                let (s, c) = heading.sin_cos();
                Point::new(
                    start.x + length * t * c - offset * s,
                    start.y + length * t * s + offset * c,
                )
            }
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let r = radius - sweep.signum() * offset;
                let a = start_angle + sweep * t;
                Point::new(center.x + r * a.cos(), center.y + r * a.sin())
            }
        }
    }

    /// Polyline of the curve displaced `offset` to the left.
    pub fn offset_polyline(&self, offset: f64) -> Vec<Point> {
        match *self {
            Segment::Line { .. } => vec![self.point_at(0.0, offset), self.point_at(1.0, offset)],
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let r = radius - sweep.signum() * offset;
                arc_points(center, r, start_angle, sweep)
            }
        }
    }

    /// Region between two left offsets `lo < hi`.
    pub fn strip(&self, lo: f64, hi: f64) -> Polygon {
        let mut pts = self.offset_polyline(lo);
        let mut outer = self.offset_polyline(hi);
        outer.reverse();
        pts.extend(outer);
        Polygon::new(pts)
    }
}

/// Builds a centerline by walking forward and turning.
#[derive(Debug, Clone)]
pub struct Turtle {
    pub position: Point,
    pub heading: f64,
    pub segments: Vec<Segment>,
}

impl Turtle {
    pub fn new(position: Point, heading: f64) -> Self {
        Self {
            position,
            heading,
            segments: Vec::new(),
        }
    }

    pub fn forward(&mut self, length: f64) -> &mut Self {
        if length > 0.0 {
            let seg = Segment::Line {
                start: self.position,
                heading: self.heading,
                length,
            };
            self.position = seg.end();
            self.segments.push(seg);
        }
        self
    }

    /// Turn by `angle` radians (positive = left) along a radius.
    pub fn turn(&mut self, angle: f64, radius: f64) -> &mut Self {
        let side = angle.signum();
        let (s, c) = self.heading.sin_cos();
        let center = Point::new(
            self.position.x - side * radius * s,
            self.position.y + side * radius * c,
        );
        let start_angle = self.heading - side * PI / 2.0;
        let seg = Segment::Arc {
            center,
            radius,
            start_angle,
            sweep: angle,
        };
        self.position = seg.end();
        self.heading += angle;
        self.segments.push(seg);
        self
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }
}
