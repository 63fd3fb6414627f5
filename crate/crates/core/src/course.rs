//! Closed driving course: centreline polyline, road width and start pose.
//!
//! Course files are plain text:
//!
//! ```text
//! halfwidth 3.0
//! 0 -30
//! 3.12 -30
//! ...
//! ```
//!
//! The polyline is closed implicitly; `#` starts a comment.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector2;

use crate::geometry::Pose2D;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct Course {
    pub centerline: Vec<Vector2<f64>>,
    pub road_half_width: f64,
    pub start: Pose2D,
    cumulative: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct NearestPoint {
    pub distance: f64,
    /// Arc length of the foot point from the first vertex.
    pub s: f64,
    pub point: Vector2<f64>,
}

impl Course {
    pub fn new(centerline: Vec<Vector2<f64>>, road_half_width: f64) -> Result<Self> {
        if centerline.len() < 3 {
            return Err(Error::InvalidCourse("need at least 3 vertices".into()));
        }
        if !(road_half_width > 0.0) {
            return Err(Error::InvalidCourse("road half width must be positive".into()));
        }
        let n = centerline.len();
        if (0..n).any(|i| (centerline[(i + 1) % n] - centerline[i]).norm() == 0.0) {
            return Err(Error::InvalidCourse("repeated vertex".into()));
        }
        if self_intersects(&centerline) {
            return Err(Error::InvalidCourse("centerline self-intersects".into()));
        }
        let mut cumulative = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 0..n {
            acc += (centerline[(i + 1) % n] - centerline[i]).norm();
            cumulative.push(acc);
        }
        let d = centerline[1] - centerline[0];
        let start = Pose2D::new(centerline[0].x, centerline[0].y, d.y.atan2(d.x));
        Ok(Course { centerline, road_half_width, start, cumulative })
    }

    /// Built-in stadium loop: two 30 m radius turns joined by 31.2 m
    /// straights, about 251 m long, fitting in roughly 91 m x 60 m.
    pub fn default_course() -> Self {
        let radius = 30.0;
        let straight = 31.2;
        let half = straight / 2.0;
        let mut pts = Vec::new();
        let straight_steps = 10;
        let arc_steps = 72;
        // bottom straight, left to right, starting mid-way
        for i in 0..straight_steps / 2 {
            pts.push(Vector2::new(half * i as f64 / (straight_steps / 2) as f64, -radius));
        }
        for i in 0..arc_steps {
            let a = -PI / 2.0 + PI * i as f64 / arc_steps as f64;
            pts.push(Vector2::new(half + radius * a.cos(), radius * a.sin()));
        }
        for i in 0..straight_steps {
            pts.push(Vector2::new(half - straight * i as f64 / straight_steps as f64, radius));
        }
        for i in 0..arc_steps {
            let a = PI / 2.0 + PI * i as f64 / arc_steps as f64;
            pts.push(Vector2::new(-half + radius * a.cos(), radius * a.sin()));
        }
        for i in 0..straight_steps / 2 {
            pts.push(Vector2::new(-half + half * i as f64 / (straight_steps / 2) as f64, -radius));
        }
        Course::new(pts, 3.0).expect("built-in course is valid")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut half_width = None;
        let mut pts = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |r: &str| Error::parse(format!("course line {}", lineno + 1), r.to_string());
            if fields[0] == "halfwidth" {
                let v = fields.get(1).ok_or_else(|| bad("missing value"))?;
                half_width = Some(v.parse::<f64>().map_err(|e| bad(&e.to_string()))?);
                continue;
            }
            if fields.len() != 2 {
                return Err(bad("expected `x y`"));
            }
            let x = fields[0].parse::<f64>().map_err(|e| bad(&e.to_string()))?;
            let y = fields[1].parse::<f64>().map_err(|e| bad(&e.to_string()))?;
            pts.push(Vector2::new(x, y));
        }
        let hw = half_width.ok_or_else(|| Error::parse("course", "missing `halfwidth` header"))?;
        Course::new(pts, hw)
    }

    pub fn to_file_string(&self) -> String {
        let mut s = format!("halfwidth {}\n", self.road_half_width);
        for p in &self.centerline {
            let _ = writeln!(s, "{} {}", p.x, p.y);
        }
        s
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn bounding_box(&self) -> (Vector2<f64>, Vector2<f64>) {
        let mut lo = Vector2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vector2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.centerline {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    fn segment(&self, i: usize) -> (Vector2<f64>, Vector2<f64>) {
        let n = self.centerline.len();
        (self.centerline[i], self.centerline[(i + 1) % n])
    }

    /// Exact nearest point on the closed polyline.
    pub fn nearest(&self, p: Vector2<f64>) -> NearestPoint {
        let mut best = NearestPoint { distance: f64::INFINITY, s: 0.0, point: self.centerline[0] };
        for i in 0..self.centerline.len() {
            let (a, b) = self.segment(i);
            let ab = b - a;
            let len2 = ab.norm_squared();
            let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
            let foot = a + ab * t;
            let d = (p - foot).norm();
            if d < best.distance {
                best = NearestPoint { distance: d, s: self.cumulative[i] + t * len2.sqrt(), point: foot };
            }
        }
        best
    }

    pub fn distance_to_centerline(&self, p: Vector2<f64>) -> f64 {
        self.nearest(p).distance
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.rem_euclid(self.length());
        let i = self.cumulative.partition_point(|&c| c <= s).saturating_sub(1);
        let i = i.min(self.centerline.len() - 1);
        (i, s - self.cumulative[i])
    }

    pub fn point_at(&self, s: f64) -> Vector2<f64> {
        let (i, rem) = self.locate(s);
        let (a, b) = self.segment(i);
        a + (b - a).normalize() * rem
    }

    pub fn tangent_at(&self, s: f64) -> Vector2<f64> {
        let (i, _) = self.locate(s);
        let (a, b) = self.segment(i);
        (b - a).normalize()
    }
}

fn segments_cross(p1: Vector2<f64>, p2: Vector2<f64>, q1: Vector2<f64>, q2: Vector2<f64>) -> bool {
    let cross = |o: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>| (a - o).perp(&(b - o));
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    ((d1 > 0.0) != (d2 > 0.0)) && ((d3 > 0.0) != (d4 > 0.0)) && d1 != 0.0 && d2 != 0.0 && d3 != 0.0 && d4 != 0.0
}

fn self_intersects(pts: &[Vector2<f64>]) -> bool {
    let n = pts.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_course_dimensions() {
        let c = Course::default_course();
        let len = c.length();
        assert!((237.5..=262.5).contains(&len), "length {len}");
        let (lo, hi) = c.bounding_box();
        let size = hi - lo;
        assert!(size.x <= 120.0 && size.y <= 80.0, "bbox {size:?}");
    }

    #[test]
    fn start_pose_on_centerline_and_tangent() {
        let c = Course::default_course();
        assert!(c.distance_to_centerline(c.start.position()) < 1e-12);
        let t = c.tangent_at(0.0);
        assert!((c.start.heading - t.y.atan2(t.x)).abs() < 1e-12);
    }

    #[test]
    fn file_round_trip() {
        let c = Course::default_course();
        let parsed = Course::parse(&c.to_file_string()).unwrap();
        assert_eq!(parsed.centerline, c.centerline);
        assert_eq!(parsed.road_half_width, c.road_half_width);
    }

    #[test]
    fn parse_errors() {
        assert!(Course::parse("0 0\n1 0\n1 1\n").is_err());
        assert!(Course::parse("halfwidth 2\n0 0\n1 0\n").is_err());
        assert!(Course::parse("halfwidth 2\n0 0\n1 0\nfoo 1\n").is_err());
        // bow tie
        assert!(matches!(Course::parse("halfwidth 2\n0 0\n1 1\n1 0\n0 1\n"), Err(Error::InvalidCourse(_))));
        assert!(Course::parse("# square\nhalfwidth 2\n0 0\n10 0\n10 10\n0 10\n").is_ok());
    }

    #[test]
    fn nearest_on_square() {
        let c = Course::parse("halfwidth 2\n0 0\n10 0\n10 10\n0 10\n").unwrap();
        let n = c.nearest(Vector2::new(3.0, 1.0));
        assert!((n.distance - 1.0).abs() < 1e-12);
        assert!((n.s - 3.0).abs() < 1e-12);
        let n = c.nearest(Vector2::new(12.0, 12.0));
        assert!((n.distance - 8f64.sqrt()).abs() < 1e-12);
        assert!((c.point_at(45.0) - Vector2::new(5.0, 0.0)).norm() < 1e-12);
        assert!((c.point_at(-5.0) - Vector2::new(0.0, 5.0)).norm() < 1e-12);
    }
}
