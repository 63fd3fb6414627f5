//! Flat-ground scene description and a minimal software rasterizer.
//!
//! Ground primitives are filled polygons in the z = 0 plane; painted lines
//! are expanded into thin ground quads so they foreshorten correctly.
//! Landmarks are vertical quads drawn after the ground, far to near.

use nalgebra::{Vector2, Vector3};

use crate::course::Course;
use crate::frame::{fill_polygon_row, Frame, Rgb};
use crate::geometry::{CameraIntrinsics, CameraPose, Pixel, EPS_NEAR};
use crate::par::{self, Exec};

#[derive(Clone, Debug)]
pub struct GroundPolygon {
    pub points: Vec<Vector2<f64>>,
    pub color: Rgb,
}

#[derive(Clone, Debug)]
pub struct GroundLine {
    pub points: Vec<Vector2<f64>>,
    /// Painted width in metres.
    pub width: f64,
    pub closed: bool,
    pub color: Rgb,
}

/// Vertical quad standing on the ground segment `a`–`b`.
#[derive(Clone, Debug)]
pub struct Landmark {
    pub a: Vector2<f64>,
    pub b: Vector2<f64>,
    pub height: f64,
    pub color: Rgb,
}

#[derive(Clone, Debug)]
pub struct SceneModel {
    pub background: Rgb,
    pub polygons: Vec<GroundPolygon>,
    pub lines: Vec<GroundLine>,
    pub landmarks: Vec<Landmark>,
}

impl Default for SceneModel {
    fn default() -> Self {
        SceneModel { background: Rgb::SKY, polygons: Vec::new(), lines: Vec::new(), landmarks: Vec::new() }
    }
}

impl SceneModel {
    /// Grass, road surface, dashed centreline, edge lines and alternating
    /// marker posts along both road edges.
    pub fn from_course(course: &Course) -> Self {
        let (lo, hi) = course.bounding_box();
        let pad = 80.0;
        let grass = GroundPolygon {
            points: vec![
                Vector2::new(lo.x - pad, lo.y - pad),
                Vector2::new(hi.x + pad, lo.y - pad),
                Vector2::new(hi.x + pad, hi.y + pad),
                Vector2::new(lo.x - pad, hi.y + pad),
            ],
            color: Rgb::GRASS,
        };
        let mut polygons = vec![grass];
        polygons.extend(strip_quads(&course.centerline, course.road_half_width * 2.0, true, Rgb::ROAD));

        let left = offset_polyline(&course.centerline, course.road_half_width - 0.25);
        let right = offset_polyline(&course.centerline, -(course.road_half_width - 0.25));
        let mut lines = vec![
            GroundLine { points: left, width: 0.15, closed: true, color: Rgb::PAINT },
            GroundLine { points: right, width: 0.15, closed: true, color: Rgb::PAINT },
        ];
        let length = course.length();
        let dash = 3.0;
        let mut s = 0.0;
        while s + dash < length {
            let pts: Vec<_> = (0..=3).map(|i| course.point_at(s + dash * i as f64 / 3.0)).collect();
            lines.push(GroundLine { points: pts, width: 0.15, closed: false, color: Rgb::PAINT });
            s += 2.0 * dash;
        }

        let mut landmarks = Vec::new();
        let spacing = 12.0;
        let n = (length / spacing).floor() as usize;
        for i in 0..n {
            let s = i as f64 * spacing;
            let p = course.point_at(s);
            let t = course.tangent_at(s);
            let normal = Vector2::new(-t.y, t.x);
            let color = if i % 2 == 0 { Rgb::POST_RED } else { Rgb::POST_ORANGE };
            for side in [1.0, -1.0] {
                let base = p + normal * side * (course.road_half_width + 1.5);
                landmarks.push(Landmark { a: base - t * 0.2, b: base + t * 0.2, height: 1.5, color });
            }
        }
        SceneModel { background: Rgb::SKY, polygons, lines, landmarks }
    }
}

/// Offsets a closed polyline sideways (positive = left) with mitred joints.
pub(crate) fn offset_polyline(points: &[Vector2<f64>], offset: f64) -> Vec<Vector2<f64>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let prev = points[(i + n - 1) % n];
            let next = points[(i + 1) % n];
            let d_in = (points[i] - prev).normalize();
            let d_out = (next - points[i]).normalize();
            let n_in = Vector2::new(-d_in.y, d_in.x);
            let n_out = Vector2::new(-d_out.y, d_out.x);
            let miter = (n_in + n_out).normalize();
            let scale = 1.0 / miter.dot(&n_out).max(0.25);
            points[i] + miter * offset * scale
        })
        .collect()
}

fn strip_quads(points: &[Vector2<f64>], width: f64, closed: bool, color: Rgb) -> Vec<GroundPolygon> {
    let half = 0.5 * width;
    let (left, right) = if closed {
        (offset_polyline(points, half), offset_polyline(points, -half))
    } else {
        let n = points.len();
        let normals: Vec<_> = (0..n)
            .map(|i| {
                let d = if i + 1 < n { points[i + 1] - points[i] } else { points[i] - points[i - 1] };
                let d = d.normalize();
                Vector2::new(-d.y, d.x)
            })
            .collect();
        (
            points.iter().zip(&normals).map(|(p, nrm)| p + nrm * half).collect(),
            points.iter().zip(&normals).map(|(p, nrm)| p - nrm * half).collect(),
        )
    };
    let n = points.len();
    let segs = if closed { n } else { n.saturating_sub(1) };
    (0..segs)
        .map(|i| {
            let j = (i + 1) % n;
            GroundPolygon { points: vec![left[i], left[j], right[j], right[i]], color }
        })
        .collect()
}

/// Sutherland–Hodgman clip of a camera-frame polygon to `z >= EPS_NEAR`.
fn clip_polygon_near(poly: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (a_in, b_in) = (a.z >= EPS_NEAR, b.z >= EPS_NEAR);
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (EPS_NEAR - a.z) / (b.z - a.z);
            let mut m = a + (b - a) * t;
            m.z = EPS_NEAR;
            out.push(m);
        }
    }
    out
}

struct ScreenPolygon {
    points: Vec<Pixel>,
    y_min: f64,
    y_max: f64,
    color: Rgb,
}

fn to_screen(
    camera: &CameraPose,
    intr: &CameraIntrinsics,
    world: &[Vector3<f64>],
    color: Rgb,
) -> Option<ScreenPolygon> {
    let cam: Vec<_> = world.iter().map(|p| camera.to_camera(p)).collect();
    let clipped = clip_polygon_near(&cam);
    if clipped.len() < 3 {
        return None;
    }
    let points: Vec<Pixel> = clipped.iter().filter_map(|p| intr.project_camera(p)).collect();
    let y_min = points.iter().map(|p| p.v).fold(f64::INFINITY, f64::min);
    let y_max = points.iter().map(|p| p.v).fold(f64::NEG_INFINITY, f64::max);
    if y_max < 0.0 || y_min > intr.height as f64 {
        return None;
    }
    Some(ScreenPolygon { points, y_min, y_max, color })
}

pub fn render_scene(camera: &CameraPose, intr: &CameraIntrinsics, scene: &SceneModel) -> Frame {
    render_scene_with(camera, intr, scene, Exec::default())
}

/// Renders with an explicit execution strategy; output is identical for
/// both strategies.
pub fn render_scene_with(camera: &CameraPose, intr: &CameraIntrinsics, scene: &SceneModel, exec: Exec) -> Frame {
    let lift = |p: &Vector2<f64>| Vector3::new(p.x, p.y, 0.0);
    let mut screen: Vec<ScreenPolygon> = Vec::new();
    for poly in &scene.polygons {
        let world: Vec<_> = poly.points.iter().map(lift).collect();
        screen.extend(to_screen(camera, intr, &world, poly.color));
    }
    for line in &scene.lines {
        for quad in strip_quads(&line.points, line.width, line.closed, line.color) {
            let world: Vec<_> = quad.points.iter().map(lift).collect();
            screen.extend(to_screen(camera, intr, &world, quad.color));
        }
    }
    let mut marks: Vec<(f64, usize)> = scene
        .landmarks
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mid = lift(&((l.a + l.b) * 0.5));
            (camera.to_camera(&mid).z, i)
        })
        .collect();
    // far to near; index breaks ties
    marks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, i) in marks {
        let l = &scene.landmarks[i];
        let world = [
            Vector3::new(l.a.x, l.a.y, 0.0),
            Vector3::new(l.b.x, l.b.y, 0.0),
            Vector3::new(l.b.x, l.b.y, l.height),
            Vector3::new(l.a.x, l.a.y, l.height),
        ];
        screen.extend(to_screen(camera, intr, &world, l.color));
    }

    let mut frame = Frame::new(intr.width, intr.height, scene.background);
    let row_len = intr.width as usize * 3;
    par::for_each_row(exec, frame.data_mut(), row_len, |y, row| {
        let yc = y as f64 + 0.5;
        for poly in &screen {
            if yc < poly.y_min || yc > poly.y_max {
                continue;
            }
            fill_polygon_row(row, y, &poly.points, poly.color);
        }
    });
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraMount, Pose2D};

    fn camera() -> (CameraPose, CameraIntrinsics) {
        let cam =
            CameraPose::from_pose(&Pose2D::new(0.0, 0.0, 0.0), &CameraMount { forward: 0.0, height: 1.5, pitch: 0.0 });
        (cam, CameraIntrinsics::default())
    }

    #[test]
    fn empty_scene_is_uniform() {
        let (cam, intr) = camera();
        let f = render_scene(&cam, &intr, &SceneModel::default());
        assert!(f.data().chunks(3).all(|p| p == Rgb::SKY.0));
    }

    #[test]
    fn centerline_reaches_vanishing_column() {
        let (cam, intr) = camera();
        let scene = SceneModel {
            lines: vec![GroundLine {
                points: vec![Vector2::new(1.0, 0.0), Vector2::new(500.0, 0.0)],
                width: 0.2,
                closed: false,
                color: Rgb::PAINT,
            }],
            ..SceneModel::default()
        };
        let f = render_scene(&cam, &intr, &scene);
        let painted_rows: Vec<u32> =
            (240..480).filter(|&y| f.get(319, y) == Rgb::PAINT || f.get(320, y) == Rgb::PAINT).collect();
        assert!(painted_rows.len() > 100, "{} rows", painted_rows.len());
        // nothing above the horizon
        assert!((0..239).all(|y| f.get(320, y) == Rgb::SKY));
    }

    #[test]
    fn rendering_is_bit_identical() {
        let course = Course::default_course();
        let scene = SceneModel::from_course(&course);
        let mount = CameraMount::default();
        let cam = CameraPose::from_pose(&course.start, &mount);
        let intr = CameraIntrinsics::default();
        let a = render_scene_with(&cam, &intr, &scene, Exec::Sequential);
        let b = render_scene_with(&cam, &intr, &scene, Exec::Parallel);
        let c = render_scene(&cam, &intr, &scene);
        assert_eq!(a, b);
        assert_eq!(a, c);
        // road is visible straight ahead, sky at the top
        assert_eq!(a.get(200, 470), Rgb::ROAD);
        assert_eq!(a.get(320, 5), Rgb::SKY);
    }
}
