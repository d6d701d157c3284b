//! Track geometry: a piecewise-linear centerline with per-point half-width.
//!
//! Conventions used throughout the crate:
//! - arc length `s` runs along the centerline from the first point; on closed
//!   tracks it is reported in `[0, L)`;
//! - lateral offset is measured in half-widths, `+1` on the left edge and `-1`
//!   on the right edge;
//! - heading error is the car yaw minus the centerline tangent, wrapped to
//!   `(-pi, pi]`.

mod generate;
mod grid;
mod io;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use grid::SegmentGrid;

pub use generate::{generate_circuit, CircuitKind, PAPER_SCALE_MIN_LENGTH};
pub use io::{load_track, parse_track, save_track, track_to_json, TrackFile};

/// Maximum centerline segment length after densification, in meters.
pub const MAX_SEGMENT: f64 = 0.5;

/// Default lidar range; matches the `/300` observation scale.
pub const DEFAULT_MAX_RANGE: f64 = 300.0;

/// Number of lidar rays.
pub const LIDAR_RAYS: usize = 17;

const GRID_CELL: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub x: f64,
    pub y: f64,
    pub half_width: f64,
}

/// Position of a point relative to the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackFrame {
    pub s: f64,
    pub lateral_offset: f64,
    pub heading_error: f64,
    /// Index of the centerline segment the point projected onto.
    pub segment: usize,
}

#[derive(Debug, Clone)]
pub struct Track {
    name: String,
    points: Vec<TrackPoint>,
    cumulative_s: Vec<f64>,
    length: f64,
    closed: bool,
    left_edge: Vec<[f64; 2]>,
    right_edge: Vec<[f64; 2]>,
    center_grid: SegmentGrid,
    edge_grid: SegmentGrid,
}

impl PartialEq for Track {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.closed == other.closed
            && self.points == other.points
            && self.cumulative_s == other.cumulative_s
            && self.length == other.length
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// The default lidar fan: `n` rays spread uniformly over `[-90, +90]` degrees.
pub fn lidar_angles(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -PI / 2.0 + PI * i as f64 / (n - 1) as f64).collect()
}

#[inline]
fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Ray/segment intersection parameter along the ray (unit `dir`), if any.
#[inline]
pub(crate) fn ray_segment(origin: [f64; 2], dir: [f64; 2], a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let e = sub(b, a);
    let denom = cross(dir, e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let ao = sub(a, origin);
    let t = cross(ao, e) / denom;
    let u = cross(ao, dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(sub(p2, p1), sub(q1, p1));
    let d2 = cross(sub(p2, p1), sub(q2, p1));
    let d3 = cross(sub(q2, q1), sub(p1, q1));
    let d4 = cross(sub(q2, q1), sub(p2, q1));
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

impl Track {
    /// Builds a validated track, densifying the centerline so no segment is
    /// longer than [`MAX_SEGMENT`].
    pub fn new(name: impl Into<String>, points: Vec<TrackPoint>, closed: bool) -> Result<Self> {
        let problems = validate_points(&points, closed);
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let points = densify(&points, closed);
        let mut cumulative_s = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative_s.push(0.0);
        for w in points.windows(2) {
            acc += (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
            cumulative_s.push(acc);
        }
        let length = if closed {
            let (a, b) = (points[points.len() - 1], points[0]);
            acc + (b.x - a.x).hypot(b.y - a.y)
        } else {
            acc
        };
        let mut track = Track {
            name: name.into(),
            points,
            cumulative_s,
            length,
            closed,
            left_edge: Vec::new(),
            right_edge: Vec::new(),
            center_grid: SegmentGrid::build(&[([0.0, 0.0], [0.0, 0.0])], GRID_CELL),
            edge_grid: SegmentGrid::build(&[([0.0, 0.0], [0.0, 0.0])], GRID_CELL),
        };
        track.build_geometry();
        Ok(track)
    }

    fn build_geometry(&mut self) {
        let n = self.points.len();
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for i in 0..n {
            let prev = if i > 0 {
                i - 1
            } else if self.closed {
                n - 1
            } else {
                0
            };
            let next = if i + 1 < n {
                i + 1
            } else if self.closed {
                0
            } else {
                n - 1
            };
            let (p, q) = (self.points[prev], self.points[next]);
            let (tx, ty) = (q.x - p.x, q.y - p.y);
            let norm = tx.hypot(ty);
            let normal = [-ty / norm, tx / norm];
            let c = self.points[i];
            left.push([c.x + normal[0] * c.half_width, c.y + normal[1] * c.half_width]);
            right.push([c.x - normal[0] * c.half_width, c.y - normal[1] * c.half_width]);
        }
        let n_seg = self.segment_count();
        let centers: Vec<_> = (0..n_seg).map(|i| self.segment(i)).collect();
        let mut edges = Vec::with_capacity(2 * n_seg);
        for i in 0..n_seg {
            let j = (i + 1) % n;
            edges.push((left[i], left[j]));
        }
        for i in 0..n_seg {
            let j = (i + 1) % n;
            edges.push((right[i], right[j]));
        }
        self.center_grid = SegmentGrid::build(&centers, GRID_CELL);
        self.edge_grid = SegmentGrid::build(&edges, GRID_CELL);
        self.left_edge = left;
        self.right_edge = right;
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }

    pub fn cumulative_s(&self) -> &[f64] {
        &self.cumulative_s
    }

    /// Total centerline length `L` in meters.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn left_edge(&self) -> &[[f64; 2]] {
        &self.left_edge
    }

    pub fn right_edge(&self) -> &[[f64; 2]] {
        &self.right_edge
    }

    pub fn segment_count(&self) -> usize {
        if self.closed {
            self.points.len()
        } else {
            self.points.len() - 1
        }
    }

    fn segment(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let a = self.points[i];
        let b = self.points[(i + 1) % self.points.len()];
        ([a.x, a.y], [b.x, b.y])
    }

    /// Edge segments: left edge first, then right edge, aligned with centerline segments.
    pub fn edge_segments(&self) -> Vec<([f64; 2], [f64; 2])> {
        let n = self.points.len();
        let n_seg = self.segment_count();
        let mut out = Vec::with_capacity(2 * n_seg);
        for i in 0..n_seg {
            out.push((self.left_edge[i], self.left_edge[(i + 1) % n]));
        }
        for i in 0..n_seg {
            out.push((self.right_edge[i], self.right_edge[(i + 1) % n]));
        }
        out
    }

    /// Centerline position, tangent heading and half-width at arc length `s`.
    /// Closed tracks wrap `s`; open tracks clamp it to `[0, L]`.
    pub fn centerline_at(&self, s: f64) -> ([f64; 2], f64, f64) {
        let s = if self.closed { s.rem_euclid(self.length) } else { s.clamp(0.0, self.length) };
        let n_seg = self.segment_count();
        let i = match self.cumulative_s.binary_search_by(|v| v.partial_cmp(&s).expect("finite arc length")) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
        .min(n_seg - 1);
        let (a, b) = self.segment(i);
        let seg_len = self.segment_length(i);
        let t = ((s - self.cumulative_s[i]) / seg_len).clamp(0.0, 1.0);
        let hw = self.half_width_on(i, t);
        ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], (b[1] - a[1]).atan2(b[0] - a[0]), hw)
    }

    fn segment_length(&self, i: usize) -> f64 {
        if i + 1 < self.cumulative_s.len() {
            self.cumulative_s[i + 1] - self.cumulative_s[i]
        } else {
            self.length - self.cumulative_s[i]
        }
    }

    fn half_width_on(&self, i: usize, t: f64) -> f64 {
        let a = self.points[i].half_width;
        let b = self.points[(i + 1) % self.points.len()].half_width;
        a + t * (b - a)
    }

    /// Centerline tangent heading of segment `i`.
    pub fn segment_heading(&self, i: usize) -> f64 {
        let (a, b) = self.segment(i);
        (b[1] - a[1]).atan2(b[0] - a[0])
    }

    /// Nearest-point projection of `pos` onto the centerline. The heading
    /// error in the returned frame is relative to a zero yaw; use
    /// [`Track::frame`] when the car heading is known.
    pub fn project(&self, pos: [f64; 2]) -> TrackFrame {
        self.frame(pos, 0.0)
    }

    /// Projection plus heading error for a car with yaw `heading`.
    pub fn frame(&self, pos: [f64; 2], heading: f64) -> TrackFrame {
        let grid = &self.center_grid;
        let (ci, cj) = grid.cell_of(pos);
        let max_ring = grid.max_ring(ci, cj);
        // (distance^2, s, segment, t)
        let mut best: Option<(f64, f64, usize, f64)> = None;
        let mut k = 0;
        while k <= max_ring {
            grid.for_ring(ci, cj, k, |cell| {
                for &idx in cell {
                    let idx = idx as usize;
                    let (a, b) = self.segment(idx);
                    let e = sub(b, a);
                    let len2 = e[0] * e[0] + e[1] * e[1];
                    let ap = sub(pos, a);
                    let t = ((ap[0] * e[0] + ap[1] * e[1]) / len2).clamp(0.0, 1.0);
                    let q = [a[0] + t * e[0], a[1] + t * e[1]];
                    let d = sub(pos, q);
                    let d2 = d[0] * d[0] + d[1] * d[1];
                    let s = self.cumulative_s[idx] + t * self.segment_length(idx);
                    let better = match best {
                        None => true,
                        Some((bd2, bs, _, _)) => d2 < bd2 || (d2 == bd2 && s < bs),
                    };
                    if better {
                        best = Some((d2, s, idx, t));
                    }
                }
            });
            if let Some((bd2, _, _, _)) = best {
                let reach = k as f64 * grid.cell_size();
                if bd2 <= reach * reach {
                    break;
                }
            }
            k += 1;
        }
        let (d2, mut s, idx, t) = best.expect("track has at least one segment");
        if self.closed && s >= self.length {
            s -= self.length;
        }
        let (a, b) = self.segment(idx);
        let e = sub(b, a);
        let len = self.segment_length(idx);
        let side = cross(e, sub(pos, a));
        let mut dist = d2.sqrt();
        if !self.closed {
            // past either end of an open track: extend the end segment so s
            // keeps growing and the offset stays perpendicular
            let ap = sub(pos, a);
            let t_raw = (ap[0] * e[0] + ap[1] * e[1]) / (len * len);
            let last = self.segment_count() - 1;
            if (idx == last && t_raw > 1.0) || (idx == 0 && t_raw < 0.0) {
                s = self.cumulative_s[idx] + t_raw * len;
                dist = side.abs() / len;
            }
        }
        let signed = if side >= 0.0 { dist } else { -dist };
        let hw = self.half_width_on(idx, t);
        TrackFrame {
            s,
            lateral_offset: signed / hw,
            heading_error: wrap_angle(heading - self.segment_heading(idx)),
            segment: idx,
        }
    }

    /// Distances from `pos` along each ray (angles relative to `heading`) to
    /// the first track edge, clamped to `max_range`. Every ray reads zero
    /// when `pos` is outside the track.
    pub fn raycast(&self, pos: [f64; 2], heading: f64, ray_angles: &[f64], max_range: f64) -> Vec<f64> {
        let mut out = vec![0.0; ray_angles.len()];
        self.raycast_into(pos, heading, ray_angles, max_range, &mut out);
        out
    }

    pub fn raycast_into(&self, pos: [f64; 2], heading: f64, ray_angles: &[f64], max_range: f64, out: &mut [f64]) {
        if self.project(pos).lateral_offset.abs() > 1.0 {
            out.iter_mut().for_each(|d| *d = 0.0);
            return;
        }
        let edges_per_side = self.segment_count();
        let n = self.points.len();
        for (angle, dist) in ray_angles.iter().zip(out.iter_mut()) {
            let a = heading + angle;
            let dir = [a.cos(), a.sin()];
            let mut hit = max_range;
            self.edge_grid.walk_ray(pos, dir, max_range, |cell, exit| {
                for &idx in cell {
                    let idx = idx as usize;
                    let (edge, i) = if idx < edges_per_side {
                        (&self.left_edge, idx)
                    } else {
                        (&self.right_edge, idx - edges_per_side)
                    };
                    if let Some(t) = ray_segment(pos, dir, edge[i], edge[(i + 1) % n]) {
                        hit = hit.min(t);
                    }
                }
                hit > exit
            });
            *dist = hit.min(max_range);
        }
    }

    /// Discrete signed curvature (1/m) at each centerline point.
    pub fn curvature(&self) -> Vec<f64> {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                if !self.closed && (i == 0 || i + 1 == n) {
                    return 0.0;
                }
                let p = self.points[(i + n - 1) % n];
                let c = self.points[i];
                let q = self.points[(i + 1) % n];
                let h0 = (c.y - p.y).atan2(c.x - p.x);
                let h1 = (q.y - c.y).atan2(q.x - c.x);
                let ds = 0.5 * ((c.x - p.x).hypot(c.y - p.y) + (q.x - c.x).hypot(q.y - c.y));
                wrap_angle(h1 - h0) / ds
            })
            .collect()
    }

    /// Wrap-aware arc-length difference `s_new - s_old` for closed tracks.
    pub fn ds_wrapped(&self, s_new: f64, s_old: f64) -> f64 {
        let d = s_new - s_old;
        if !self.closed {
            return d;
        }
        let half = 0.5 * self.length;
        if d > half {
            d - self.length
        } else if d <= -half {
            d + self.length
        } else {
            d
        }
    }
}

/// Collects every invariant violation of a raw point list.
pub fn validate_points(points: &[TrackPoint], closed: bool) -> Vec<String> {
    let mut problems = Vec::new();
    let min_points = if closed { 3 } else { 2 };
    if points.len() < min_points {
        problems.push(format!(
            "need at least {min_points} points for a {} track, got {}",
            if closed { "closed" } else { "open" },
            points.len()
        ));
        return problems;
    }
    for (i, p) in points.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite()) {
            problems.push(format!("points[{i}]: non-finite coordinate"));
        }
        if !(p.half_width.is_finite() && p.half_width > 0.0) {
            problems.push(format!("points[{i}].half_width must be > 0, got {}", p.half_width));
        }
    }
    if !problems.is_empty() {
        return problems;
    }
    let n = points.len();
    let n_seg = if closed { n } else { n - 1 };
    for i in 0..n_seg {
        let (a, b) = (points[i], points[(i + 1) % n]);
        if (b.x - a.x).hypot(b.y - a.y) <= 1e-9 {
            problems.push(format!("points[{i}] and points[{}] coincide", (i + 1) % n));
        }
    }
    if !problems.is_empty() {
        return problems;
    }
    for (i, j) in self_intersections(points, closed) {
        problems.push(format!("centerline segments {i} and {j} intersect"));
    }
    problems
}

fn self_intersections(points: &[TrackPoint], closed: bool) -> Vec<(usize, usize)> {
    let n = points.len();
    let n_seg = if closed { n } else { n - 1 };
    let seg = |i: usize| {
        let (a, b) = (points[i], points[(i + 1) % n]);
        ([a.x, a.y], [b.x, b.y])
    };
    let mut order: Vec<usize> = (0..n_seg).collect();
    let min_x = |i: usize| {
        let (a, b) = seg(i);
        a[0].min(b[0])
    };
    order.sort_by(|&i, &j| min_x(i).total_cmp(&min_x(j)));
    let mut hits = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        let (a, b) = seg(i);
        let max_x = a[0].max(b[0]);
        for &j in &order[k + 1..] {
            if min_x(j) > max_x {
                break;
            }
            let adjacent = i.abs_diff(j) == 1 || (closed && i.abs_diff(j) == n_seg - 1);
            if adjacent {
                continue;
            }
            let (c, d) = seg(j);
            if segments_cross(a, b, c, d) {
                hits.push((i.min(j), i.max(j)));
            }
        }
    }
    hits.sort_unstable();
    hits
}

fn densify(points: &[TrackPoint], closed: bool) -> Vec<TrackPoint> {
    let n = points.len();
    let n_seg = if closed { n } else { n - 1 };
    let mut out = Vec::with_capacity(n);
    for i in 0..n_seg {
        let (a, b) = (points[i], points[(i + 1) % n]);
        out.push(a);
        let len = (b.x - a.x).hypot(b.y - a.y);
        let pieces = (len / MAX_SEGMENT).ceil() as usize;
        for k in 1..pieces {
            let t = k as f64 / pieces as f64;
            out.push(TrackPoint {
                x: a.x + t * (b.x - a.x),
                y: a.y + t * (b.y - a.y),
                half_width: a.half_width + t * (b.half_width - a.half_width),
            });
        }
    }
    if !closed {
        out.push(points[n - 1]);
    }
    out
}
