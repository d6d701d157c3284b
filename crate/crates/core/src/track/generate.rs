use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{wrap_angle, Track, TrackPoint, MAX_SEGMENT};
use crate::error::{Error, Result};

/// Minimum length of the generated full-scale circuit (finish threshold of the
/// original 3.9 km venue).
pub const PAPER_SCALE_MIN_LENGTH: f64 = 3900.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CircuitKind {
    /// Stadium: two straights joined by two half circles, driven counter-clockwise.
    Oval { straight: f64, radius: f64, width: f64 },
    /// Mixed ~4 km circuit with fast sweepers, hairpins and medium corners,
    /// driven clockwise. `scale` stretches the layout uniformly.
    PaperScale { width: f64, scale: f64 },
}

impl CircuitKind {
    pub fn oval_default() -> Self {
        CircuitKind::Oval { straight: 100.0, radius: 30.0, width: 10.0 }
    }

    pub fn paper_scale_default() -> Self {
        CircuitKind::PaperScale { width: 12.0, scale: 1.0 }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

pub fn generate_circuit(kind: CircuitKind) -> Result<Track> {
    match kind {
        CircuitKind::Oval { straight, radius, width } => {
            positive("straight", straight)?;
            positive("radius", radius)?;
            positive("width", width)?;
            if width / 2.0 >= radius {
                return Err(Error::param("width", "half-width must be below the corner radius"));
            }
            oval(straight, radius, width / 2.0)
        }
        CircuitKind::PaperScale { width, scale } => {
            positive("width", width)?;
            positive("scale", scale)?;
            paper_scale(width / 2.0, scale)
        }
    }
}

fn push_line(out: &mut Vec<[f64; 2]>, a: [f64; 2], b: [f64; 2]) {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let n = (len / MAX_SEGMENT).ceil().max(1.0) as usize;
    for k in 0..n {
        let t = k as f64 / n as f64;
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
}

/// Arc around `center` from angle `start` sweeping `sweep` radians (signed),
/// excluding the end point.
fn push_arc(out: &mut Vec<[f64; 2]>, center: [f64; 2], radius: f64, start: f64, sweep: f64) {
    let n = (radius * sweep.abs() / MAX_SEGMENT).ceil().max(1.0) as usize;
    for k in 0..n {
        let a = start + sweep * k as f64 / n as f64;
        out.push([center[0] + radius * a.cos(), center[1] + radius * a.sin()]);
    }
}

fn oval(straight: f64, radius: f64, half_width: f64) -> Result<Track> {
    let mut pts = Vec::new();
    push_line(&mut pts, [0.0, 0.0], [straight, 0.0]);
    push_arc(&mut pts, [straight, radius], radius, -PI / 2.0, PI);
    push_line(&mut pts, [straight, 2.0 * radius], [0.0, 2.0 * radius]);
    push_arc(&mut pts, [0.0, radius], radius, PI / 2.0, PI);
    let points = pts.into_iter().map(|[x, y]| TrackPoint { x, y, half_width }).collect();
    Track::new("oval", points, true)
}

/// Control polygon (travel order) and fillet radius per vertex. The closing
/// edge from the last vertex to the first is the main straight.
const CIRCUIT_LAYOUT: [([f64; 2], f64); 8] = [
    ([1100.0, 0.0], 220.0),   // T1: fast right sweeper
    ([1400.0, -420.0], 55.0), // T2: medium right
    ([1080.0, -720.0], 70.0), // T3: medium right
    ([300.0, -640.0], 14.0),  // T4: right hairpin
    ([820.0, -450.0], 16.0),  // T5: left hairpin
    ([250.0, -300.0], 45.0),  // T6: medium left
    ([-60.0, -420.0], 40.0),  // T7: medium right
    ([-320.0, 0.0], 160.0),   // T8: fast right onto the main straight
];

fn paper_scale(half_width: f64, scale: f64) -> Result<Track> {
    let layout: Vec<([f64; 2], f64)> =
        CIRCUIT_LAYOUT.iter().map(|&([x, y], r)| ([x * scale, y * scale], r * scale)).collect();
    for &(_, r) in &layout {
        if r <= half_width {
            return Err(Error::param("width", "half-width must be below every corner radius"));
        }
    }
    let points = fillet_polygon(&layout)?.into_iter().map(|[x, y]| TrackPoint { x, y, half_width }).collect();
    Track::new("paper_scale", points, true)
}

/// Rounds every vertex of a closed control polygon with a circular arc of the
/// given radius, tangent to both adjacent edges. The output starts at the
/// midpoint of the closing edge (last vertex to first).
fn fillet_polygon(layout: &[([f64; 2], f64)]) -> Result<Vec<[f64; 2]>> {
    let n = layout.len();
    struct Corner {
        start: [f64; 2],
        end: [f64; 2],
        center: [f64; 2],
        radius: f64,
        sweep: f64,
    }
    let mut corners = Vec::with_capacity(n);
    for i in 0..n {
        let prev = layout[(i + n - 1) % n].0;
        let (v, r) = layout[i];
        let next = layout[(i + 1) % n].0;
        let d_in = unit([v[0] - prev[0], v[1] - prev[1]]);
        let d_out = unit([next[0] - v[0], next[1] - v[1]]);
        let turn = wrap_angle(d_out[1].atan2(d_out[0]) - d_in[1].atan2(d_in[0]));
        let tangent = r * (turn.abs() / 2.0).tan();
        let start = [v[0] - d_in[0] * tangent, v[1] - d_in[1] * tangent];
        let end = [v[0] + d_out[0] * tangent, v[1] + d_out[1] * tangent];
        let side = turn.signum();
        let center = [start[0] - d_in[1] * r * side, start[1] + d_in[0] * r * side];
        corners.push((tangent, Corner { start, end, center, radius: r, sweep: turn }));
    }
    for i in 0..n {
        let (a, b) = (layout[i].0, layout[(i + 1) % n].0);
        let edge = (b[0] - a[0]).hypot(b[1] - a[1]);
        if corners[i].0 + corners[(i + 1) % n].0 >= edge {
            return Err(Error::param(
                "layout",
                format!("corner fillets {i} and {} overlap on their shared edge", (i + 1) % n),
            ));
        }
    }
    let last = &corners[n - 1].1;
    let first = &corners[0].1;
    let mid = [0.5 * (last.end[0] + first.start[0]), 0.5 * (last.end[1] + first.start[1])];
    let mut pts = Vec::new();
    push_line(&mut pts, mid, first.start);
    for i in 0..n {
        let c = &corners[i].1;
        let a0 = (c.start[1] - c.center[1]).atan2(c.start[0] - c.center[0]);
        push_arc(&mut pts, c.center, c.radius, a0, c.sweep);
        let to = if i + 1 < n { corners[i + 1].1.start } else { mid };
        push_line(&mut pts, c.end, to);
    }
    Ok(pts)
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}
