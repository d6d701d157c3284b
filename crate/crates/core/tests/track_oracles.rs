//! Grid-accelerated projection and raycasting checked against brute force
//! over every segment.

use racelab_core::track::{generate_circuit, lidar_angles, CircuitKind, Track, LIDAR_RAYS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: usize = 2_000;

fn tracks() -> Vec<Track> {
    vec![
        generate_circuit(CircuitKind::oval_default()).unwrap(),
        generate_circuit(CircuitKind::paper_scale_default()).unwrap(),
    ]
}

fn centerline_segments(track: &Track) -> Vec<([f64; 2], [f64; 2])> {
    let pts = track.points();
    (0..track.segment_count())
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            ([a.x, a.y], [b.x, b.y])
        })
        .collect()
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let t = (((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
    (p[0] - a[0] - t * ex).hypot(p[1] - a[1] - t * ey)
}

/// Ray parameter of the hit with segment `a`-`b`, solved by Cramer's rule.
fn ray_hit(origin: [f64; 2], dir: [f64; 2], a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let det = -dir[0] * ey + dir[1] * ex;
    if det.abs() < 1e-15 {
        return None;
    }
    let (rx, ry) = (a[0] - origin[0], a[1] - origin[1]);
    let t = (-rx * ey + ry * ex) / det;
    let u = (dir[0] * ry - dir[1] * rx) / det;
    (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// A random position near the track: a centerline point pushed sideways by
/// up to 1.3 half-widths.
fn near_track(track: &Track, rng: &mut impl Rng) -> [f64; 2] {
    let s = rng.random_range(0.0..track.length());
    let (c, heading, hw) = track.centerline_at(s);
    let off = rng.random_range(-1.3..1.3) * hw;
    let along = rng.random_range(-0.3..0.3);
    [c[0] - off * heading.sin() + along * heading.cos(), c[1] + off * heading.cos() + along * heading.sin()]
}

#[test]
fn projection_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for track in tracks() {
        let segs = centerline_segments(&track);
        for _ in 0..CASES {
            let p = near_track(&track, &mut rng);
            let brute = segs.iter().map(|&(a, b)| point_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min);
            let frame = track.project(p);
            let (a, b) = segs[frame.segment];
            let got = point_segment_distance(p, a, b);
            assert!((got - brute).abs() <= 1e-9, "{}: {got} vs {brute} at {p:?}", track.name());
            // the reported arc length lands on a nearest centerline point
            let (c, _, _) = track.centerline_at(frame.s);
            let at_s = (p[0] - c[0]).hypot(p[1] - c[1]);
            assert!((at_s - brute).abs() <= 1e-6, "{}: s={} gives {at_s} vs {brute}", track.name(), frame.s);
            assert!((0.0..track.length()).contains(&frame.s));
        }
    }
}

#[test]
fn raycast_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let angles = lidar_angles(LIDAR_RAYS);
    let range = 300.0;
    for track in tracks() {
        let edges = track.edge_segments();
        let mut checked = 0;
        for _ in 0..CASES {
            let p = near_track(&track, &mut rng);
            if track.project(p).lateral_offset.abs() > 1.0 {
                continue;
            }
            let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let got = track.raycast(p, heading, &angles, range);
            for (k, ang) in angles.iter().enumerate() {
                let dir = [(heading + ang).cos(), (heading + ang).sin()];
                let brute = edges.iter().filter_map(|&(a, b)| ray_hit(p, dir, a, b)).fold(range, f64::min);
                assert!((got[k] - brute).abs() <= 1e-9, "{} ray {k}: {} vs {brute}", track.name(), got[k]);
            }
            checked += 1;
        }
        assert!(checked > CASES / 2, "too few on-track samples: {checked}");
    }
}
