use serde::{Deserialize, Serialize};

use super::record::StepRecord;
use crate::error::{Error, Result};

/// Standard gravity used to report accelerations in g.
pub const STANDARD_GRAVITY: f64 = 9.80665;
/// Acceleration magnitude separating "turning" or "braking" from neutral, m/s^2.
pub const PHASE_THRESHOLD: f64 = 1.0;
pub const DEFAULT_BIN_DEG: f64 = 5.0;

/// Envelope of the combined acceleration, in g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgEnvelope {
    pub bin_width_deg: f64,
    /// Maximum combined acceleration per direction bin; bin `k` covers
    /// `atan2(a_y, a_x)` in `[-180 + k w, -180 + (k + 1) w)` degrees.
    pub bins: Vec<f64>,
    pub peak: f64,
    /// `|a_x| <= 1 m/s^2` and `|a_y| > 1 m/s^2`.
    pub peak_pure_lateral: f64,
    /// `a_x < -1 m/s^2` and `|a_y| > 1 m/s^2`.
    pub peak_braking_turning: f64,
    /// `a_x > 1 m/s^2` and `|a_y| > 1 m/s^2`.
    pub peak_accel_turning: f64,
}

impl GgEnvelope {
    /// Center angle of bin `k`, degrees.
    pub fn bin_center_deg(&self, k: usize) -> f64 {
        -180.0 + (k as f64 + 0.5) * self.bin_width_deg
    }
}

pub fn gg_envelope(records: &[StepRecord]) -> Result<GgEnvelope> {
    gg_envelope_binned(records, DEFAULT_BIN_DEG)
}

pub fn gg_envelope_binned(records: &[StepRecord], bin_width_deg: f64) -> Result<GgEnvelope> {
    if records.is_empty() {
        return Err(Error::Empty("telemetry records"));
    }
    if !(bin_width_deg > 0.0 && (360.0 / bin_width_deg).fract() == 0.0) {
        return Err(Error::param("bin_width_deg", "must divide 360"));
    }
    let n_bins = (360.0 / bin_width_deg) as usize;
    let mut env = GgEnvelope {
        bin_width_deg,
        bins: vec![0.0; n_bins],
        peak: 0.0,
        peak_pure_lateral: 0.0,
        peak_braking_turning: 0.0,
        peak_accel_turning: 0.0,
    };
    for r in records {
        let g = r.a_x.hypot(r.a_y) / STANDARD_GRAVITY;
        if g == 0.0 {
            continue;
        }
        let deg = r.a_y.atan2(r.a_x).to_degrees();
        let k = (((deg + 180.0) / bin_width_deg).floor() as usize) % n_bins;
        env.bins[k] = env.bins[k].max(g);
        env.peak = env.peak.max(g);
        let turning = r.a_y.abs() > PHASE_THRESHOLD;
        if turning && r.a_x.abs() <= PHASE_THRESHOLD {
            env.peak_pure_lateral = env.peak_pure_lateral.max(g);
        }
        if turning && r.a_x < -PHASE_THRESHOLD {
            env.peak_braking_turning = env.peak_braking_turning.max(g);
        }
        if turning && r.a_x > PHASE_THRESHOLD {
            env.peak_accel_turning = env.peak_accel_turning.max(g);
        }
    }
    Ok(env)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnDirection {
    Left,
    Right,
    Straight,
}

/// Channel summary over an arc-length window of one lap.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    pub s_from: f64,
    pub s_to: f64,
    pub records: Vec<StepRecord>,
    pub min_speed: f64,
    pub max_abs_steer: f64,
    /// Mean normalized torque command per wheel (FL, FR, RL, RR).
    pub mean_torque: [f64; 4],
    pub direction: TurnDirection,
    /// Mean torque of the two wheels on the inside of the corner.
    pub inside_mean_torque: f64,
    pub outside_mean_torque: f64,
}

impl SegmentReport {
    pub fn outside_biased(&self) -> bool {
        self.direction != TurnDirection::Straight && self.outside_mean_torque > self.inside_mean_torque
    }
}

/// Records with `s_from <= s < s_to`, summarized.
pub fn segment_report(records: &[StepRecord], s_from: f64, s_to: f64) -> Result<SegmentReport> {
    if !(s_from < s_to) {
        return Err(Error::param("s_from", "must be below s_to"));
    }
    let sel: Vec<StepRecord> = records.iter().filter(|r| r.s >= s_from && r.s < s_to).copied().collect();
    if sel.is_empty() {
        return Err(Error::Empty("segment range"));
    }
    let n = sel.len() as f64;
    let mut mean_torque = [0.0; 4];
    for r in &sel {
        for (m, t) in mean_torque.iter_mut().zip(r.torques()) {
            *m += t / n;
        }
    }
    let mean_yaw = sel.iter().map(|r| r.yaw_rate).sum::<f64>() / n;
    let direction = if mean_yaw > 1e-3 {
        TurnDirection::Left
    } else if mean_yaw < -1e-3 {
        TurnDirection::Right
    } else {
        TurnDirection::Straight
    };
    let left = 0.5 * (mean_torque[0] + mean_torque[2]);
    let right = 0.5 * (mean_torque[1] + mean_torque[3]);
    let (inside, outside) = match direction {
        TurnDirection::Right => (right, left),
        _ => (left, right),
    };
    Ok(SegmentReport {
        s_from,
        s_to,
        min_speed: sel.iter().map(|r| r.v).fold(f64::INFINITY, f64::min),
        max_abs_steer: sel.iter().map(|r| r.steer.abs()).fold(0.0, f64::max),
        records: sel,
        mean_torque,
        direction,
        inside_mean_torque: inside,
        outside_mean_torque: outside,
    })
}

/// Path curvature above which a record counts as cornering, 1/m.
pub const DEFAULT_CORNER_CURVATURE: f64 = 1.0 / 150.0;
/// Shortest arc-length run reported as a corner, m.
pub const DEFAULT_CORNER_LENGTH: f64 = 15.0;

/// Arc-length ranges `[from, to)` where the driven path curvature
/// `|yaw_rate| / v` stays above `min_curvature` for at least `min_length`
/// meters. Records are taken in log order; slow records (`v < 1 m/s`) never
/// count as cornering.
pub fn detect_corners(records: &[StepRecord], min_curvature: f64, min_length: f64) -> Vec<(f64, f64)> {
    let cornering = |r: &StepRecord| r.v >= 1.0 && r.yaw_rate.abs() / r.v > min_curvature;
    let mut out = Vec::new();
    let mut k = 0;
    while k < records.len() {
        if !cornering(&records[k]) {
            k += 1;
            continue;
        }
        let start = k;
        while k < records.len() && cornering(&records[k]) && records[k].s >= records[start].s {
            k += 1;
        }
        let (from, to) = (records[start].s, records[k - 1].s);
        if to - from >= min_length {
            out.push((from, to + 1e-9));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlipKind {
    /// Wheel locking under braking torque.
    LockUp,
    /// Wheel spinning under drive torque.
    Spin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlipEvent {
    pub kind: SlipKind,
    pub wheel: usize,
    pub start_step: usize,
    pub end_step: usize,
    pub start_s: f64,
    /// Largest |slip ratio| in the interval.
    pub peak_slip: f64,
    /// The torque command reversed its direction of change inside the
    /// interval (release-and-reapply).
    pub modulated: bool,
}

pub const DEFAULT_LOCK_THRESHOLD: f64 = 0.3;
pub const DEFAULT_SPIN_THRESHOLD: f64 = 0.3;

/// Contiguous intervals of excessive slip per wheel.
pub fn slip_events(records: &[StepRecord], lock_threshold: f64, spin_threshold: f64) -> Vec<SlipEvent> {
    let mut events = Vec::new();
    for wheel in 0..4 {
        for kind in [SlipKind::LockUp, SlipKind::Spin] {
            let hit = |r: &StepRecord| {
                let (slip, torque) = (r.slips()[wheel], r.torques()[wheel]);
                match kind {
                    SlipKind::LockUp => slip < -lock_threshold && torque < 0.0,
                    SlipKind::Spin => slip > spin_threshold && torque > 0.0,
                }
            };
            let mut k = 0;
            while k < records.len() {
                if !hit(&records[k]) {
                    k += 1;
                    continue;
                }
                let start = k;
                while k < records.len() && hit(&records[k]) {
                    k += 1;
                }
                let span = &records[start..k];
                let torques: Vec<f64> = span.iter().map(|r| r.torques()[wheel]).collect();
                events.push(SlipEvent {
                    kind,
                    wheel,
                    start_step: span[0].step,
                    end_step: span[span.len() - 1].step,
                    start_s: span[0].s,
                    peak_slip: span.iter().map(|r| r.slips()[wheel].abs()).fold(0.0, f64::max),
                    modulated: derivative_reverses(&torques),
                });
            }
        }
    }
    events.sort_by_key(|e| (e.start_step, e.wheel));
    events
}

fn derivative_reverses(series: &[f64]) -> bool {
    let signs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).filter(|d| *d != 0.0).map(f64::signum).collect();
    signs.windows(2).any(|w| w[0] != w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ax: f64, ay: f64) -> StepRecord {
        StepRecord { a_x: ax, a_y: ay, ..Default::default() }
    }

    #[test]
    fn pure_braking_fills_one_bin() {
        let env = gg_envelope(&[rec(-10.0, 0.0); 3]).unwrap();
        let nonzero: Vec<usize> = (0..72).filter(|&k| env.bins[k] > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert!((env.bins[nonzero[0]] - 10.0 / STANDARD_GRAVITY).abs() < 1e-12);
        assert_eq!(env.peak_braking_turning, 0.0);
    }

    #[test]
    fn circle_fills_all_bins() {
        let recs: Vec<StepRecord> = (0..720)
            .map(|k| {
                let a = (k as f64 + 0.5) * std::f64::consts::PI / 360.0;
                rec(9.80665 * a.cos(), 9.80665 * a.sin())
            })
            .collect();
        let env = gg_envelope(&recs).unwrap();
        assert!(env.bins.iter().all(|b| (b - 1.0).abs() < 1e-9));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(gg_envelope(&[]).is_err());
    }

    #[test]
    fn slip_event_detection() {
        let mut recs: Vec<StepRecord> = (0..10).map(|k| StepRecord { step: k, ..Default::default() }).collect();
        assert!(slip_events(&recs, 0.3, 0.3).is_empty());
        for r in &mut recs[3..6] {
            r.slip_fl = -0.5;
            r.torque_fl = -1.0;
        }
        let ev = slip_events(&recs, 0.3, 0.3);
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].kind, ev[0].wheel, ev[0].start_step, ev[0].end_step), (SlipKind::LockUp, 0, 3, 5));
        assert!(!ev[0].modulated);
    }

    #[test]
    fn corners_found_from_yaw_rate() {
        let recs: Vec<StepRecord> = (0..100)
            .map(|k| StepRecord {
                step: k,
                s: k as f64,
                v: 20.0,
                yaw_rate: if (30..60).contains(&k) { 0.5 } else { 0.01 },
                ..Default::default()
            })
            .collect();
        let corners = detect_corners(&recs, DEFAULT_CORNER_CURVATURE, DEFAULT_CORNER_LENGTH);
        assert_eq!(corners.len(), 1);
        assert_eq!(corners[0].0, 30.0);
        assert!((corners[0].1 - 59.0).abs() < 1e-6);
        // a short flick is ignored
        assert!(detect_corners(&recs[..40], DEFAULT_CORNER_CURVATURE, DEFAULT_CORNER_LENGTH).is_empty());
    }
}
