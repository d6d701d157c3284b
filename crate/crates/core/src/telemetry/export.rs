//! Plot-ready tables and SVG figures built from telemetry.

use serde::Serialize;

use super::analysis::{GgEnvelope, SegmentReport, SlipEvent, STANDARD_GRAVITY};
use super::learning::LearningCurve;
use super::record::StepRecord;
use super::svg::{render, Panel, Series, PALETTE};
use crate::error::{Error, Result};

fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn envelope_csv(env: &GgEnvelope) -> Result<String> {
    #[derive(Serialize)]
    struct Row {
        bin: usize,
        angle_deg: f64,
        max_g: f64,
    }
    csv_string((0..env.bins.len()).map(|k| Row { bin: k, angle_deg: env.bin_center_deg(k), max_g: env.bins[k] }))
}

/// GG scatter (lateral vs longitudinal, in g) with the binned envelope.
pub fn gg_svg(laps: &[(&str, &[StepRecord], &GgEnvelope)]) -> String {
    let mut series = Vec::new();
    for (k, (label, recs, env)) in laps.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        series.push(Series::markers(
            format!("{label} samples"),
            recs.iter().map(|r| (r.a_y / STANDARD_GRAVITY, r.a_x / STANDARD_GRAVITY)).collect(),
            color,
        ));
        let mut outline: Vec<(f64, f64)> = (0..env.bins.len())
            .filter(|&b| env.bins[b] > 0.0)
            .map(|b| {
                let a = env.bin_center_deg(b).to_radians();
                (env.bins[b] * a.sin(), env.bins[b] * a.cos())
            })
            .collect();
        if let Some(first) = outline.first().copied() {
            outline.push(first);
        }
        series.push(Series::line(format!("{label} envelope"), outline, color));
    }
    let panel = Panel {
        title: "GG diagram".into(),
        x_label: "lateral acceleration [g]".into(),
        y_label: "longitudinal acceleration [g]".into(),
        series,
        equal_axes: true,
    };
    render(&[panel], 760.0, 640.0)
}

pub fn learning_curve_svg(curve: &LearningCurve) -> String {
    let pick = |f: fn(&super::learning::LearningCurvePoint) -> Option<f64>| {
        curve.points.iter().filter_map(|p| f(p).map(|t| (p.steps as f64 / 1e6, t))).collect::<Vec<_>>()
    };
    let panel = Panel {
        title: "Learning curve".into(),
        x_label: "environment steps [millions]".into(),
        y_label: "lap time [s]".into(),
        series: vec![
            Series::markers("explored laptimes", pick(|p| p.explored_lap_time), PALETTE[0]),
            Series::markers("exploited laptimes", pick(|p| p.exploited_lap_time), PALETTE[1]),
        ],
        equal_axes: false,
    };
    render(&[panel], 900.0, 420.0)
}

/// Two laps resampled onto a common distance grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LapComparison {
    pub labels: [String; 2],
    pub distance: Vec<f64>,
    /// `[lap][channel][sample]` in `CHANNELS` order.
    pub channels: [Vec<Vec<f64>>; 2],
}

/// Channels of the side-by-side comparison.
pub const CHANNELS: [&str; 13] = [
    "steer",
    "pedal",
    "torque_fl",
    "torque_fr",
    "torque_rl",
    "torque_rr",
    "v",
    "wheel_speed_fl",
    "wheel_speed_fr",
    "wheel_speed_rl",
    "wheel_speed_rr",
    "lateral_offset",
    "time",
];

fn channel(r: &StepRecord, k: usize) -> f64 {
    let w = r.wheel_speeds();
    let t = r.torques();
    match k {
        0 => r.steer,
        1 => r.pedal,
        2..=5 => t[k - 2],
        6 => r.v,
        7..=10 => w[k - 7],
        11 => r.lateral_offset,
        _ => r.time,
    }
}

/// Linear interpolation of `channel` at distance `d` (records sorted by
/// distance).
fn sample_at(recs: &[StepRecord], d: f64, k: usize) -> f64 {
    let i = recs.partition_point(|r| r.distance < d);
    if i == 0 {
        return channel(&recs[0], k);
    }
    if i >= recs.len() {
        return channel(&recs[recs.len() - 1], k);
    }
    let (a, b) = (&recs[i - 1], &recs[i]);
    let span = b.distance - a.distance;
    let w = if span > 0.0 { (d - a.distance) / span } else { 1.0 };
    channel(a, k) + w * (channel(b, k) - channel(a, k))
}

pub fn compare_laps(a: (&str, &[StepRecord]), b: (&str, &[StepRecord]), spacing: f64) -> Result<LapComparison> {
    if a.1.is_empty() || b.1.is_empty() {
        return Err(Error::Empty("lap telemetry"));
    }
    if !(spacing > 0.0) {
        return Err(Error::param("spacing", "must be > 0"));
    }
    let sorted = |r: &[StepRecord]| {
        let mut v = r.to_vec();
        v.sort_by(|x, y| x.distance.total_cmp(&y.distance));
        v
    };
    let (ra, rb) = (sorted(a.1), sorted(b.1));
    let end = ra[ra.len() - 1].distance.min(rb[rb.len() - 1].distance);
    let n = (end / spacing).floor().max(0.0) as usize + 1;
    let distance: Vec<f64> = (0..n).map(|i| i as f64 * spacing).collect();
    let resample = |recs: &[StepRecord]| -> Vec<Vec<f64>> {
        (0..CHANNELS.len()).map(|k| distance.iter().map(|&d| sample_at(recs, d, k)).collect()).collect()
    };
    Ok(LapComparison { labels: [a.0.to_string(), b.0.to_string()], channels: [resample(&ra), resample(&rb)], distance })
}

impl LapComparison {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        let mut header = vec!["distance".to_string()];
        for lap in &self.labels {
            header.extend(CHANNELS.iter().map(|c| format!("{lap}_{c}")));
        }
        w.write_record(&header)?;
        for i in 0..self.distance.len() {
            let mut row = vec![self.distance[i].to_string()];
            for lap in &self.channels {
                row.extend(lap.iter().map(|c| c[i].to_string()));
            }
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Stacked channel panels: steering, pedal/torques, speeds, lateral position.
    pub fn to_svg(&self) -> String {
        let series = |lap: usize, k: usize, color: &'static str, label: String| {
            Series::line(
                label,
                self.distance.iter().copied().zip(self.channels[lap][k].iter().copied()).collect(),
                color,
            )
        };
        let mut panels = Vec::new();
        let per_lap = |name: &str, ks: &[usize]| {
            let mut s = Vec::new();
            for lap in 0..2 {
                for (j, &k) in ks.iter().enumerate() {
                    let label = if ks.len() == 1 {
                        self.labels[lap].clone()
                    } else {
                        format!("{} {}", self.labels[lap], CHANNELS[k])
                    };
                    s.push(series(lap, k, PALETTE[(lap * ks.len() + j) % PALETTE.len()], label));
                }
            }
            Panel {
                title: name.into(),
                x_label: "distance [m]".into(),
                y_label: name.into(),
                series: s,
                equal_axes: false,
            }
        };
        panels.push(per_lap("steering [-]", &[0]));
        panels.push(per_lap("pedal [-]", &[1]));
        for lap in 0..2 {
            let s = (0..4)
                .map(|w| series(lap, 2 + w, PALETTE[w], format!("{} {}", self.labels[lap], CHANNELS[2 + w])))
                .collect();
            panels.push(Panel {
                title: format!("wheel torques, {} [-]", self.labels[lap]),
                x_label: "distance [m]".into(),
                y_label: "torque command".into(),
                series: s,
                equal_axes: false,
            });
        }
        panels.push(per_lap("speed [m/s]", &[6]));
        for lap in 0..2 {
            let s = (0..4)
                .map(|w| series(lap, 7 + w, PALETTE[w], format!("{} {}", self.labels[lap], CHANNELS[7 + w])))
                .chain(std::iter::once(series(lap, 6, PALETTE[4], format!("{} v", self.labels[lap]))))
                .collect();
            panels.push(Panel {
                title: format!("vehicle and wheel speeds, {} [m/s]", self.labels[lap]),
                x_label: "distance [m]".into(),
                y_label: "speed".into(),
                series: s,
                equal_axes: false,
            });
        }
        panels.push(per_lap("lateral track position [-]", &[11]));
        render(&panels, 1000.0, 260.0)
    }
}

/// Corner zoom: speed, steering and per-wheel torque against arc length.
pub fn segment_svg(report: &SegmentReport, label: &str) -> String {
    let pts = |f: &dyn Fn(&StepRecord) -> f64| report.records.iter().map(|r| (r.s, f(r))).collect::<Vec<_>>();
    let torque = (0..4)
        .map(|w| Series::line(super::super::vehicle::WHEEL_NAMES[w], pts(&|r| r.torques()[w]), PALETTE[w]))
        .collect();
    let title = |t: &str| format!("{label} {t} ({:.0}-{:.0} m)", report.s_from, report.s_to);
    let panels = [
        Panel {
            title: title("speed"),
            x_label: "s [m]".into(),
            y_label: "v [m/s]".into(),
            series: vec![Series::line("v", pts(&|r| r.v), PALETTE[0])],
            equal_axes: false,
        },
        Panel {
            title: title("steering"),
            x_label: "s [m]".into(),
            y_label: "steer [-]".into(),
            series: vec![Series::line("steer", pts(&|r| r.steer), PALETTE[1])],
            equal_axes: false,
        },
        Panel {
            title: title("wheel torques"),
            x_label: "s [m]".into(),
            y_label: "torque command [-]".into(),
            series: torque,
            equal_axes: false,
        },
    ];
    render(&panels, 900.0, 260.0)
}

pub fn segment_csv(reports: &[(String, SegmentReport)]) -> Result<String> {
    #[derive(Serialize)]
    struct Row<'a> {
        segment: &'a str,
        s_from: f64,
        s_to: f64,
        samples: usize,
        direction: &'static str,
        min_speed: f64,
        max_abs_steer: f64,
        mean_torque_fl: f64,
        mean_torque_fr: f64,
        mean_torque_rl: f64,
        mean_torque_rr: f64,
        inside_mean_torque: f64,
        outside_mean_torque: f64,
        outside_biased: bool,
    }
    csv_string(reports.iter().map(|(name, r)| Row {
        segment: name,
        s_from: r.s_from,
        s_to: r.s_to,
        samples: r.records.len(),
        direction: match r.direction {
            super::analysis::TurnDirection::Left => "left",
            super::analysis::TurnDirection::Right => "right",
            super::analysis::TurnDirection::Straight => "straight",
        },
        min_speed: r.min_speed,
        max_abs_steer: r.max_abs_steer,
        mean_torque_fl: r.mean_torque[0],
        mean_torque_fr: r.mean_torque[1],
        mean_torque_rl: r.mean_torque[2],
        mean_torque_rr: r.mean_torque[3],
        inside_mean_torque: r.inside_mean_torque,
        outside_mean_torque: r.outside_mean_torque,
        outside_biased: r.outside_biased(),
    }))
}

pub fn slip_events_csv(events: &[SlipEvent]) -> Result<String> {
    if events.is_empty() {
        return Ok("kind,wheel,start_step,end_step,start_s,peak_slip,modulated\n".into());
    }
    csv_string(events)
}
