use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::StepResult;
use crate::error::{Error, Result};
use crate::vehicle::{VehicleParams, VehicleState};

/// One agent step of telemetry. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Time at the end of the step, s.
    pub time: f64,
    /// Raw centerline arc length, m.
    pub s: f64,
    /// Unwrapped centerline distance since reset, m.
    pub distance: f64,
    pub lateral_offset: f64,
    pub heading_error: f64,
    /// Speed magnitude, m/s.
    pub v: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub yaw_rate: f64,
    pub a_x: f64,
    pub a_y: f64,
    /// Clamped steering action.
    pub steer: f64,
    /// Clamped pedal action (passive mode only).
    pub pedal: f64,
    /// Normalized per-wheel torque command (the pedal in passive mode).
    pub torque_fl: f64,
    pub torque_fr: f64,
    pub torque_rl: f64,
    pub torque_rr: f64,
    /// Wheel circumferential speeds, m/s.
    pub wheel_speed_fl: f64,
    pub wheel_speed_fr: f64,
    pub wheel_speed_rl: f64,
    pub wheel_speed_rr: f64,
    pub slip_fl: f64,
    pub slip_fr: f64,
    pub slip_rl: f64,
    pub slip_rr: f64,
    pub r_progr: f64,
    pub r_ter: f64,
    pub r_act: f64,
    pub reward: f64,
}

/// CSV header, in column order.
pub const COLUMNS: [&str; 30] = [
    "step",
    "time",
    "s",
    "distance",
    "lateral_offset",
    "heading_error",
    "v",
    "v_x",
    "v_y",
    "yaw_rate",
    "a_x",
    "a_y",
    "steer",
    "pedal",
    "torque_fl",
    "torque_fr",
    "torque_rl",
    "torque_rr",
    "wheel_speed_fl",
    "wheel_speed_fr",
    "wheel_speed_rl",
    "wheel_speed_rr",
    "slip_fl",
    "slip_fr",
    "slip_rl",
    "slip_rr",
    "r_progr",
    "r_ter",
    "r_act",
    "reward",
];

impl StepRecord {
    /// Assembles a record from a step result and the post-step state.
    pub fn from_step(result: &StepResult, state: &VehicleState, params: &VehicleParams, agent_dt: f64) -> Self {
        let info = &result.info;
        let ws = state.omega.map(|w| w * params.wheel_radius);
        StepRecord {
            step: info.timestep,
            time: info.timestep as f64 * agent_dt,
            s: info.s,
            distance: info.distance,
            lateral_offset: info.lateral_offset,
            heading_error: info.heading_error,
            v: state.speed(),
            v_x: state.vx,
            v_y: state.vy,
            yaw_rate: state.yaw_rate,
            a_x: state.ax,
            a_y: state.ay,
            steer: info.steer,
            pedal: info.pedal,
            torque_fl: info.wheel_command[0],
            torque_fr: info.wheel_command[1],
            torque_rl: info.wheel_command[2],
            torque_rr: info.wheel_command[3],
            wheel_speed_fl: ws[0],
            wheel_speed_fr: ws[1],
            wheel_speed_rl: ws[2],
            wheel_speed_rr: ws[3],
            slip_fl: info.slip_ratio[0],
            slip_fr: info.slip_ratio[1],
            slip_rl: info.slip_ratio[2],
            slip_rr: info.slip_ratio[3],
            r_progr: info.r_progr,
            r_ter: info.r_ter,
            r_act: info.r_act,
            reward: result.reward,
        }
    }

    pub fn torques(&self) -> [f64; 4] {
        [self.torque_fl, self.torque_fr, self.torque_rl, self.torque_rr]
    }

    pub fn slips(&self) -> [f64; 4] {
        [self.slip_fl, self.slip_fr, self.slip_rl, self.slip_rr]
    }

    pub fn wheel_speeds(&self) -> [f64; 4] {
        [self.wheel_speed_fl, self.wheel_speed_fr, self.wheel_speed_rl, self.wheel_speed_rr]
    }

    pub fn is_finite(&self) -> bool {
        [
            self.time,
            self.s,
            self.distance,
            self.lateral_offset,
            self.heading_error,
            self.v,
            self.v_x,
            self.v_y,
            self.yaw_rate,
            self.a_x,
            self.a_y,
            self.steer,
            self.pedal,
            self.r_progr,
            self.r_ter,
            self.r_act,
            self.reward,
        ]
        .into_iter()
        .chain(self.torques())
        .chain(self.wheel_speeds())
        .chain(self.slips())
        .all(f64::is_finite)
    }
}

/// Streams records to a CSV file.
pub struct TelemetryWriter {
    inner: csv::Writer<BufWriter<File>>,
    rows: usize,
}

impl TelemetryWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let inner = csv::WriterBuilder::new().has_headers(true).from_writer(BufWriter::new(file));
        Ok(TelemetryWriter { inner, rows: 0 })
    }

    pub fn record(&mut self, record: &StepRecord) -> Result<()> {
        self.inner.serialize(record)?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Flushes buffered rows; call at episode end.
    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::Csv(e.into()))
    }

    pub fn finish(mut self) -> Result<()> {
        self.flush()?;
        let buf = self.inner.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        buf.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?.sync_all().map_err(|e| Error::Csv(e.into()))
    }
}

pub fn write_telemetry(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = TelemetryWriter::create(path)?;
    for r in records {
        w.record(r)?;
    }
    w.finish()
}

/// Telemetry read back from CSV. Rows that fail to parse are skipped and
/// counted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TelemetryLog {
    pub records: Vec<StepRecord>,
    pub skipped_rows: usize,
}

pub fn read_telemetry(path: &Path) -> Result<TelemetryLog> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_telemetry(&text)
}

pub fn parse_telemetry(text: &str) -> Result<TelemetryLog> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if let Some(missing) = COLUMNS.iter().find(|c| !headers.iter().any(|h| h == **c)) {
        return Err(Error::MissingColumn((*missing).to_string()));
    }
    let mut log = TelemetryLog::default();
    for row in reader.records() {
        let parsed =
            row.map_err(Error::from).and_then(|r| r.deserialize::<StepRecord>(Some(&headers)).map_err(Error::from));
        match parsed {
            Ok(rec) if rec.is_finite() => log.records.push(rec),
            _ => log.skipped_rows += 1,
        }
    }
    Ok(log)
}
