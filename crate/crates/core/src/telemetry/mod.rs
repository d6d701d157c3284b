//! Per-step recording, lap and learning-curve aggregation, GG envelopes,
//! corner reports and slip analysis.

mod analysis;
mod export;
mod learning;
mod record;
pub mod svg;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analysis::{
    detect_corners, gg_envelope, gg_envelope_binned, segment_report, slip_events, GgEnvelope, SegmentReport, SlipEvent,
    SlipKind, TurnDirection, DEFAULT_BIN_DEG, DEFAULT_CORNER_CURVATURE, DEFAULT_CORNER_LENGTH, DEFAULT_LOCK_THRESHOLD,
    DEFAULT_SPIN_THRESHOLD, PHASE_THRESHOLD, STANDARD_GRAVITY,
};
pub use export::{
    compare_laps, envelope_csv, gg_svg, learning_curve_svg, segment_csv, segment_svg, slip_events_csv, LapComparison,
    CHANNELS,
};
pub use learning::{
    learning_curve, parse_learning_curve, EvalEntry, LearningCurve, LearningCurvePoint, TrainLogEntry, UpdateEntry,
};
pub use record::{
    parse_telemetry, read_telemetry, write_telemetry, StepRecord, TelemetryLog, TelemetryWriter, COLUMNS,
};

/// One entry of the JSON episode index written next to telemetry CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeIndexEntry {
    pub episode: usize,
    pub file: String,
    pub termination: String,
    pub lap_time: Option<f64>,
    pub steps: usize,
    pub distance: f64,
    pub episode_return: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeIndex {
    pub track: String,
    pub actuation_mode: String,
    pub episodes: Vec<EpisodeIndexEntry>,
}

impl EpisodeIndex {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
