//! Track file format (JSON):
//!
//! ```json
//! { "name": "oval", "closed": true,
//!   "points": [ { "x": 0.0, "y": 0.0, "half_width": 5.0 }, ... ] }
//! ```
//!
//! Lengths are meters. Closed tracks do not repeat the first point.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Track, TrackPoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackFile {
    pub name: String,
    pub closed: bool,
    pub points: Vec<TrackPoint>,
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { field: field.into(), message: message.into() }
}

/// Parses the track schema, reporting the first offending field by path.
pub fn parse_track(text: &str) -> Result<TrackFile> {
    let root: Value = serde_json::from_str(text).map_err(|e| schema("<root>", e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| schema("<root>", "expected a JSON object"))?;
    let name = match obj.get("name") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(schema("name", "expected a string")),
        None => return Err(schema("name", "missing")),
    };
    let closed = match obj.get("closed") {
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(schema("closed", "expected a boolean")),
        None => return Err(schema("closed", "missing")),
    };
    let raw_points = match obj.get("points") {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(schema("points", "expected an array")),
        None => return Err(schema("points", "missing")),
    };
    let mut points = Vec::with_capacity(raw_points.len());
    for (i, p) in raw_points.iter().enumerate() {
        let p = p.as_object().ok_or_else(|| schema(format!("points[{i}]"), "expected an object"))?;
        let num = |key: &str| -> Result<f64> {
            p.get(key)
                .ok_or_else(|| schema(format!("points[{i}].{key}"), "missing"))?
                .as_f64()
                .ok_or_else(|| schema(format!("points[{i}].{key}"), "expected a number"))
        };
        points.push(TrackPoint { x: num("x")?, y: num("y")?, half_width: num("half_width")? });
    }
    Ok(TrackFile { name, closed, points })
}

pub fn load_track(path: impl AsRef<Path>) -> Result<Track> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = parse_track(&text)?;
    Track::new(file.name, file.points, file.closed)
}

pub fn track_to_json(track: &Track) -> String {
    let file = TrackFile { name: track.name().to_string(), closed: track.is_closed(), points: track.points().to_vec() };
    serde_json::to_string_pretty(&file).expect("track serializes")
}

pub fn save_track(track: &Track, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, track_to_json(track)).map_err(|e| Error::io(path, e))
}
