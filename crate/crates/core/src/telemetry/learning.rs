use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the training log (JSON Lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrainLogEntry {
    Update(UpdateEntry),
    Eval(EvalEntry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateEntry {
    /// Total environment steps after this update's rollout.
    pub step: u64,
    pub update: u64,
    pub learning_rate: f64,
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub explained_variance: Option<f64>,
    /// Training episodes finished during this rollout.
    pub episodes: usize,
    pub mean_episode_return: Option<f64>,
    pub laps: usize,
    pub best_lap_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub step: u64,
    /// Best stochastic (training) lap since the previous evaluation.
    pub explored_lap_time: Option<f64>,
    pub explored_episodes: usize,
    pub explored_laps: usize,
    pub explored_terminations: BTreeMap<String, usize>,
    /// Best deterministic lap among the evaluation episodes.
    pub exploited_lap_time: Option<f64>,
    pub exploited_termination: String,
    pub exploited_distance: f64,
    pub exploited_return: f64,
    pub exploited_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurvePoint {
    pub steps: u64,
    pub explored_lap_time: Option<f64>,
    pub exploited_lap_time: Option<f64>,
    pub termination: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub points: Vec<LearningCurvePoint>,
    pub updates: usize,
    pub skipped_lines: usize,
}

impl LearningCurve {
    /// First step count at which a stochastic lap had been completed.
    pub fn first_explored_completion(&self) -> Option<u64> {
        self.points.iter().find(|p| p.explored_lap_time.is_some()).map(|p| p.steps)
    }

    pub fn first_exploited_completion(&self) -> Option<u64> {
        self.points.iter().find(|p| p.exploited_lap_time.is_some()).map(|p| p.steps)
    }

    pub fn best_exploited_until(&self, steps: u64) -> Option<f64> {
        self.points.iter().filter(|p| p.steps <= steps).filter_map(|p| p.exploited_lap_time).reduce(f64::min)
    }

    /// Termination counts of the deterministic evaluations.
    pub fn termination_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for p in &self.points {
            *m.entry(p.termination.clone()).or_insert(0) += 1;
        }
        m
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        for p in &self.points {
            w.serialize(p)?;
        }
        if self.points.is_empty() {
            w.write_record(["steps", "explored_lap_time", "exploited_lap_time", "termination"])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Parses a training log; malformed lines are skipped and counted.
pub fn parse_learning_curve(text: &str) -> LearningCurve {
    let mut curve = LearningCurve::default();
    let mut last_step = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str::<TrainLogEntry>(line) {
            Ok(TrainLogEntry::Update(_)) => curve.updates += 1,
            Ok(TrainLogEntry::Eval(e)) => {
                // a resumed run may repeat steps; keep the series strictly increasing
                if last_step.is_some_and(|s| e.step <= s) {
                    curve.skipped_lines += 1;
                    continue;
                }
                last_step = Some(e.step);
                curve.points.push(LearningCurvePoint {
                    steps: e.step,
                    explored_lap_time: e.explored_lap_time,
                    exploited_lap_time: e.exploited_lap_time,
                    termination: e.exploited_termination,
                });
            }
            Err(_) => curve.skipped_lines += 1,
        }
    }
    curve
}

pub fn learning_curve(path: &Path) -> Result<LearningCurve> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_learning_curve(&text))
}
