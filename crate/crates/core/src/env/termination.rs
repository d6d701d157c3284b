use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::{EnvConfig, TurnBackRule};
use crate::track::TrackFrame;
use crate::vehicle::VehicleState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationKind {
    Finish,
    OffTrack,
    TurnedBack,
    Damage,
    Backwards,
    LowProgress,
    None,
}

impl TerminationKind {
    pub const ALL: [TerminationKind; 7] = [
        TerminationKind::Finish,
        TerminationKind::OffTrack,
        TerminationKind::TurnedBack,
        TerminationKind::Damage,
        TerminationKind::Backwards,
        TerminationKind::LowProgress,
        TerminationKind::None,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationKind::Finish => "finish",
            TerminationKind::OffTrack => "off_track",
            TerminationKind::TurnedBack => "turned_back",
            TerminationKind::Damage => "damage",
            TerminationKind::Backwards => "backwards",
            TerminationKind::LowProgress => "low_progress",
            TerminationKind::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for TerminationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Episode bookkeeping consulted by the termination rules.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeCounters {
    /// Agent steps taken so far, including the current one.
    pub timestep: usize,
    /// Reward accumulated so far, including the current step's progress and
    /// action penalty.
    pub episode_reward: f64,
    /// Unwrapped centerline distance since reset, m.
    pub distance: f64,
    /// Accumulated wall contacts (only with the wall model enabled).
    pub damage: f64,
}

/// Applies the termination rules in fixed priority order and returns the
/// first one that fires with its terminal reward.
pub fn check_termination(
    state: &VehicleState,
    frame: &TrackFrame,
    counters: &EpisodeCounters,
    config: &EnvConfig,
    finish_distance: f64,
) -> (TerminationKind, f64) {
    let r = &config.reward;
    if counters.distance > finish_distance {
        return (TerminationKind::Finish, r.finish_reward);
    }
    if frame.lateral_offset.abs() > r.off_track_limit {
        return (TerminationKind::OffTrack, r.off_track_reward);
    }
    let turned_back = match config.turn_back_rule {
        TurnBackRule::FacingBackward => frame.heading_error.abs() > FRAC_PI_2,
        TurnBackRule::NegativeAngle => frame.heading_error < 0.0,
    };
    if turned_back {
        return (TerminationKind::TurnedBack, r.turned_back_reward);
    }
    if counters.damage > 0.0 {
        return (TerminationKind::Damage, r.damage_reward);
    }
    if state.vx < 0.0 {
        return (TerminationKind::Backwards, r.backwards_reward);
    }
    if counters.timestep > r.low_progress_steps && counters.episode_reward < 0.0 {
        return (TerminationKind::LowProgress, r.low_progress_reward);
    }
    (TerminationKind::None, 0.0)
}
