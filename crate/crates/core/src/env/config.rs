use serde::{Deserialize, Serialize};

use super::reward::PenaltyMode;
use crate::error::{Error, Result};
use crate::track::DEFAULT_MAX_RANGE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ActuationMode {
    /// Steering plus four independent wheel torques.
    #[default]
    #[serde(rename = "active_4wd")]
    Active4wd,
    /// Steering plus a single throttle/brake pedal.
    #[serde(rename = "passive_4wd")]
    Passive4wd,
}

impl ActuationMode {
    pub fn action_dim(&self) -> usize {
        match self {
            ActuationMode::Active4wd => 5,
            ActuationMode::Passive4wd => 2,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ActuationMode::Active4wd => "active_4wd",
            ActuationMode::Passive4wd => "passive_4wd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "active_4wd" => Some(ActuationMode::Active4wd),
            "passive_4wd" => Some(ActuationMode::Passive4wd),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnBackRule {
    /// The car faces backwards: `|heading_error| > pi/2`.
    #[default]
    FacingBackward,
    /// Any negative heading error.
    NegativeAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    /// Action scaling `p_sc`.
    pub p_sc: f64,
    /// Scaled action bound `p_bnd`.
    pub p_bnd: f64,
    /// Reference speed; parsed for completeness, not used by any reward term.
    pub v_ref: f64,
    pub penalty_mode: PenaltyMode,
    pub finish_reward: f64,
    pub off_track_reward: f64,
    pub turned_back_reward: f64,
    pub damage_reward: f64,
    pub backwards_reward: f64,
    pub low_progress_reward: f64,
    /// `|lateral_offset|` beyond which the car has left the track.
    pub off_track_limit: f64,
    /// Steps after which a negative episode reward ends the episode.
    pub low_progress_steps: usize,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            p_sc: 15.0,
            p_bnd: 1.2,
            v_ref: 20.0,
            penalty_mode: PenaltyMode::Hinged,
            finish_reward: 100.0,
            off_track_reward: -10.0,
            turned_back_reward: -10.0,
            damage_reward: -10.0,
            backwards_reward: -10.0,
            low_progress_reward: -10.0,
            off_track_limit: 1.2,
            low_progress_steps: 500,
        }
    }
}

impl RewardParams {
    /// Progress-only shaping: every terminal reward set to zero.
    pub fn progress_only() -> Self {
        RewardParams {
            finish_reward: 0.0,
            off_track_reward: 0.0,
            turned_back_reward: 0.0,
            damage_reward: 0.0,
            backwards_reward: 0.0,
            low_progress_reward: 0.0,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub actuation_mode: ActuationMode,
    /// Agent decision period, s.
    pub agent_dt: f64,
    /// Physics integration step, s.
    pub physics_dt: f64,
    pub reward: RewardParams,
    /// Distance that completes an episode, m. Defaults to the track length.
    pub finish_distance: Option<f64>,
    pub turn_back_rule: TurnBackRule,
    /// Friction multiplier while `1 < |lateral_offset| <= off_track_limit`.
    pub verge_friction_scale: f64,
    /// Counts boundary contact during substeps as damage.
    pub wall_model: bool,
    /// Lidar range, m.
    pub max_range: f64,
    /// Forward speed at reset, m/s.
    pub initial_speed: f64,
    /// Optional time limit in agent steps; reaching it truncates the episode.
    pub max_episode_steps: Option<usize>,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            actuation_mode: ActuationMode::Active4wd,
            agent_dt: 0.05,
            physics_dt: 0.002,
            reward: RewardParams::default(),
            finish_distance: None,
            turn_back_rule: TurnBackRule::FacingBackward,
            verge_friction_scale: 0.6,
            wall_model: false,
            max_range: DEFAULT_MAX_RANGE,
            initial_speed: 0.0,
            max_episode_steps: None,
            seed: 0,
        }
    }
}

impl EnvConfig {
    /// Physics substeps per agent step.
    pub fn substeps(&self) -> usize {
        (self.agent_dt / self.physics_dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.physics_dt > 0.0 && self.agent_dt > 0.0) {
            return Err(Error::param("physics_dt", "time steps must be positive"));
        }
        let n = self.substeps();
        if n == 0 || (n as f64 * self.physics_dt - self.agent_dt).abs() > 1e-9 * self.agent_dt {
            return Err(Error::param(
                "agent_dt",
                format!("{} is not an integer multiple of physics_dt {}", self.agent_dt, self.physics_dt),
            ));
        }
        if !(self.reward.p_sc > 0.0) {
            return Err(Error::param("reward.p_sc", "must be > 0"));
        }
        if !(self.reward.p_bnd > 1.0) {
            return Err(Error::param("reward.p_bnd", "must be > 1"));
        }
        if let Some(d) = self.finish_distance {
            if !(d > 0.0) {
                return Err(Error::param("finish_distance", "must be > 0"));
            }
        }
        if !(self.verge_friction_scale > 0.0) {
            return Err(Error::param("verge_friction_scale", "must be > 0"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::param("max_range", "must be > 0"));
        }
        if !(self.initial_speed >= 0.0) {
            return Err(Error::param("initial_speed", "must be >= 0"));
        }
        Ok(())
    }
}
