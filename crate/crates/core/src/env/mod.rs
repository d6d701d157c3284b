//! The racing MDP: normalized actions in, scaled observations and shaped
//! rewards out. One agent step holds the actuator command for
//! `agent_dt / physics_dt` physics substeps.

mod config;
mod observation;
mod reward;
mod termination;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::track::{lidar_angles, Track, LIDAR_RAYS};
use crate::vehicle::{physics_step_detailed, VehicleParams, VehicleState, WheelCommand};

pub use config::{ActuationMode, EnvConfig, RewardParams, TurnBackRule};
pub use observation::{
    build_observation, index as obs_index, Observation, RawObservation, ACCEL_SCALE, ANGLE_SCALE, LIDAR_SCALE, OBS_DIM,
    SPEED_SCALE, WHEEL_SPEED_SCALE, YAW_RATE_SCALE,
};
pub use reward::{action_penalty, progress_reward, PenaltyMode};
pub use termination::{check_termination, EpisodeCounters, TerminationKind};

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub timestep: usize,
    /// Raw arc length in `[0, L)`.
    pub s: f64,
    /// Unwrapped distance since reset.
    pub distance: f64,
    pub lateral_offset: f64,
    pub heading_error: f64,
    pub r_progr: f64,
    pub r_ter: f64,
    pub r_act: f64,
    pub lap_time: Option<f64>,
    pub substeps: usize,
    /// Clamped steering action in `[-1, 1]`.
    pub steer: f64,
    /// Clamped pedal action (passive mode), zero in active mode.
    pub pedal: f64,
    /// Normalized per-wheel torque command actually actuated, `[-1, 1]`.
    pub wheel_command: [f64; 4],
    /// Slip ratios at the last substep.
    pub slip_ratio: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    /// The optional time limit was reached; the episode is over but not terminal.
    pub truncated: bool,
    pub termination_kind: TerminationKind,
    pub info: StepInfo,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone)]
pub struct RacingEnv {
    track: Arc<Track>,
    vehicle: VehicleParams,
    config: EnvConfig,
    ray_angles: Vec<f64>,
    state: VehicleState,
    counters: EpisodeCounters,
    s_raw: f64,
    seed: u64,
    over: bool,
    physics_steps: u64,
}

impl RacingEnv {
    pub fn new(track: Arc<Track>, vehicle: VehicleParams, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        vehicle.validate()?;
        let seed = config.seed;
        let mut env = RacingEnv {
            track,
            vehicle,
            config,
            ray_angles: lidar_angles(LIDAR_RAYS),
            state: VehicleState::default(),
            counters: EpisodeCounters::default(),
            s_raw: 0.0,
            seed,
            over: false,
            physics_steps: 0,
        };
        env.reset(seed);
        Ok(env)
    }

    pub fn track(&self) -> &Track {
        &self.track
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn vehicle(&self) -> &VehicleParams {
        &self.vehicle
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn counters(&self) -> &EpisodeCounters {
        &self.counters
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn action_dim(&self) -> usize {
        self.config.actuation_mode.action_dim()
    }

    pub fn is_over(&self) -> bool {
        self.over
    }

    /// Total physics substeps integrated since construction.
    pub fn physics_steps(&self) -> u64 {
        self.physics_steps
    }

    pub fn finish_distance(&self) -> f64 {
        self.config.finish_distance.unwrap_or(self.track.length())
    }

    /// Places the car at `s = 0` on the centerline, aligned with the tangent.
    /// Reset is deterministic; the seed is recorded for reproducibility
    /// bookkeeping.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.seed = seed;
        let ([x, y], heading, _) = self.track.centerline_at(0.0);
        self.state = VehicleState::rolling(x, y, heading, self.config.initial_speed, &self.vehicle);
        self.counters = EpisodeCounters::default();
        self.s_raw = self.track.project([x, y]).s;
        self.over = false;
        self.observe()
    }

    /// Replaces the vehicle state (testing and scenario setup). Episode
    /// counters are kept.
    pub fn set_state(&mut self, state: VehicleState) {
        self.s_raw = self.track.project([state.x, state.y]).s;
        self.state = state;
    }

    pub fn observe(&self) -> Observation {
        build_observation(
            &self.state,
            &self.track,
            &self.vehicle,
            self.counters.distance,
            &self.ray_angles,
            self.config.max_range,
        )
    }

    /// Clamped actuator mapping: `(steer, pedal, per-wheel normalized torque)`.
    fn split_action(&self, action: &[f64]) -> (f64, f64, [f64; 4]) {
        let steer = action[0].clamp(-1.0, 1.0);
        match self.config.actuation_mode {
            ActuationMode::Active4wd => {
                let t = std::array::from_fn(|i| action[i + 1].clamp(-1.0, 1.0));
                (steer, 0.0, t)
            }
            ActuationMode::Passive4wd => {
                let pedal = action[1].clamp(-1.0, 1.0);
                (steer, pedal, [pedal; 4])
            }
        }
    }

    fn wheel_command(&self, steer: f64, pedal: f64, wheel_norm: &[f64; 4]) -> WheelCommand {
        match self.config.actuation_mode {
            ActuationMode::Active4wd => {
                WheelCommand::from_normalized(*wheel_norm, steer, &self.vehicle, &self.state.omega)
            }
            ActuationMode::Passive4wd => WheelCommand {
                torque: self.vehicle.passive.wheel_torques(pedal, &self.state.omega),
                steer: steer * self.vehicle.max_steer,
            },
        }
    }

    pub fn step(&mut self, raw_action: &[f64]) -> Result<StepResult> {
        if self.over {
            return Err(Error::EpisodeOver);
        }
        if raw_action.len() != self.action_dim() {
            return Err(Error::Dimension { context: "action", expected: self.action_dim(), actual: raw_action.len() });
        }
        if !raw_action.iter().all(|a| a.is_finite()) {
            return Err(Error::NonFinite("action"));
        }
        let (steer, pedal, wheel_norm) = self.split_action(raw_action);
        let substeps = self.config.substeps();
        let limit = self.config.reward.off_track_limit;
        let mut slip_ratio = [0.0; 4];
        for _ in 0..substeps {
            let cmd = self.wheel_command(steer, pedal, &wheel_norm);
            let offset = self.track.project([self.state.x, self.state.y]).lateral_offset.abs();
            let grip = if offset > 1.0 && offset <= limit { self.config.verge_friction_scale } else { 1.0 };
            if self.config.wall_model && offset >= limit {
                self.counters.damage += 1.0;
            }
            let (next, forces) = physics_step_detailed(&self.state, &self.vehicle, &cmd, self.config.physics_dt, grip)?;
            self.state = next;
            slip_ratio = forces.slip_ratio;
            self.physics_steps += 1;
        }

        let frame = self.track.frame([self.state.x, self.state.y], self.state.yaw);
        let prev_distance = self.counters.distance;
        let mut distance = prev_distance + self.track.ds_wrapped(frame.s, self.s_raw);
        self.s_raw = frame.s;
        let finish = self.finish_distance();
        let crossed = distance > finish;
        if crossed {
            // the lap counts up to the line
            distance = finish;
        }
        let r_progr = progress_reward(distance, prev_distance);
        let r = &self.config.reward;
        let r_act = action_penalty(raw_action, r.p_sc, r.p_bnd, r.penalty_mode);

        self.counters.timestep += 1;
        self.counters.distance = distance;
        let mut probe = self.counters;
        probe.episode_reward += r_progr - r_act;
        if crossed {
            // make the finish rule see the crossing even though the distance is capped
            probe.distance = f64::INFINITY;
        }
        let (kind, r_ter) = check_termination(&self.state, &frame, &probe, &self.config, finish);
        let reward = r_progr + r_ter - r_act;
        self.counters.episode_reward += reward;

        let terminated = kind != TerminationKind::None;
        let truncated = !terminated && self.config.max_episode_steps.is_some_and(|m| self.counters.timestep >= m);
        self.over = terminated || truncated;
        let lap_time =
            (kind == TerminationKind::Finish).then_some(self.counters.timestep as f64 * self.config.agent_dt);

        Ok(StepResult {
            observation: self.observe(),
            reward,
            terminated,
            truncated,
            termination_kind: kind,
            info: StepInfo {
                timestep: self.counters.timestep,
                s: frame.s,
                distance,
                lateral_offset: frame.lateral_offset,
                heading_error: frame.heading_error,
                r_progr,
                r_ter,
                r_act,
                lap_time,
                substeps,
                steer,
                pedal,
                wheel_command: wheel_norm,
                slip_ratio,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::{generate_circuit, CircuitKind, TrackPoint};

    fn straight(len: f64) -> Arc<Track> {
        let pts = vec![TrackPoint { x: 0.0, y: 0.0, half_width: 5.0 }, TrackPoint { x: len, y: 0.0, half_width: 5.0 }];
        Arc::new(Track::new("straight", pts, false).unwrap())
    }

    fn env_on(track: Arc<Track>, config: EnvConfig) -> RacingEnv {
        RacingEnv::new(track, VehicleParams::default(), config).unwrap()
    }

    #[test]
    fn reset_is_centered_and_symmetric() {
        let mut env = env_on(straight(1000.0), EnvConfig::default());
        let obs = env.reset(3);
        assert_eq!(obs.0[obs_index::EPISODE_DIST], 0.0);
        assert_eq!(obs.0[obs_index::ANGLE], 0.0);
        let lidar = obs.lidar();
        for k in 0..LIDAR_RAYS {
            assert!((lidar[k] - lidar[LIDAR_RAYS - 1 - k]).abs() < 1e-12);
        }
        let again = env.reset(3);
        assert_eq!(obs, again);
    }

    #[test]
    fn passive_layout_matches_active() {
        let t = straight(1000.0);
        let a = env_on(t.clone(), EnvConfig::default()).observe();
        let cfg = EnvConfig { actuation_mode: ActuationMode::Passive4wd, ..Default::default() };
        let p = env_on(t, cfg).observe();
        assert_eq!(a.0.len(), p.0.len());
        assert_eq!(a, p);
    }

    #[test]
    fn one_step_runs_25_substeps() {
        let mut env = env_on(straight(1000.0), EnvConfig::default());
        let r = env.step(&[0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.info.substeps, 25);
        assert_eq!(env.physics_steps(), 25);
    }

    #[test]
    fn reward_decomposes_exactly() {
        let mut env = env_on(straight(1000.0), EnvConfig::default());
        for k in 0..40 {
            let a = [0.05 * (k as f64).sin(), 1.0, 0.9, 20.0, 1.0];
            let r = env.step(&a).unwrap();
            assert_eq!(r.reward, r.info.r_progr + r.info.r_ter - r.info.r_act);
            if r.done() {
                break;
            }
        }
    }

    #[test]
    fn clamped_steer_but_raw_penalty() {
        let mut env = env_on(straight(1000.0), EnvConfig::default());
        let r = env.step(&[2.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.info.steer, 1.0);
        let expected = action_penalty(&[2.0, 0.0, 0.0, 0.0, 0.0], 15.0, 1.2, PenaltyMode::Hinged);
        assert_eq!(r.info.r_act, expected);
    }

    #[test]
    fn stepping_after_termination_fails() {
        let cfg = EnvConfig { max_episode_steps: Some(2), ..Default::default() };
        let mut env = env_on(straight(1000.0), cfg);
        env.step(&[0.0; 5]).unwrap();
        let r = env.step(&[0.0; 5]).unwrap();
        assert!(r.truncated && !r.terminated);
        assert!(matches!(env.step(&[0.0; 5]), Err(Error::EpisodeOver)));
    }

    #[test]
    fn bad_actions_rejected() {
        let mut env = env_on(straight(1000.0), EnvConfig::default());
        assert!(matches!(env.step(&[0.0; 2]), Err(Error::Dimension { .. })));
        assert!(matches!(env.step(&[f64::NAN, 0.0, 0.0, 0.0, 0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn constant_speed_reward_is_progress() {
        let cfg = EnvConfig { initial_speed: 20.0, ..Default::default() };
        let mut env = env_on(straight(1000.0), cfg);
        let before = env.state().x;
        let r = env.step(&[0.0; 5]).unwrap();
        let moved = env.state().x - before;
        assert_eq!(r.info.r_act, 0.0);
        assert_eq!(r.info.r_ter, 0.0);
        assert!((r.reward - moved).abs() < 1e-9, "{} vs {moved}", r.reward);
    }

    #[test]
    fn finishes_a_straight() {
        let mut env = env_on(straight(60.0), EnvConfig::default());
        let mut total = 0.0;
        let mut last = None;
        for _ in 0..400 {
            let r = env.step(&[0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
            total += r.info.r_progr;
            if r.done() {
                last = Some(r);
                break;
            }
        }
        let last = last.expect("episode ended");
        assert_eq!(last.termination_kind, TerminationKind::Finish);
        assert_eq!(last.info.r_ter, 100.0);
        assert!((total - 60.0).abs() < 1e-9);
        let lap = last.info.lap_time.unwrap();
        assert!((lap - last.info.timestep as f64 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn oval_lap_wrap_is_unwrapped() {
        let track = Arc::new(generate_circuit(CircuitKind::oval_default()).unwrap());
        let l = track.length();
        let cfg = EnvConfig { initial_speed: 10.0, ..Default::default() };
        let mut env = env_on(track.clone(), cfg);
        // place the car 1 m before the line, on the centerline, heading along it
        let ([x, y], h, _) = track.centerline_at(l - 1.0);
        env.set_state(VehicleState::rolling(x, y, h, 40.0, env.vehicle()));
        env.counters.distance = l - 1.0 - 50.0;
        let r = env.step(&[0.0; 5]).unwrap();
        assert!(r.info.r_progr > 1.5 && r.info.r_progr < 2.5, "{}", r.info.r_progr);
        assert!(r.info.s < 1.0);
    }
}
