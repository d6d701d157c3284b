use std::f64::consts::PI;

use crate::track::{Track, LIDAR_RAYS};
use crate::vehicle::{VehicleParams, VehicleState};

pub const OBS_DIM: usize = 28;

pub const LIDAR_SCALE: f64 = 300.0;
pub const WHEEL_SPEED_SCALE: f64 = 80.0;
pub const SPEED_SCALE: f64 = 300.0;
pub const ANGLE_SCALE: f64 = PI;
pub const YAW_RATE_SCALE: f64 = PI;
pub const ACCEL_SCALE: f64 = 100.0;

/// Offsets of each group inside the observation vector.
pub mod index {
    pub const LIDAR: usize = 0;
    pub const WHEEL_SPEEDS: usize = 17;
    pub const EPISODE_DIST: usize = 21;
    pub const ANGLE: usize = 22;
    pub const SPEED_X: usize = 23;
    pub const SPEED_Y: usize = 24;
    pub const YAW_RATE: usize = 25;
    pub const ACCEL_X: usize = 26;
    pub const ACCEL_Y: usize = 27;
}

/// Physical (unscaled) observation channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawObservation {
    pub lidar: [f64; LIDAR_RAYS],
    /// Wheel circumferential speeds `omega * r`, m/s.
    pub wheel_speeds: [f64; 4],
    /// Unwrapped distance along the centerline, m.
    pub episode_dist: f64,
    pub angle: f64,
    pub speed_x: f64,
    pub speed_y: f64,
    pub yaw_rate: f64,
    pub accel_x: f64,
    pub accel_y: f64,
}

/// The scaled 28-value policy input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    /// Scales every channel; the episode distance is divided by `track_length`.
    pub fn from_raw(raw: &RawObservation, track_length: f64) -> Self {
        let mut v = [0.0; OBS_DIM];
        for (k, d) in raw.lidar.iter().enumerate() {
            v[index::LIDAR + k] = d / LIDAR_SCALE;
        }
        for (k, w) in raw.wheel_speeds.iter().enumerate() {
            v[index::WHEEL_SPEEDS + k] = w / WHEEL_SPEED_SCALE;
        }
        v[index::EPISODE_DIST] = raw.episode_dist / track_length;
        v[index::ANGLE] = raw.angle / ANGLE_SCALE;
        v[index::SPEED_X] = raw.speed_x / SPEED_SCALE;
        v[index::SPEED_Y] = raw.speed_y / SPEED_SCALE;
        v[index::YAW_RATE] = raw.yaw_rate / YAW_RATE_SCALE;
        v[index::ACCEL_X] = raw.accel_x / ACCEL_SCALE;
        v[index::ACCEL_Y] = raw.accel_y / ACCEL_SCALE;
        Observation(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn lidar(&self) -> &[f64] {
        &self.0[index::LIDAR..index::WHEEL_SPEEDS]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Assembles the observation for a car on `track` that has covered
/// `episode_dist` meters of centerline.
pub fn build_observation(
    state: &VehicleState,
    track: &Track,
    params: &VehicleParams,
    episode_dist: f64,
    ray_angles: &[f64],
    max_range: f64,
) -> Observation {
    let frame = track.frame([state.x, state.y], state.yaw);
    let mut lidar = [0.0; LIDAR_RAYS];
    track.raycast_into([state.x, state.y], state.yaw, ray_angles, max_range, &mut lidar);
    let raw = RawObservation {
        lidar,
        wheel_speeds: state.omega.map(|w| w * params.wheel_radius),
        episode_dist,
        angle: frame.heading_error,
        speed_x: state.vx,
        speed_y: state.vy,
        yaw_rate: state.yaw_rate,
        accel_x: state.ax,
        accel_y: state.ay,
    };
    Observation::from_raw(&raw, track.length())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw() -> RawObservation {
        RawObservation {
            lidar: [300.0; LIDAR_RAYS],
            wheel_speeds: [80.0; 4],
            episode_dist: 50.0,
            angle: PI,
            speed_x: 60.0,
            speed_y: -30.0,
            yaw_rate: PI / 2.0,
            accel_x: -50.0,
            accel_y: 100.0,
        }
    }

    #[test]
    fn channel_scales() {
        let o = Observation::from_raw(&raw(), 100.0);
        assert!(o.lidar().iter().all(|&v| v == 1.0));
        assert_eq!(o.0[index::WHEEL_SPEEDS], 1.0);
        assert_eq!(o.0[index::EPISODE_DIST], 0.5);
        assert_eq!(o.0[index::ANGLE], 1.0);
        assert!((o.0[index::SPEED_X] - 0.2).abs() < 1e-12);
        assert!((o.0[index::SPEED_Y] + 0.1).abs() < 1e-12);
        assert_eq!(o.0[index::YAW_RATE], 0.5);
        assert_eq!(o.0[index::ACCEL_X], -0.5);
        assert_eq!(o.0[index::ACCEL_Y], 1.0);
    }

    #[test]
    fn layout_is_contiguous() {
        assert_eq!(index::WHEEL_SPEEDS, LIDAR_RAYS);
        assert_eq!(index::ACCEL_Y + 1, OBS_DIM);
    }
}
