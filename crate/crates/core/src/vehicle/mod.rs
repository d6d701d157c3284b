//! Planar double-track vehicle: 3 body DOF (x, y, yaw) plus four wheel spins.
//!
//! Body frame: `x` forward, `y` left, yaw counter-clockwise. Wheels are always
//! ordered FL, FR, RL, RR.

mod dynamics;
mod tire;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dynamics::{normal_loads, physics_step, physics_step_detailed, slip_quantities, StepForces};
pub use tire::{long_force_slope, tire_forces, tire_forces_scaled, TireParams};

pub const GRAVITY: f64 = 9.81;

pub const FL: usize = 0;
pub const FR: usize = 1;
pub const RL: usize = 2;
pub const RR: usize = 3;
pub const WHEEL_NAMES: [&str; 4] = ["fl", "fr", "rl", "rr"];

/// Per-wheel electric motor: constant torque up to the base speed, constant
/// power above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorCurve {
    /// Torque plateau per wheel, N·m.
    pub max_torque: f64,
    /// Base speed where the plateau meets the power hyperbola, rad/s.
    pub base_speed: f64,
    /// Mechanical brake torque available per wheel, N·m.
    pub brake_torque: f64,
}

impl MotorCurve {
    /// Peak power per wheel, W.
    pub fn max_power(&self) -> f64 {
        self.max_torque * self.base_speed
    }
}

impl Default for MotorCurve {
    fn default() -> Self {
        // 80 kW per wheel, 320 kW combined
        MotorCurve { max_torque: 1333.0, base_speed: 60.0, brake_torque: 2500.0 }
    }
}

/// Drive torque limit of a wheel motor at wheel speed `omega`.
pub fn motor_torque_limit(curve: &MotorCurve, omega: f64) -> f64 {
    let w = omega.abs().max(1e-9);
    curve.max_torque.min(curve.max_power() / w)
}

/// Conventional drivetrain used by the passive 4WD car: one engine, 50:50
/// front/rear split with open differentials (equal torque on every wheel),
/// fixed brake bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassiveDrivetrain {
    /// Peak engine power, W. Matches the combined motor power by default.
    pub engine_power: f64,
    /// Total torque at the wheels at low speed, N·m.
    pub engine_torque: f64,
    /// Total brake torque over all four wheels, N·m.
    pub brake_torque: f64,
    /// Fraction of brake torque on the front axle.
    pub brake_bias_front: f64,
}

impl PassiveDrivetrain {
    pub fn matched_to(motor: &MotorCurve) -> Self {
        PassiveDrivetrain {
            engine_power: 4.0 * motor.max_power(),
            engine_torque: 4.0 * motor.max_torque,
            brake_torque: 4.0 * motor.brake_torque,
            brake_bias_front: 0.6,
        }
    }

    /// Per-wheel signed torques for a pedal position in `[-1, 1]`.
    pub fn wheel_torques(&self, pedal: f64, omega: &[f64; 4]) -> [f64; 4] {
        if pedal >= 0.0 {
            let mean = omega.iter().map(|w| w.abs()).sum::<f64>() / 4.0;
            let total = self.engine_torque.min(self.engine_power / mean.max(1e-9));
            [pedal * total / 4.0; 4]
        } else {
            let f = pedal * self.brake_torque * self.brake_bias_front / 2.0;
            let r = pedal * self.brake_torque * (1.0 - self.brake_bias_front) / 2.0;
            [f, f, r, r]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    pub mass: f64,
    pub yaw_inertia: f64,
    /// CG to front axle, m.
    pub cg_to_front: f64,
    /// CG to rear axle, m.
    pub cg_to_rear: f64,
    pub track_width: f64,
    pub cg_height: f64,
    pub wheel_radius: f64,
    pub wheel_inertia: f64,
    /// Drag coefficient times frontal area, m².
    pub drag_area: f64,
    pub air_density: f64,
    pub rolling_resistance: f64,
    /// Front wheel steering lock, rad.
    pub max_steer: f64,
    /// Speed floor regularizing slip at standstill, m/s.
    pub slip_speed_floor: f64,
    pub tire: TireParams,
    pub motor: MotorCurve,
    pub passive: PassiveDrivetrain,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let motor = MotorCurve::default();
        VehicleParams {
            mass: 1100.0,
            yaw_inertia: 1500.0,
            cg_to_front: 1.2,
            cg_to_rear: 1.4,
            track_width: 1.6,
            cg_height: 0.4,
            wheel_radius: 0.33,
            wheel_inertia: 1.2,
            drag_area: 1.0,
            air_density: 1.2,
            rolling_resistance: 0.015,
            max_steer: 0.366,
            slip_speed_floor: 1.0,
            tire: TireParams::default(),
            motor,
            passive: PassiveDrivetrain::matched_to(&motor),
        }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.cg_to_front + self.cg_to_rear
    }

    /// Wheel contact positions in the body frame, FL, FR, RL, RR.
    pub fn wheel_positions(&self) -> [[f64; 2]; 4] {
        let h = self.track_width / 2.0;
        [[self.cg_to_front, h], [self.cg_to_front, -h], [-self.cg_to_rear, h], [-self.cg_to_rear, -h]]
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("cg_to_front", self.cg_to_front),
            ("cg_to_rear", self.cg_to_rear),
            ("track_width", self.track_width),
            ("cg_height", self.cg_height),
            ("wheel_radius", self.wheel_radius),
            ("wheel_inertia", self.wheel_inertia),
            ("slip_speed_floor", self.slip_speed_floor),
            ("tire.mu", self.tire.mu),
            ("tire.long_stiffness", self.tire.long_stiffness),
            ("tire.cornering_stiffness", self.tire.cornering_stiffness),
            ("tire.shape", self.tire.shape),
            ("motor.max_torque", self.motor.max_torque),
            ("motor.base_speed", self.motor.base_speed),
            ("motor.brake_torque", self.motor.brake_torque),
            ("passive.engine_power", self.passive.engine_power),
            ("passive.engine_torque", self.passive.engine_torque),
            ("passive.brake_torque", self.passive.brake_torque),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("drag_area", self.drag_area),
            ("air_density", self.air_density),
            ("rolling_resistance", self.rolling_resistance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.max_steer > 0.0 && self.max_steer < std::f64::consts::FRAC_PI_2) {
            return Err(Error::param("max_steer", "must lie in (0, pi/2)"));
        }
        if !(0.0..=1.0).contains(&self.passive.brake_bias_front) {
            return Err(Error::param("passive.brake_bias_front", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: VehicleParams =
            toml::from_str(text).map_err(|e| Error::Schema { field: "vehicle".into(), message: e.to_string() })?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("vehicle params serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Body-frame longitudinal velocity, m/s.
    pub vx: f64,
    /// Body-frame lateral velocity, m/s.
    pub vy: f64,
    pub yaw_rate: f64,
    /// Wheel spin rates, rad/s.
    pub omega: [f64; 4],
    /// Body-frame accelerations from the last step, m/s².
    pub ax: f64,
    pub ay: f64,
}

impl VehicleState {
    /// Car at `(x, y)` heading `yaw`, rolling straight at `speed`.
    pub fn rolling(x: f64, y: f64, yaw: f64, speed: f64, params: &VehicleParams) -> Self {
        VehicleState { x, y, yaw, vx: speed, omega: [speed / params.wheel_radius; 4], ..Default::default() }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.yaw, self.vx, self.vy, self.yaw_rate, self.ax, self.ay]
            .iter()
            .chain(self.omega.iter())
            .all(|v| v.is_finite())
    }

    /// Translational, yaw and wheel-spin kinetic energy, J.
    pub fn kinetic_energy(&self, params: &VehicleParams) -> f64 {
        0.5 * params.mass * (self.vx * self.vx + self.vy * self.vy)
            + 0.5 * params.yaw_inertia * self.yaw_rate * self.yaw_rate
            + 0.5 * params.wheel_inertia * self.omega.iter().map(|w| w * w).sum::<f64>()
    }

    /// Reflection about the body x-axis: negates lateral quantities and swaps
    /// left and right wheels.
    pub fn mirrored(&self) -> Self {
        VehicleState {
            x: self.x,
            y: -self.y,
            yaw: -self.yaw,
            vx: self.vx,
            vy: -self.vy,
            yaw_rate: -self.yaw_rate,
            omega: swap_sides(self.omega),
            ax: self.ax,
            ay: -self.ay,
        }
    }
}

/// Swaps left and right entries of a per-wheel array.
pub fn swap_sides<T: Copy>(w: [T; 4]) -> [T; 4] {
    [w[FR], w[FL], w[RR], w[RL]]
}

/// Actuator command for one physics step. Positive torque drives the wheel;
/// negative torque is a brake whose magnitude opposes wheel rotation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelCommand {
    pub torque: [f64; 4],
    /// Front axle steering angle, rad, positive to the left.
    pub steer: f64,
}

impl WheelCommand {
    pub fn mirrored(&self) -> Self {
        WheelCommand { torque: swap_sides(self.torque), steer: -self.steer }
    }

    /// Maps normalized per-wheel commands in `[-1, 1]` onto the motor curve at
    /// the current wheel speeds (drive) or onto the brake limit (brake).
    pub fn from_normalized(torque: [f64; 4], steer: f64, params: &VehicleParams, omega: &[f64; 4]) -> Self {
        let mut out = [0.0; 4];
        for i in 0..4 {
            let u = torque[i].clamp(-1.0, 1.0);
            out[i] =
                if u >= 0.0 { u * motor_torque_limit(&params.motor, omega[i]) } else { u * params.motor.brake_torque };
        }
        WheelCommand { torque: out, steer: steer.clamp(-1.0, 1.0) * params.max_steer }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motor_curve_regions() {
        let m = MotorCurve::default();
        assert_eq!(motor_torque_limit(&m, 0.0), m.max_torque);
        assert!((motor_torque_limit(&m, m.base_speed) - m.max_torque).abs() < 1e-9);
        assert!((motor_torque_limit(&m, 2.0 * m.base_speed) - m.max_torque / 2.0).abs() < 1e-9);
        assert_eq!(motor_torque_limit(&m, -30.0), motor_torque_limit(&m, 30.0));
    }

    #[test]
    fn defaults_validate_and_round_trip_toml() {
        let p = VehicleParams::default();
        p.validate().unwrap();
        let back = VehicleParams::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(back, p);
        assert!((4.0 * p.motor.max_power() - p.passive.engine_power).abs() < 1e-6);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = VehicleParams { max_steer: 2.0, ..Default::default() };
        assert!(p.validate().is_err());
        let mut p = VehicleParams::default();
        p.tire.mu = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn passive_split_is_even_and_biased_under_braking() {
        let p = VehicleParams::default();
        let t = p.passive.wheel_torques(1.0, &[0.0; 4]);
        assert!(t.iter().all(|&v| (v - p.passive.engine_torque / 4.0).abs() < 1e-9));
        let b = p.passive.wheel_torques(-1.0, &[10.0; 4]);
        assert!(b[FL] < b[RL] && b[FL] == b[FR] && b[RL] == b[RR]);
        let total: f64 = b.iter().sum();
        assert!((total + p.passive.brake_torque).abs() < 1e-9);
    }
}
