use super::{tire, VehicleParams, VehicleState, WheelCommand, GRAVITY};
use crate::error::{Error, Result};

/// Speed scale of the rolling-resistance smoothing, m/s.
const ROLLING_SMOOTHING: f64 = 0.1;

/// Quasi-static normal loads, FL, FR, RL, RR. Longitudinal transfer moves
/// load between axles, lateral transfer moves load across each axle in
/// proportion to its static share. Loads are floored at zero by capping the
/// transfer, so they always sum to `m g`.
pub fn normal_loads(params: &VehicleParams, ax: f64, ay: f64) -> [f64; 4] {
    let m = params.mass;
    let l = params.wheelbase();
    let h = params.cg_height;
    let weight = m * GRAVITY;
    let front = (m * (GRAVITY * params.cg_to_rear - ax * h) / l).clamp(0.0, weight);
    let rear = weight - front;
    let lateral = m * ay * h / params.track_width;
    let df = (lateral * params.cg_to_rear / l).clamp(-front / 2.0, front / 2.0);
    let dr = (lateral * params.cg_to_front / l).clamp(-rear / 2.0, rear / 2.0);
    // positive ay (turning left) loads the right wheels
    [front / 2.0 - df, front / 2.0 + df, rear / 2.0 - dr, rear / 2.0 + dr]
}

/// Contact-patch velocity of a wheel in its own (steered) frame.
fn wheel_velocity(state: &VehicleState, params: &VehicleParams, steer: f64, wheel: usize) -> (f64, f64) {
    let [px, py] = params.wheel_positions()[wheel];
    let vx = state.vx - state.yaw_rate * py;
    let vy = state.vy + state.yaw_rate * px;
    if wheel < 2 {
        let (s, c) = steer.sin_cos();
        (vx * c + vy * s, -vx * s + vy * c)
    } else {
        (vx, vy)
    }
}

fn slips_from_velocity(omega: f64, vwx: f64, vwy: f64, params: &VehicleParams) -> (f64, f64) {
    let floor = params.slip_speed_floor;
    let kappa = (omega * params.wheel_radius - vwx) / vwx.abs().max(floor);
    let alpha = vwy.atan2(vwx.abs() + floor);
    (kappa, alpha)
}

/// Slip ratio and slip angle of one wheel.
pub fn slip_quantities(state: &VehicleState, params: &VehicleParams, steer: f64, wheel: usize) -> (f64, f64) {
    let (vwx, vwy) = wheel_velocity(state, params, steer, wheel);
    slips_from_velocity(state.omega[wheel], vwx, vwy, params)
}

/// Per-wheel quantities evaluated during one physics step (at the state the
/// step started from).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepForces {
    pub fz: [f64; 4],
    /// Tire forces applied to the body, in each wheel's own frame.
    pub fx: [f64; 4],
    pub fy: [f64; 4],
    pub slip_ratio: [f64; 4],
    pub slip_angle: [f64; 4],
    /// Signed torque actually applied to each wheel.
    pub torque: [f64; 4],
}

/// Advances the vehicle by `dt` under `cmd` with nominal grip.
pub fn physics_step(state: &VehicleState, params: &VehicleParams, cmd: &WheelCommand, dt: f64) -> Result<VehicleState> {
    physics_step_detailed(state, params, cmd, dt, 1.0).map(|(s, _)| s)
}

/// One semi-implicit Euler step of the 7-DOF model. `grip` scales the tire
/// friction of all four wheels (verge surfaces).
///
/// Wheel spin uses a linearized backward-Euler update so the slip stiffness
/// near standstill stays stable at millisecond steps. Brake torque acts as
/// Coulomb friction on the wheel: it can stop the wheel but never reverse it.
pub fn physics_step_detailed(
    state: &VehicleState,
    params: &VehicleParams,
    cmd: &WheelCommand,
    dt: f64,
    grip: f64,
) -> Result<(VehicleState, StepForces)> {
    if !state.is_finite() {
        return Err(Error::NonFinite("vehicle state"));
    }
    if !(cmd.steer.is_finite() && cmd.torque.iter().all(|t| t.is_finite())) {
        return Err(Error::NonFinite("wheel command"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let steer = cmd.steer.clamp(-params.max_steer, params.max_steer);
    let fz = normal_loads(params, state.ax, state.ay);
    let positions = params.wheel_positions();
    let (sin_d, cos_d) = steer.sin_cos();
    let r = params.wheel_radius;

    let mut forces = StepForces { fz, torque: cmd.torque, ..Default::default() };
    let mut fx_body = 0.0;
    let mut fy_body = 0.0;
    let mut mz = 0.0;
    let mut omega_next = state.omega;

    for i in 0..4 {
        let (vwx, vwy) = wheel_velocity(state, params, steer, i);
        let (kappa, alpha) = slips_from_velocity(state.omega[i], vwx, vwy, params);
        let (fx_tire, fy) = tire::tire_forces_scaled(&params.tire, kappa, alpha, fz[i], grip);

        // implicit wheel spin: I dw = (T - r Fx(w + dw)) dt, linearized in w
        let slope = tire::long_force_slope(&params.tire, kappa, alpha, fz[i], grip).max(0.0);
        let k = r * slope * r / vwx.abs().max(params.slip_speed_floor);
        let inertia = params.wheel_inertia + dt * k;
        let (drive, brake) = if cmd.torque[i] >= 0.0 { (cmd.torque[i], 0.0) } else { (0.0, -cmd.torque[i]) };
        let free = state.omega[i] + dt * (drive - r * fx_tire) / inertia;
        // the body sees the same step-averaged force the wheel update implies,
        // kept inside the friction ellipse
        let mut fx = (drive - params.wheel_inertia * (free - state.omega[i]) / dt) / r;
        let limit = params.tire.mu * grip * fz[i];
        let fy_sq = fy * fy;
        if fx * fx + fy_sq > limit * limit {
            let room = (limit * limit - fy_sq).max(0.0).sqrt();
            fx = fx.clamp(-room, room);
        }
        let stop = dt * brake / inertia;
        omega_next[i] = if free.abs() <= stop { 0.0 } else { free - free.signum() * stop };

        forces.fx[i] = fx;
        forces.fy[i] = fy;
        forces.slip_ratio[i] = kappa;
        forces.slip_angle[i] = alpha;

        let (bx, by) = if i < 2 { (fx * cos_d - fy * sin_d, fx * sin_d + fy * cos_d) } else { (fx, fy) };
        fx_body += bx;
        fy_body += by;
        mz += positions[i][0] * by - positions[i][1] * bx;
    }

    let speed = state.vx.hypot(state.vy);
    let drag = 0.5 * params.air_density * params.drag_area * speed;
    fx_body -= drag * state.vx;
    fy_body -= drag * state.vy;
    fx_body -= params.rolling_resistance * params.mass * GRAVITY * state.vx
        / (state.vx * state.vx + ROLLING_SMOOTHING * ROLLING_SMOOTHING).sqrt();

    let ax = fx_body / params.mass;
    let ay = fy_body / params.mass;
    let vx = state.vx + dt * (ax + state.yaw_rate * state.vy);
    let vy = state.vy + dt * (ay - state.yaw_rate * state.vx);
    let yaw_rate = state.yaw_rate + dt * mz / params.yaw_inertia;
    let yaw = state.yaw + dt * yaw_rate;
    let (s, c) = yaw.sin_cos();
    let next = VehicleState {
        x: state.x + dt * (vx * c - vy * s),
        y: state.y + dt * (vx * s + vy * c),
        yaw,
        vx,
        vy,
        yaw_rate,
        omega: omega_next,
        ax,
        ay,
    };
    if !next.is_finite() {
        return Err(Error::NonFinite("vehicle state after step"));
    }
    Ok((next, forces))
}
