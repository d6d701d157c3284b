//! Combined-slip tire model.
//!
//! Each axis follows a simplified magic-formula shape `mu Fz sin(C atan(B x))`.
//! The two axes are combined through the normalized slip vector
//! `(Bx * kappa, By * alpha)`: its length sets the force magnitude and its
//! direction splits the force between axes, so the resultant always lies
//! inside the friction circle `mu * Fz`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TireParams {
    /// Peak friction coefficient.
    pub mu: f64,
    /// Longitudinal stiffness factor `Bx` (per unit slip ratio).
    pub long_stiffness: f64,
    /// Cornering stiffness factor `By` (per radian of slip angle).
    pub cornering_stiffness: f64,
    /// Shape factor `C`; with `C > 1` the force peaks and falls off beyond the
    /// saturation slip.
    pub shape: f64,
}

impl Default for TireParams {
    fn default() -> Self {
        TireParams { mu: 1.5, long_stiffness: 12.0, cornering_stiffness: 10.0, shape: 1.6 }
    }
}

impl TireParams {
    /// Slip ratio at which the pure longitudinal force peaks.
    pub fn saturation_slip_ratio(&self) -> f64 {
        (std::f64::consts::FRAC_PI_2 / self.shape).tan() / self.long_stiffness
    }

    /// Slip angle (rad) at which the pure lateral force peaks.
    pub fn saturation_slip_angle(&self) -> f64 {
        (std::f64::consts::FRAC_PI_2 / self.shape).tan() / self.cornering_stiffness
    }
}

/// `sin(C atan s) / s`, continuous at zero.
#[inline]
fn shape_ratio(c: f64, s: f64) -> f64 {
    if s < 1e-9 {
        c
    } else {
        (c * s.atan()).sin() / s
    }
}

/// Derivative of [`shape_ratio`] with respect to `s`.
#[inline]
fn shape_ratio_derivative(c: f64, s: f64) -> f64 {
    if s < 1e-4 {
        // g(s) = C - (C/3 + C^3/6) s^2 + O(s^4)
        return -2.0 * (c / 3.0 + c * c * c / 6.0) * s;
    }
    let a = c * s.atan();
    (c * a.cos() / (1.0 + s * s) * s - a.sin()) / (s * s)
}

/// Tire forces in the wheel frame. `Fx` follows the sign of the slip ratio;
/// `Fy` opposes the slip angle. `mu_scale` multiplies the peak friction.
pub fn tire_forces(tire: &TireParams, slip_ratio: f64, slip_angle: f64, fz: f64) -> (f64, f64) {
    tire_forces_scaled(tire, slip_ratio, slip_angle, fz, 1.0)
}

pub fn tire_forces_scaled(tire: &TireParams, slip_ratio: f64, slip_angle: f64, fz: f64, mu_scale: f64) -> (f64, f64) {
    let fz = fz.max(0.0);
    let sx = tire.long_stiffness * slip_ratio;
    let sy = tire.cornering_stiffness * slip_angle;
    let s = sx.hypot(sy);
    let peak = tire.mu * mu_scale * fz;
    let g = shape_ratio(tire.shape, s);
    (peak * g * sx, -peak * g * sy)
}

/// `dFx / d(slip_ratio)` at fixed slip angle, used by the implicit wheel update.
pub fn long_force_slope(tire: &TireParams, slip_ratio: f64, slip_angle: f64, fz: f64, mu_scale: f64) -> f64 {
    let fz = fz.max(0.0);
    let bx = tire.long_stiffness;
    let sx = bx * slip_ratio;
    let sy = tire.cornering_stiffness * slip_angle;
    let s = sx.hypot(sy);
    let peak = tire.mu * mu_scale * fz;
    let g = shape_ratio(tire.shape, s);
    if s < 1e-12 {
        return peak * bx * g;
    }
    let dg = shape_ratio_derivative(tire.shape, s);
    peak * bx * (g + dg * sx * sx / s)
}
