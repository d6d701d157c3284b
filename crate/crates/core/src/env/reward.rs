use serde::{Deserialize, Serialize};

/// How the action-bound penalty treats in-range actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Zero while `|a_i| <= p_sc (p_bnd - 1)`, quadratic beyond.
    #[default]
    Hinged,
    /// `(|a_i| / p_sc - p_bnd + 1)^2` for every component, including zero actions.
    Literal,
}

/// Centerline progress since the previous step; both arguments are
/// wrap-unwrapped cumulative distances.
#[inline]
pub fn progress_reward(s_now: f64, s_prev: f64) -> f64 {
    s_now - s_prev
}

/// Action-bound penalty summed over the raw (unclamped) action components.
pub fn action_penalty(raw_action: &[f64], p_sc: f64, p_bnd: f64, mode: PenaltyMode) -> f64 {
    raw_action
        .iter()
        .map(|a| {
            let x = a.abs() / p_sc - p_bnd + 1.0;
            match mode {
                PenaltyMode::Hinged => x.max(0.0).powi(2),
                PenaltyMode::Literal => x * x,
            }
        })
        .sum()
}
