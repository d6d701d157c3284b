use crate::error::{Error, Result};

/// Generalized advantage estimates for one environment's trajectory slice.
///
/// `dones[t]` marks that the episode ended after step `t`, so the value of
/// the following state is not bootstrapped. `bootstrap` is the value of the
/// state after the final step. Returns `(advantages, returns)`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    for (name, len) in [("values", values.len()), ("dones", dones.len())] {
        if len != n {
            return Err(Error::Dimension { context: name, expected: n, actual: len });
        }
    }
    let mut advantages = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        advantages[t] = next_adv;
        next_value = values[t];
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}
