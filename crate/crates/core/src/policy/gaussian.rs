//! Diagonal Gaussian action distribution with a state-independent log std.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

/// `0.5 * ln(2 pi)`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of `action` under `N(means, exp(log_std)^2)`, summed over
/// dimensions.
pub fn log_prob(action: &[f64], means: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(means)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Differential entropy of the diagonal Gaussian.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 + HALF_LN_2PI).sum()
}

/// Draws an action (or returns the means when `deterministic`) together with
/// its log-probability.
pub fn sample_action<R: Rng>(means: &[f64], log_std: &[f64], rng: &mut R, deterministic: bool) -> (Vec<f64>, f64) {
    let action: Vec<f64> = if deterministic {
        means.to_vec()
    } else {
        means
            .iter()
            .zip(log_std)
            .map(|(m, ls)| {
                let eps: f64 = rng.sample(StandardNormal);
                m + ls.exp() * eps
            })
            .collect()
    };
    let lp = log_prob(&action, means, log_std);
    (action, lp)
}

/// Density of a single normal variate; the oracle used in tests.
pub fn normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * std * std)).exp() / (std * (2.0 * PI).sqrt())
}
