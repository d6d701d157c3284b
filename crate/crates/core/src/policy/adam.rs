use serde::{Deserialize, Serialize};

use super::network::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-5 }
    }
}

/// Adaptive-moment optimizer state over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub config: AdamConfig,
    pub first: Vec<F>,
    pub second: Vec<F>,
    pub steps: u64,
}

impl<F: Real> Adam<F> {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Adam { config, first: vec![F::zero(); len], second: vec![F::zero(); len], steps: 0 }
    }

    pub fn step(&mut self, params: &mut [F], grad: &[F], lr: f64) {
        self.steps += 1;
        let c = self.config;
        let t = self.steps as i32;
        let corr1 = 1.0 - c.beta1.powi(t);
        let corr2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (F::from_f64(c.beta1), F::from_f64(c.beta2));
        let (one, eps) = (F::one(), F::from_f64(c.eps));
        let step_size = F::from_f64(lr / corr1);
        let corr2_sqrt = F::from_f64(corr2.sqrt());
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.first).zip(&mut self.second) {
            *m = b1 * *m + (one - b1) * *g;
            *v = b2 * *v + (one - b2) * *g * *g;
            *p = *p - step_size * *m / ((*v).sqrt() / corr2_sqrt + eps);
        }
    }
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm<F: Real>(grad: &mut [F], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g.as_f64().powi(2)).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = F::from_f64(max_norm / (norm + 1e-6));
        grad.iter_mut().for_each(|g| *g = *g * scale);
    }
    norm
}

/// Learning rate linear in training progress between `start` (progress 0)
/// and `end` (progress 1); progress is clamped to `[0, 1]`.
pub fn lr_schedule(progress: f64, start: f64, end: f64) -> f64 {
    let p = progress.clamp(0.0, 1.0);
    start * (1.0 - p) + end * p
}
