use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{clip_grad_norm, Adam};
use super::buffer::{Minibatch, RolloutBuffer};
use super::config::TrainConfig;
use super::gaussian::HALF_LN_2PI;
use super::network::{PolicyNet, Real};
use crate::error::{Error, Result};

/// Coefficients of the clipped surrogate objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub policy_clip: f64,
    pub value_clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
}

impl From<&TrainConfig> for LossCoefficients {
    fn from(c: &TrainConfig) -> Self {
        LossCoefficients {
            policy_clip: c.policy_clip,
            value_clip: c.value_clip,
            value_coef: c.value_coef,
            entropy_coef: c.entropy_coef,
            normalize_advantages: c.normalize_advantages,
        }
    }
}

/// Scalar pieces of the minibatch loss; `total = policy + value_coef * value
/// - entropy_coef * entropy`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Zero-mean, unit-variance copy (population std, `1e-8` guard).
pub fn normalize<F: Real>(a: &Array1<F>) -> Array1<F> {
    let n = F::from_f64(a.len() as f64);
    let mean = a.sum() / n;
    let var = a.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / n;
    let denom = var.sqrt() + F::from_f64(1e-8);
    a.mapv(|x| (x - mean) / denom)
}

/// Clipped PPO loss on a minibatch and its gradient in the flat parameter
/// layout.
pub fn ppo_loss_and_grad<F: Real>(
    net: &PolicyNet<F>,
    mb: &Minibatch<F>,
    coef: &LossCoefficients,
) -> Result<(LossBreakdown, Vec<F>)> {
    let m = mb.observations.nrows();
    if m == 0 {
        return Err(Error::Empty("minibatch"));
    }
    let (out, cache) = net.forward_cached(&mb.observations.view())?;
    let act_dim = net.spec().action_dim;
    if mb.actions.ncols() != act_dim {
        return Err(Error::Dimension { context: "minibatch actions", expected: act_dim, actual: mb.actions.ncols() });
    }
    let log_std: Vec<F> = net.log_std().to_vec();
    let inv_std: Vec<F> = log_std.iter().map(|ls| (-*ls).exp()).collect();
    let ls_sum: F = log_std.iter().copied().sum();
    let half_ln_2pi = F::from_f64(HALF_LN_2PI);

    // standardized residuals z = (a - mean) / std
    let mut z = &mb.actions - &out.means;
    for mut row in z.rows_mut() {
        for (v, s) in row.iter_mut().zip(&inv_std) {
            *v = *v * *s;
        }
    }
    let adv = if coef.normalize_advantages { normalize(&mb.advantages) } else { mb.advantages.clone() };

    let mf = F::from_f64(m as f64);
    let half = F::from_f64(0.5);
    let (one, zero) = (F::one(), F::zero());
    let clip_lo = F::from_f64(1.0 - coef.policy_clip);
    let clip_hi = F::from_f64(1.0 + coef.policy_clip);
    let vclip = F::from_f64(coef.value_clip);

    // per-sample d(loss)/d(log_prob_new)
    let mut d_logp = Array1::<F>::zeros(m);
    let mut d_values = Array1::<F>::zeros(m);
    let (mut policy_loss, mut value_loss, mut kl, mut clipped) = (0.0, 0.0, 0.0, 0usize);
    for j in 0..m {
        let sq: F = z.row(j).iter().map(|&v| v * v).sum();
        let logp = -half * sq - ls_sum - F::from_f64(act_dim as f64) * half_ln_2pi;
        let log_ratio = logp - mb.log_probs[j];
        let ratio = log_ratio.exp();
        let a = adv[j];
        let unclipped = ratio * a;
        let clipped_obj = ratio.max(clip_lo).min(clip_hi) * a;
        if unclipped <= clipped_obj {
            policy_loss -= unclipped.as_f64();
            d_logp[j] = -unclipped / mf;
        } else {
            policy_loss -= clipped_obj.as_f64();
        }
        if (ratio - one).abs() > F::from_f64(coef.policy_clip) {
            clipped += 1;
        }
        kl += ((ratio - one) - log_ratio).as_f64();

        let v = out.values[j];
        let ret = mb.returns[j];
        let delta = v - mb.values[j];
        let v_clipped = mb.values[j] + delta.max(-vclip).min(vclip);
        let e1 = v - ret;
        let e2 = v_clipped - ret;
        if e1 * e1 >= e2 * e2 {
            value_loss += (half * e1 * e1).as_f64();
            d_values[j] = F::from_f64(coef.value_coef) * e1 / mf;
        } else {
            value_loss += (half * e2 * e2).as_f64();
            let inside = delta.abs() < vclip;
            d_values[j] = if inside { F::from_f64(coef.value_coef) * e2 / mf } else { zero };
        }
    }
    let mf64 = m as f64;
    policy_loss /= mf64;
    value_loss /= mf64;
    let entropy: f64 = log_std.iter().map(|ls| ls.as_f64() + 0.5 + HALF_LN_2PI).sum();

    // d logp / d mean_i = z_i / std_i ; d logp / d log_std_i = z_i^2 - 1
    let mut d_means = Array2::<F>::zeros((m, act_dim));
    let mut d_log_std = vec![F::from_f64(-coef.entropy_coef); act_dim];
    for j in 0..m {
        let g = d_logp[j];
        if g == zero {
            continue;
        }
        for i in 0..act_dim {
            let zi = z[[j, i]];
            d_means[[j, i]] = g * zi * inv_std[i];
            d_log_std[i] += g * (zi * zi - one);
        }
    }
    let grad = net.backward(&cache, &d_means.view(), &d_values.view(), &d_log_std);
    let total = policy_loss + coef.value_coef * value_loss - coef.entropy_coef * entropy;
    let breakdown = LossBreakdown {
        total,
        policy: policy_loss,
        value: value_loss,
        entropy,
        approx_kl: kl / mf64,
        clip_fraction: clipped as f64 / mf64,
    };
    if !breakdown.total.is_finite() || !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::Diverged(format!("non-finite loss or gradient: {breakdown:?}")));
    }
    Ok((breakdown, grad))
}

/// Averages over all minibatches of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub loss: LossBreakdown,
    pub grad_norm: f64,
    pub explained_variance: f64,
    pub learning_rate: f64,
    pub minibatches: usize,
}

/// Runs `epochs_per_update` passes of shuffled minibatches over a finalized
/// buffer.
pub fn ppo_update<F: Real, R: Rng>(
    net: &mut PolicyNet<F>,
    adam: &mut Adam<F>,
    buffer: &RolloutBuffer,
    config: &TrainConfig,
    learning_rate: f64,
    rng: &mut R,
) -> Result<UpdateStats> {
    let n = buffer.capacity();
    if n == 0 {
        return Err(Error::Empty("rollout buffer"));
    }
    let coef = LossCoefficients::from(config);
    let batch = config.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut sum = LossBreakdown::default();
    let mut grad_norm = 0.0;
    let mut count = 0usize;
    for _ in 0..config.epochs_per_update {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            let mb = buffer.minibatch::<F>(chunk)?;
            let (loss, mut grad) = ppo_loss_and_grad(net, &mb, &coef)?;
            grad_norm += clip_grad_norm(&mut grad, config.max_grad_norm);
            adam.step(net.params_mut(), &grad, learning_rate);
            sum.total += loss.total;
            sum.policy += loss.policy;
            sum.value += loss.value;
            sum.entropy += loss.entropy;
            sum.approx_kl += loss.approx_kl;
            sum.clip_fraction += loss.clip_fraction;
            count += 1;
        }
    }
    if !net.is_finite() {
        return Err(Error::Diverged("parameters became non-finite".into()));
    }
    let c = count as f64;
    Ok(UpdateStats {
        loss: LossBreakdown {
            total: sum.total / c,
            policy: sum.policy / c,
            value: sum.value / c,
            entropy: sum.entropy / c,
            approx_kl: sum.approx_kl / c,
            clip_fraction: sum.clip_fraction / c,
        },
        grad_norm: grad_norm / c,
        explained_variance: buffer.explained_variance(),
        learning_rate,
        minibatches: count,
    })
}
