use ndarray::{Array1, Array2};

use super::gae::gae;
use super::network::Real;
use crate::error::{Error, Result};

/// On-policy storage for one rollout, laid out env-major: entry
/// `env * horizon + t`.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    n_envs: usize,
    horizon: usize,
    obs_dim: usize,
    action_dim: usize,
    observations: Vec<f64>,
    actions: Vec<f64>,
    log_probs: Vec<f64>,
    values: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    filled: Vec<usize>,
    bootstrap: Vec<f64>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
    finalized: bool,
}

/// One transition as handed to the buffer.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub observation: &'a [f64],
    pub action: &'a [f64],
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

/// Training tensors for a set of buffer entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch<F> {
    pub observations: Array2<F>,
    pub actions: Array2<F>,
    pub log_probs: Array1<F>,
    pub advantages: Array1<F>,
    pub returns: Array1<F>,
    pub values: Array1<F>,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, horizon: usize, obs_dim: usize, action_dim: usize) -> Self {
        let cap = n_envs * horizon;
        RolloutBuffer {
            n_envs,
            horizon,
            obs_dim,
            action_dim,
            observations: vec![0.0; cap * obs_dim],
            actions: vec![0.0; cap * action_dim],
            log_probs: vec![0.0; cap],
            values: vec![0.0; cap],
            rewards: vec![0.0; cap],
            dones: vec![false; cap],
            filled: vec![0; n_envs],
            bootstrap: vec![0.0; n_envs],
            advantages: vec![0.0; cap],
            returns: vec![0.0; cap],
            finalized: false,
        }
    }

    pub fn capacity(&self) -> usize {
        self.n_envs * self.horizon
    }

    pub fn n_envs(&self) -> usize {
        self.n_envs
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_full(&self) -> bool {
        self.filled.iter().all(|&f| f == self.horizon)
    }

    pub fn clear(&mut self) {
        self.filled.iter_mut().for_each(|f| *f = 0);
        self.finalized = false;
    }

    pub fn push(&mut self, env: usize, tr: Transition<'_>) -> Result<()> {
        if tr.observation.len() != self.obs_dim {
            return Err(Error::Dimension {
                context: "buffer observation",
                expected: self.obs_dim,
                actual: tr.observation.len(),
            });
        }
        if tr.action.len() != self.action_dim {
            return Err(Error::Dimension {
                context: "buffer action",
                expected: self.action_dim,
                actual: tr.action.len(),
            });
        }
        let t = self.filled[env];
        if t >= self.horizon {
            return Err(Error::param("buffer", format!("env {env} slice is already full")));
        }
        let i = env * self.horizon + t;
        self.observations[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(tr.observation);
        self.actions[i * self.action_dim..(i + 1) * self.action_dim].copy_from_slice(tr.action);
        self.log_probs[i] = tr.log_prob;
        self.values[i] = tr.value;
        self.rewards[i] = tr.reward;
        self.dones[i] = tr.done;
        self.filled[env] = t + 1;
        Ok(())
    }

    /// Adds to the most recent reward of `env` (bootstrapping truncated
    /// episodes).
    pub fn add_to_last_reward(&mut self, env: usize, amount: f64) {
        let t = self.filled[env];
        if t > 0 {
            self.rewards[env * self.horizon + t - 1] += amount;
        }
    }

    /// Computes advantages and returns per env slice; `bootstrap[env]` is
    /// the value of the state following that env's last stored step.
    pub fn finalize(&mut self, bootstrap: &[f64], gamma: f64, lambda: f64) -> Result<()> {
        if !self.is_full() {
            return Err(Error::Empty("rollout buffer is not full"));
        }
        if bootstrap.len() != self.n_envs {
            return Err(Error::Dimension {
                context: "bootstrap values",
                expected: self.n_envs,
                actual: bootstrap.len(),
            });
        }
        for (env, &tail) in bootstrap.iter().enumerate() {
            let r = env * self.horizon..(env + 1) * self.horizon;
            let (adv, ret) =
                gae(&self.rewards[r.clone()], &self.values[r.clone()], &self.dones[r.clone()], tail, gamma, lambda)?;
            self.advantages[r.clone()].copy_from_slice(&adv);
            self.returns[r].copy_from_slice(&ret);
        }
        self.bootstrap.copy_from_slice(bootstrap);
        self.finalized = true;
        Ok(())
    }

    pub fn advantages(&self) -> &[f64] {
        &self.advantages
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Fraction of return variance explained by the stored value estimates.
    pub fn explained_variance(&self) -> f64 {
        let n = self.returns.len() as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
        let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let diff: Vec<f64> = self.returns.iter().zip(&self.values).map(|(r, v)| r - v).collect();
        let var_ret = var(&self.returns, mean(&self.returns));
        if var_ret == 0.0 {
            return f64::NAN;
        }
        1.0 - var(&diff, mean(&diff)) / var_ret
    }

    pub fn minibatch<F: Real>(&self, indices: &[usize]) -> Result<Minibatch<F>> {
        if !self.finalized {
            return Err(Error::Empty("rollout buffer has no advantages"));
        }
        let m = indices.len();
        let obs = Array2::from_shape_fn((m, self.obs_dim), |(r, c)| {
            F::from_f64(self.observations[indices[r] * self.obs_dim + c])
        });
        let actions = Array2::from_shape_fn((m, self.action_dim), |(r, c)| {
            F::from_f64(self.actions[indices[r] * self.action_dim + c])
        });
        let pick = |v: &[f64]| indices.iter().map(|&i| F::from_f64(v[i])).collect::<Array1<F>>();
        Ok(Minibatch {
            observations: obs,
            actions,
            log_probs: pick(&self.log_probs),
            advantages: pick(&self.advantages),
            returns: pick(&self.returns),
            values: pick(&self.values),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_finalize_and_slice() {
        let mut b = RolloutBuffer::new(2, 3, 2, 1);
        for env in 0..2 {
            for t in 0..3 {
                let obs = [env as f64, t as f64];
                b.push(
                    env,
                    Transition {
                        observation: &obs,
                        action: &[0.5],
                        log_prob: -1.0,
                        value: 0.0,
                        reward: 1.0,
                        done: t == 2,
                    },
                )
                .unwrap();
            }
        }
        assert!(b.is_full());
        assert!(b.minibatch::<f64>(&[0]).is_err());
        b.finalize(&[9.0, 9.0], 1.0, 1.0).unwrap();
        // done at the end of each slice: bootstrap ignored, returns 3, 2, 1
        assert_eq!(&b.returns()[..3], &[3.0, 2.0, 1.0]);
        let mb = b.minibatch::<f32>(&[4, 1]).unwrap();
        assert_eq!(mb.observations.row(0).to_vec(), vec![1.0, 1.0]);
        assert_eq!(mb.returns.to_vec(), vec![2.0, 2.0]);
    }

    #[test]
    fn overflow_rejected() {
        let mut b = RolloutBuffer::new(1, 1, 1, 1);
        let tr =
            Transition { observation: &[0.0], action: &[0.0], log_prob: 0.0, value: 0.0, reward: 0.0, done: false };
        b.push(0, tr).unwrap();
        assert!(b.push(0, tr).is_err());
    }
}
