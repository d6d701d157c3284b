use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

use ndarray::linalg::general_mat_mul;
use ndarray::{
    Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, LinalgScalar, ScalarOperand,
};
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::OBS_DIM;
use crate::error::{Error, Result};

/// Floating-point type the network can run in. Training uses `f32`;
/// gradient checks use `f64`.
pub trait Real:
    Float + LinalgScalar + ScalarOperand + AddAssign + Sum + Debug + Default + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Architecture of the shared-trunk actor-critic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub input_dim: usize,
    /// Hidden layers shared by the policy and value paths.
    pub shared: Vec<usize>,
    /// Extra hidden layers on the value path only.
    pub value_extra: Vec<usize>,
    pub action_dim: usize,
}

impl PolicySpec {
    pub fn new(action_dim: usize) -> Self {
        PolicySpec { input_dim: OBS_DIM, shared: vec![300, 600, 600], value_extra: vec![600], action_dim }
    }

    pub fn with_hidden(action_dim: usize, shared: Vec<usize>, value_extra: Vec<usize>) -> Self {
        PolicySpec { input_dim: OBS_DIM, shared, value_extra, action_dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.action_dim == 0 {
            return Err(Error::param("policy", "input and action dimensions must be positive"));
        }
        if self.shared.iter().chain(&self.value_extra).any(|&n| n == 0) {
            return Err(Error::param("policy", "hidden layers must have at least one unit"));
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        let mut offset = 0;
        let mut dense = |fan_in: usize, fan_out: usize| {
            let d = Dense { weight: offset, bias: offset + fan_in * fan_out, fan_in, fan_out };
            offset += (fan_in + 1) * fan_out;
            d
        };
        let mut width = self.input_dim;
        let mut shared = Vec::new();
        for &n in &self.shared {
            shared.push(dense(width, n));
            width = n;
        }
        let trunk = width;
        let policy_head = dense(trunk, self.action_dim);
        let mut value_extra = Vec::new();
        for &n in &self.value_extra {
            value_extra.push(dense(width, n));
            width = n;
        }
        let value_head = dense(width, 1);
        let log_std = offset;
        Layout { shared, policy_head, value_extra, value_head, log_std, len: log_std + self.action_dim }
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

/// A fully connected layer stored inside the flat parameter vector:
/// weights row-major `(fan_in, fan_out)`, then `fan_out` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dense {
    weight: usize,
    bias: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    shared: Vec<Dense>,
    policy_head: Dense,
    value_extra: Vec<Dense>,
    value_head: Dense,
    log_std: usize,
    len: usize,
}

impl Dense {
    fn weight_view<'a, F: Real>(&self, p: &'a [F]) -> ArrayView2<'a, F> {
        ArrayView2::from_shape((self.fan_in, self.fan_out), &p[self.weight..self.bias]).expect("layout")
    }

    fn bias_view<'a, F: Real>(&self, p: &'a [F]) -> ArrayView1<'a, F> {
        ArrayView1::from(&p[self.bias..self.bias + self.fan_out])
    }

    fn apply<F: Real>(&self, p: &[F], x: &ArrayView2<F>) -> Array2<F> {
        let mut y = x.dot(&self.weight_view(p));
        y += &self.bias_view(p);
        y
    }

    /// Accumulates parameter gradients for upstream gradient `dy` and
    /// returns the input gradient.
    fn backward<F: Real>(&self, p: &[F], grad: &mut [F], x: &ArrayView2<F>, dy: &ArrayView2<F>) -> Array2<F> {
        {
            let (w_grad, b_grad) = grad[self.weight..self.bias + self.fan_out].split_at_mut(self.fan_in * self.fan_out);
            let mut gw = ArrayViewMut2::from_shape((self.fan_in, self.fan_out), w_grad).expect("layout");
            general_mat_mul(F::one(), &x.t(), dy, F::one(), &mut gw);
            let mut gb = ArrayViewMut1::from(b_grad);
            gb += &dy.sum_axis(Axis(0));
        }
        dy.dot(&self.weight_view(p).t())
    }
}

fn relu_inplace<F: Real>(a: &mut Array2<F>) {
    a.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
}

/// Zeroes `grad` where the post-activation output was not positive.
fn relu_mask<F: Real>(grad: &mut Array2<F>, out: &Array2<F>) {
    ndarray::Zip::from(grad).and(out).for_each(|g, &o| {
        if o <= F::zero() {
            *g = F::zero();
        }
    });
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    /// Inputs to each shared layer followed by the trunk output.
    shared: Vec<Array2<F>>,
    value_hidden: Vec<Array2<F>>,
}

/// Network outputs for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput<F> {
    /// `(batch, action_dim)` action means.
    pub means: Array2<F>,
    /// `(batch,)` state values.
    pub values: Array1<F>,
}

/// Actor-critic MLP with every parameter in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet<F: Real> {
    spec: PolicySpec,
    layout: Layout,
    params: Vec<F>,
}

impl<F: Real> PolicyNet<F> {
    /// All parameters zero.
    pub fn zeros(spec: PolicySpec) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        let params = vec![F::zero(); layout.len];
        Ok(PolicyNet { spec, layout, params })
    }

    /// Scaled random initialization: hidden layers with gain sqrt(2), the
    /// policy head with 0.01, the value head with 1.0; biases and log_std 0.
    ///
    /// Each weight matrix is made orthogonal (rows or columns, whichever is
    /// smaller) by Gram-Schmidt on Gaussian draws.
    pub fn init<R: Rng>(spec: PolicySpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        let hidden_gain = 2f64.sqrt();
        let layers: Vec<(Dense, f64)> = net
            .layout
            .shared
            .iter()
            .map(|d| (*d, hidden_gain))
            .chain(std::iter::once((net.layout.policy_head, 0.01)))
            .chain(net.layout.value_extra.iter().map(|d| (*d, hidden_gain)))
            .chain(std::iter::once((net.layout.value_head, 1.0)))
            .collect();
        for (d, gain) in layers {
            let w = orthogonal(d.fan_in, d.fan_out, gain, rng);
            for (dst, src) in net.params[d.weight..d.bias].iter_mut().zip(w.iter()) {
                *dst = F::from_f64(*src);
            }
        }
        Ok(net)
    }

    pub fn from_params(spec: PolicySpec, params: Vec<F>) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        if params.len() != layout.len {
            return Err(Error::Dimension { context: "policy parameters", expected: layout.len, actual: params.len() });
        }
        Ok(PolicyNet { spec, layout, params })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn log_std(&self) -> &[F] {
        &self.params[self.layout.log_std..]
    }

    /// Index of the first log_std entry in the flat parameter vector.
    pub fn log_std_offset(&self) -> usize {
        self.layout.log_std
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, obs: &ArrayView2<F>) -> Result<()> {
        if obs.ncols() != self.spec.input_dim {
            return Err(Error::Dimension {
                context: "observation",
                expected: self.spec.input_dim,
                actual: obs.ncols(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, obs: &ArrayView2<F>) -> Result<PolicyOutput<F>> {
        self.forward_cached(obs).map(|(out, _)| out)
    }

    /// Forward pass over only the policy path (no value computation).
    pub fn forward_means(&self, obs: &ArrayView2<F>) -> Result<Array2<F>> {
        self.check_input(obs)?;
        let p = &self.params;
        let mut h = obs.to_owned();
        for d in &self.layout.shared {
            h = d.apply(p, &h.view());
            relu_inplace(&mut h);
        }
        Ok(self.layout.policy_head.apply(p, &h.view()))
    }

    pub fn forward_cached(&self, obs: &ArrayView2<F>) -> Result<(PolicyOutput<F>, ForwardCache<F>)> {
        self.check_input(obs)?;
        let p = &self.params;
        let mut shared = Vec::with_capacity(self.layout.shared.len());
        let mut h = obs.to_owned();
        for d in &self.layout.shared {
            let mut next = d.apply(p, &h.view());
            relu_inplace(&mut next);
            shared.push(std::mem::replace(&mut h, next));
        }
        let trunk = h;
        let means = self.layout.policy_head.apply(p, &trunk.view());
        let mut value_hidden = Vec::with_capacity(self.layout.value_extra.len());
        let mut g = trunk.clone();
        for d in &self.layout.value_extra {
            let mut next = d.apply(p, &g.view());
            relu_inplace(&mut next);
            value_hidden.push(std::mem::replace(&mut g, next));
        }
        let values = self.layout.value_head.apply(p, &g.view()).column(0).to_owned();
        shared.push(trunk);
        value_hidden.push(g);
        let cache = ForwardCache { shared, value_hidden };
        Ok((PolicyOutput { means, values }, cache))
    }

    /// Gradient of a scalar loss given its partials with respect to the
    /// means `(batch, action_dim)`, values `(batch,)` and log_std
    /// `(action_dim,)`. Returns a vector in the flat parameter layout.
    pub fn backward(
        &self,
        cache: &ForwardCache<F>,
        d_means: &ArrayView2<F>,
        d_values: &ArrayView1<F>,
        d_log_std: &[F],
    ) -> Vec<F> {
        let p = &self.params;
        let l = &self.layout;
        let mut grad = vec![F::zero(); l.len];
        let trunk = cache.shared.last().expect("trunk");
        let mut d_trunk = l.policy_head.backward(p, &mut grad, &trunk.view(), d_means);

        let d_v = d_values.view().insert_axis(Axis(1));
        let value_in = cache.value_hidden.last().expect("value path");
        let mut d_g = l.value_head.backward(p, &mut grad, &value_in.view(), &d_v);
        for (k, d) in l.value_extra.iter().enumerate().rev() {
            relu_mask(&mut d_g, &cache.value_hidden[k + 1]);
            d_g = d.backward(p, &mut grad, &cache.value_hidden[k].view(), &d_g.view());
        }
        d_trunk += &d_g;

        let mut d_h = d_trunk;
        for (k, d) in l.shared.iter().enumerate().rev() {
            relu_mask(&mut d_h, &cache.shared[k + 1]);
            d_h = d.backward(p, &mut grad, &cache.shared[k].view(), &d_h.view());
        }
        for (g, d) in grad[l.log_std..].iter_mut().zip(d_log_std) {
            *g = *d;
        }
        grad
    }

    /// Converts every parameter to another precision.
    pub fn cast<G: Real>(&self) -> PolicyNet<G> {
        PolicyNet {
            spec: self.spec.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| G::from_f64(p.as_f64())).collect(),
        }
    }
}

/// `(rows, cols)` matrix with orthonormal rows or columns scaled by `gain`.
fn orthogonal<R: Rng>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Array2<f64> {
    let (n, m) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    // m orthonormal vectors of length n
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    while basis.len() < m {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        let (k, e) = if rows >= cols { (j, i) } else { (i, j) };
        gain * basis[k][e]
    })
}
