//! Feed-forward Gaussian policy with tanh hidden layers and manual backpropagation.

use rand::Rng;

use crate::error::{CoreError, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Network weights, flattened layer by layer as `W` (row-major, out × in) then `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub sizes: Vec<usize>,
    pub theta: Vec<f64>,
    /// Log standard deviation in units of `action_scale`.
    pub log_std: f64,
    /// Converts the raw network output to kW.
    pub action_scale: f64,
}

/// Gradient with the same layout as [`PolicyParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrad {
    pub theta: Vec<f64>,
    pub log_std: f64,
}

impl PolicyGrad {
    pub fn zeros(params: &PolicyParams) -> Self {
        Self { theta: vec![0.0; params.theta.len()], log_std: 0.0 }
    }

    pub fn scale(&mut self, k: f64) {
        self.theta.iter_mut().for_each(|g| *g *= k);
        self.log_std *= k;
    }
}

/// Post-activation values of every layer, input first.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub layers: Vec<Vec<f64>>,
}

fn n_params(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl PolicyParams {
    /// Network `n_inputs → hidden… → 1` with all weights zero.
    pub fn zeros(n_inputs: usize, hidden: &[usize], action_scale: f64, log_std: f64) -> Self {
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self { theta: vec![0.0; n_params(&sizes)], sizes, log_std, action_scale }
    }

    /// Uniform Glorot initialization; the output layer starts 100× smaller so the initial mean is near zero.
    pub fn init<R: Rng + ?Sized>(n_inputs: usize, hidden: &[usize], action_scale: f64, log_std: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(n_inputs, hidden, action_scale, log_std);
        let n_layers = p.sizes.len() - 1;
        let mut off = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (p.sizes[l], p.sizes[l + 1]);
            let mut limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            if l + 1 == n_layers {
                limit *= 0.01;
            }
            for w in &mut p.theta[off..off + fan_in * fan_out] {
                *w = rng.random_range(-limit..=limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        p
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn std(&self) -> f64 {
        self.log_std.exp() * self.action_scale
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 || self.sizes.iter().any(|&s| s == 0) || *self.sizes.last().unwrap() != 1 {
            return Err(CoreError::InvalidInput(format!("bad layer sizes {:?}", self.sizes)));
        }
        if self.theta.len() != n_params(&self.sizes) {
            return Err(CoreError::InvalidInput(format!(
                "{} parameters for layer sizes {:?}",
                self.theta.len(),
                self.sizes
            )));
        }
        if !self.theta.iter().all(|v| v.is_finite()) || !self.log_std.is_finite() || !self.action_scale.is_finite() {
            return Err(CoreError::InvalidInput("non-finite policy parameter".into()));
        }
        Ok(())
    }

    /// `(out, in, weight offset, bias offset)` for each layer.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let (n_in, n_out) = (w[0], w[1]);
            let item = (n_out, n_in, off, off + n_out * n_in);
            off += n_out * n_in + n_out;
            item
        })
    }

    pub fn clamp_log_std(&mut self) {
        self.log_std = self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX);
    }
}

/// Reusable buffers for forward and backward passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    layers: Vec<Vec<f64>>,
    delta: Vec<f64>,
    prev: Vec<f64>,
}

impl Workspace {
    pub fn new(params: &PolicyParams) -> Self {
        Self { layers: params.sizes.iter().map(|&n| vec![0.0; n]).collect(), delta: Vec::new(), prev: Vec::new() }
    }

    fn fit(&mut self, params: &PolicyParams) {
        if self.layers.len() != params.sizes.len() || self.layers.iter().zip(&params.sizes).any(|(l, &n)| l.len() != n) {
            *self = Self::new(params);
        }
    }
}

/// Mean action in kW, with activations left in `ws`.
pub fn mean_action(params: &PolicyParams, features: &[f64], ws: &mut Workspace) -> Result<f64> {
    if features.len() != params.n_inputs() {
        return Err(CoreError::InvalidInput(format!(
            "{} features for a network with {} inputs",
            features.len(),
            params.n_inputs()
        )));
    }
    ws.fit(params);
    let n_layers = params.sizes.len() - 1;
    ws.layers[0].copy_from_slice(features);
    for (l, (n_out, n_in, w, b)) in params.layers().enumerate() {
        let (head, tail) = ws.layers.split_at_mut(l + 1);
        let x = &head[l];
        for (i, yi) in tail[0].iter_mut().enumerate() {
            let row = &params.theta[w + i * n_in..w + (i + 1) * n_in];
            let z = params.theta[b + i] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
            *yi = if l + 1 < n_layers { z.tanh() } else { z };
        }
        debug_assert_eq!(tail[0].len(), n_out);
    }
    Ok(params.action_scale * ws.layers[n_layers][0])
}

/// Mean action in kW and the cached activations.
pub fn policy_forward(params: &PolicyParams, features: &[f64]) -> Result<(f64, Activations)> {
    let mut ws = Workspace::new(params);
    let mean = mean_action(params, features, &mut ws)?;
    Ok((mean, Activations { layers: ws.layers }))
}

/// Gaussian log-density of `action` (kW) under the policy at `features`.
pub fn log_prob(params: &PolicyParams, features: &[f64], action: f64) -> Result<f64> {
    let (mean, _) = policy_forward(params, features)?;
    Ok(gaussian_log_prob(action, mean, params.std()))
}

pub fn gaussian_log_prob(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - LN_SQRT_2PI
}

/// Log-probability of `action` and its gradient with respect to every parameter.
pub fn logprob_grad(params: &PolicyParams, features: &[f64], action: f64) -> Result<(f64, PolicyGrad)> {
    let mut grad = PolicyGrad::zeros(params);
    let lp = accumulate_logprob_grad(params, features, action, 1.0, &mut grad)?;
    Ok((lp, grad))
}

/// Adds `weight · ∇ log π(action | features)` to `grad` and returns the log-probability.
pub fn accumulate_logprob_grad(
    params: &PolicyParams,
    features: &[f64],
    action: f64,
    weight: f64,
    grad: &mut PolicyGrad,
) -> Result<f64> {
    accumulate_logprob_grad_in(params, features, action, weight, grad, &mut Workspace::new(params))
}

/// [`accumulate_logprob_grad`] reusing the buffers in `ws`.
pub fn accumulate_logprob_grad_in(
    params: &PolicyParams,
    features: &[f64],
    action: f64,
    weight: f64,
    grad: &mut PolicyGrad,
    ws: &mut Workspace,
) -> Result<f64> {
    let mean = mean_action(params, features, ws)?;
    let sigma = params.log_std.exp();
    let z = (action - mean) / (params.action_scale * sigma);
    grad.log_std += weight * (z * z - 1.0);
    // d log π / d(raw output) = z / σ.
    ws.delta.clear();
    ws.delta.push(weight * z / sigma);
    let n_layers = params.sizes.len() - 1;
    let mut off = params.theta.len();
    for l in (0..n_layers).rev() {
        let (n_in, n_out) = (params.sizes[l], params.sizes[l + 1]);
        off -= n_out * n_in + n_out;
        let (w, b) = (off, off + n_out * n_in);
        let x = &ws.layers[l];
        for i in 0..n_out {
            let di = ws.delta[i];
            if di == 0.0 {
                continue;
            }
            grad.theta[b + i] += di;
            for (g, v) in grad.theta[w + i * n_in..w + (i + 1) * n_in].iter_mut().zip(x) {
                *g += di * v;
            }
        }
        if l > 0 {
            ws.prev.clear();
            ws.prev.resize(n_in, 0.0);
            for i in 0..n_out {
                let di = ws.delta[i];
                if di == 0.0 {
                    continue;
                }
                for (p, a) in ws.prev.iter_mut().zip(&params.theta[w + i * n_in..w + (i + 1) * n_in]) {
                    *p += di * a;
                }
            }
            // Inputs to layer l are tanh outputs of layer l-1.
            for (p, h) in ws.prev.iter_mut().zip(x) {
                *p *= 1.0 - h * h;
            }
            std::mem::swap(&mut ws.delta, &mut ws.prev);
        }
    }
    Ok(gaussian_log_prob(action, mean, params.action_scale * sigma))
}

/// Adam state for one flat parameter vector, used for gradient ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// `params += lr · m̂ / (√v̂ + ε)`.
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] += self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_has_zero_mean() {
        let p = PolicyParams::zeros(9, &[8, 8], 200.0, -3.0);
        for x in [[0.3; 9], [-1.0; 9]] {
            assert_eq!(policy_forward(&p, &x).unwrap().0, 0.0);
        }
        assert!(policy_forward(&p, &[0.0; 8]).is_err());
    }

    #[test]
    fn mode_has_zero_mean_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = PolicyParams::init(3, &[5], 10.0, -1.0, &mut rng);
        let x = [0.2, -0.4, 0.9];
        let (mean, _) = policy_forward(&p, &x).unwrap();
        let (lp, g) = logprob_grad(&p, &x, mean).unwrap();
        let sigma = p.std();
        assert!((lp + (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()).abs() < 1e-12);
        assert!(g.theta.iter().all(|v| v.abs() < 1e-12));
        assert!((g.log_std + 1.0).abs() < 1e-12);
    }

    #[test]
    fn adam_with_zero_rate_is_inert() {
        let mut a = Adam::new(2, 0.0);
        let mut x = [1.0, 2.0];
        a.ascend(&mut x, &[5.0, -3.0]);
        assert_eq!(x, [1.0, 2.0]);
        let mut a = Adam::new(1, 0.1);
        let mut y = [0.0];
        a.ascend(&mut y, &[2.0]);
        assert!((y[0] - 0.1).abs() < 1e-6);
    }
}
