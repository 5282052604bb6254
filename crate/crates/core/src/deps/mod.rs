//! Joint design-and-policy search by score-function gradients.

pub mod bandit;
pub mod checkpoint;
pub mod design;
pub mod policy;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use design::{sample_design, DesignDistribution, DesignGrad, DesignSample};
pub use policy::{logprob_grad, policy_forward, Activations, Adam, PolicyGrad, PolicyParams};

use crate::env::{Environment, InitDayMode, InitSocMode, MdpState};
use crate::error::{CoreError, Result};
use crate::params::{DesignPoint, SystemParameters};

pub const N_FEATURES: usize = 9;

/// Fixed-length observation vector fed to the policy.
pub fn encode_state(state: &MdpState, design: DesignPoint, params: &SystemParameters, load_scale: f64) -> [f64; N_FEATURES] {
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let hour = 2.0 * PI * state.h as f64 / 24.0;
    let day = 2.0 * PI * state.d as f64 / 365.0;
    [
        hour.sin(),
        hour.cos(),
        day.sin(),
        day.cos(),
        ratio(state.soc, design.b),
        ratio(state.p_prod_bar, params.p_nom_max),
        ratio(state.p_load_bar, load_scale),
        ratio(design.p_nom, params.p_nom_max),
        ratio(design.b, params.b_max),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeMode {
    /// Random initial SOC.
    Train,
    /// SOC starts at half capacity.
    Evaluate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub rewards: Vec<f64>,
    pub income: f64,
    pub initial_soc: f64,
    pub final_soc: f64,
    /// Cost of restoring the initial SOC after the last step.
    pub correction_cost: f64,
}

impl EpisodeOutcome {
    pub fn ret(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Episodic environment that a Gaussian policy can be trained on.
pub trait TrainingEnv {
    fn n_features(&self) -> usize;
    /// kW represented by a raw network output of 1.
    fn action_scale(&self) -> f64;
    /// Runs one episode, calling `act` with the features of every step.
    fn run_episode(
        &self,
        design: DesignPoint,
        mode: EpisodeMode,
        rng: &mut ChaCha8Rng,
        act: &mut dyn FnMut(&[f64]) -> f64,
    ) -> Result<EpisodeOutcome>;
}

/// The dispatch MDP exposed to the trainer.
#[derive(Debug, Clone, Copy)]
pub struct MdpTrainingEnv<'a> {
    pub env: Environment<'a>,
    pub load_scale: f64,
    pub day_mode: InitDayMode,
}

impl<'a> MdpTrainingEnv<'a> {
    pub fn new(env: Environment<'a>) -> Self {
        let load_scale = env.dataset.load.max().max(1e-9);
        Self { env, load_scale, day_mode: InitDayMode::Uniform }
    }
}

impl TrainingEnv for MdpTrainingEnv<'_> {
    fn n_features(&self) -> usize {
        N_FEATURES
    }

    fn action_scale(&self) -> f64 {
        self.env.params.b_max / self.env.params.dt
    }

    fn run_episode(
        &self,
        design: DesignPoint,
        mode: EpisodeMode,
        rng: &mut ChaCha8Rng,
        act: &mut dyn FnMut(&[f64]) -> f64,
    ) -> Result<EpisodeOutcome> {
        let env = &self.env;
        let p = env.params;
        let soc_mode = match mode {
            EpisodeMode::Train => InitSocMode::UniformRandom,
            EpisodeMode::Evaluate => InitSocMode::HalfCapacity,
        };
        let mut state = env.reset(soc_mode, self.day_mode, design, rng)?;
        let initial_soc = state.soc;
        let fixed = env.fixed_per_step(design);
        let mut rewards = Vec::with_capacity(env.t_horizon);
        let (mut imp, mut exp) = (0.0, 0.0);
        for _ in 0..env.t_horizon {
            let x = encode_state(&state, design, p, self.load_scale);
            let out = env.step_with_fixed(&state, act(&x), design, fixed)?;
            rewards.push(out.reward);
            imp += out.p_imp;
            exp += out.p_exp;
            state = out.next_state;
        }
        Ok(EpisodeOutcome {
            rewards,
            income: (-imp * p.c_imp + exp * p.c_exp) * p.dt,
            initial_soc,
            final_soc: state.soc,
            correction_cost: crate::env::cyclic_correction_cost(state.soc, initial_soc, p),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Episodes per iteration.
    pub batch: usize,
    pub policy_lr: f64,
    pub design_lr: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Initial policy log-std, in units of the action scale.
    pub init_log_std: f64,
    /// Initial pre-squash log-std of the design distribution.
    pub design_init_log_std: f64,
    /// Subtract the per-step batch-mean reward-to-go.
    pub baseline: bool,
    /// Smoothing factor of the reported reward curve.
    pub ema_alpha: f64,
    /// Evaluate the mean policy every this many iterations (0 disables).
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Abort when the mean return falls below this multiple of the zero-action return.
    pub divergence_factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            batch: 64,
            policy_lr: 3e-4,
            design_lr: 1e-3,
            seed: 0,
            hidden: vec![64, 64],
            init_log_std: 0.01f64.ln(),
            design_init_log_std: -0.5,
            baseline: true,
            ema_alpha: 0.01,
            eval_every: 0,
            eval_episodes: 16,
            divergence_factor: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::InvalidInput(m.to_string()));
        if self.batch == 0 || (self.baseline && self.batch < 2) {
            return bad("batch must hold at least two episodes when a baseline is used");
        }
        if !(self.policy_lr >= 0.0 && self.design_lr >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha <= 1.0) {
            return bad("EMA factor must lie in (0, 1]");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        if self.eval_every > 0 && self.eval_episodes == 0 {
            return bad("evaluation needs at least one episode");
        }
        Ok(())
    }
}

/// Whether the design is given or learned alongside the policy.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignMode {
    Fixed(DesignPoint),
    Learn(DesignDistribution),
}

impl DesignMode {
    /// Design used for evaluation: the fixed design or the squashed distribution mean.
    pub fn point(&self) -> DesignPoint {
        match self {
            DesignMode::Fixed(d) => *d,
            DesignMode::Learn(dist) => dist.mean_design(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    pub mean_return: Vec<f64>,
    pub mean_income: Vec<f64>,
    /// Mean sampled PV power per iteration.
    pub pv_kwp: Vec<f64>,
    /// Mean sampled battery capacity per iteration.
    pub battery_kwh: Vec<f64>,
    pub smoothed_return: Vec<f64>,
    /// `(iteration, mean evaluation reward)` at the evaluation cadence.
    pub evaluations: Vec<(usize, f64)>,
}

impl TrainStats {
    pub fn len(&self) -> usize {
        self.mean_return.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_return.is_empty()
    }
}

/// Exponential moving average seeded with the first value.
pub fn ema(values: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut s = 0.0;
    for (i, &v) in values.iter().enumerate() {
        s = if i == 0 { v } else { (1.0 - alpha) * s + alpha * v };
        out.push(s);
    }
    out
}

/// Independent stream for episode `index` of a run seeded with `seed`.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSample {
    /// Row-major `steps × n_features`.
    pub features: Vec<f64>,
    pub actions: Vec<f64>,
    pub outcome: EpisodeOutcome,
    pub design: DesignPoint,
    pub design_grad: Option<DesignGrad>,
}

/// Samples one batch of episodes for `iteration`.
pub fn collect_batch<E: TrainingEnv + ?Sized>(
    env: &E,
    policy: &PolicyParams,
    design: &DesignMode,
    config: &TrainConfig,
    iteration: usize,
) -> Result<Vec<EpisodeSample>> {
    let n = env.n_features();
    let std = policy.std();
    let mut batch = Vec::with_capacity(config.batch);
    let mut ws = policy::Workspace::new(policy);
    for ep in 0..config.batch {
        let index = (iteration * config.batch + ep) as u64;
        let mut env_rng = episode_rng(config.seed, 2 * index);
        let mut noise_rng = episode_rng(config.seed, 2 * index + 1);
        let (point, design_grad) = match design {
            DesignMode::Fixed(d) => (*d, None),
            DesignMode::Learn(dist) => {
                let s = sample_design(dist, &mut env_rng);
                (s.design, Some(s.grad))
            }
        };
        let mut features = Vec::new();
        let mut actions = Vec::new();
        let mut failure = None;
        let mut act = |x: &[f64]| -> f64 {
            let mean = match policy::mean_action(policy, x, &mut ws) {
                Ok(m) => m,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            let eps: f64 = noise_rng.sample(StandardNormal);
            let a = mean + std * eps;
            features.extend_from_slice(&x[..n]);
            actions.push(a);
            a
        };
        let outcome = env.run_episode(point, EpisodeMode::Train, &mut env_rng, &mut act)?;
        if let Some(e) = failure {
            return Err(e);
        }
        batch.push(EpisodeSample { features, actions, outcome, design: point, design_grad });
    }
    Ok(batch)
}

/// REINFORCE estimate `mean_e Σ_t (G_{e,t} − b_t) ∇ log π(a_{e,t} | s_{e,t})` with
/// reward-to-go `G_{e,t}` and `b_t` its batch mean at step `t` (zero without a baseline).
pub fn policy_gradient(policy: &PolicyParams, batch: &[EpisodeSample], baseline: bool) -> Result<PolicyGrad> {
    let mut grad = PolicyGrad::zeros(policy);
    if batch.is_empty() {
        return Ok(grad);
    }
    let to_go: Vec<Vec<f64>> = batch
        .iter()
        .map(|e| {
            let mut acc = 0.0;
            let mut g: Vec<f64> = e.outcome.rewards.iter().rev().map(|r| {
                acc += r;
                acc
            }).collect();
            g.reverse();
            g
        })
        .collect();
    let steps = to_go.iter().map(Vec::len).max().unwrap_or(0);
    let mut b = vec![0.0; steps];
    if baseline {
        let mut counts = vec![0usize; steps];
        for g in &to_go {
            for (t, v) in g.iter().enumerate() {
                b[t] += v;
                counts[t] += 1;
            }
        }
        for (bt, c) in b.iter_mut().zip(counts) {
            *bt /= c as f64;
        }
    }
    let n = policy.n_inputs();
    let mut ws = policy::Workspace::new(policy);
    for (e, g) in batch.iter().zip(&to_go) {
        for t in 0..g.len() {
            let adv = g[t] - b[t];
            if adv != 0.0 {
                let x = &e.features[t * n..(t + 1) * n];
                policy::accumulate_logprob_grad_in(policy, x, e.actions[t], adv, &mut grad, &mut ws)?;
            }
        }
    }
    grad.scale(1.0 / batch.len() as f64);
    Ok(grad)
}

/// `mean_e (G_e − Ḡ) ∇ log p(design_e)`.
pub fn design_gradient(batch: &[EpisodeSample], baseline: bool) -> DesignGrad {
    let mut g = DesignGrad { mean: [0.0; 2], log_std: [0.0; 2] };
    if batch.is_empty() {
        return g;
    }
    let returns: Vec<f64> = batch.iter().map(|e| e.outcome.ret()).collect();
    let mean = if baseline { returns.iter().sum::<f64>() / returns.len() as f64 } else { 0.0 };
    for (e, r) in batch.iter().zip(&returns) {
        if let Some(dg) = &e.design_grad {
            for i in 0..2 {
                g.mean[i] += (r - mean) * dg.mean[i];
                g.log_std[i] += (r - mean) * dg.log_std[i];
            }
        }
    }
    let k = 1.0 / batch.len() as f64;
    for i in 0..2 {
        g.mean[i] *= k;
        g.log_std[i] *= k;
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: PolicyParams,
    pub design: DesignMode,
    pub stats: TrainStats,
}

impl TrainOutcome {
    /// Design of the final iteration.
    pub fn final_design(&self) -> DesignPoint {
        self.design.point()
    }
}

/// Fresh policy for `env` initialized from the config seed.
pub fn initial_policy<E: TrainingEnv + ?Sized>(env: &E, config: &TrainConfig) -> PolicyParams {
    let mut rng = episode_rng(config.seed, u64::MAX);
    PolicyParams::init(env.n_features(), &config.hidden, env.action_scale(), config.init_log_std, &mut rng)
}

/// Mean return of the zero-action policy, the reference of the divergence guard.
fn zero_policy_return<E: TrainingEnv + ?Sized>(env: &E, design: DesignPoint, config: &TrainConfig) -> Result<f64> {
    let mut total = 0.0;
    for ep in 0..config.batch {
        let mut rng = episode_rng(config.seed, u64::MAX - 1 - ep as u64);
        total += env.run_episode(design, EpisodeMode::Train, &mut rng, &mut |_| 0.0)?.ret();
    }
    Ok(total / config.batch as f64)
}

pub fn train<E: TrainingEnv + ?Sized>(
    env: &E,
    policy: PolicyParams,
    design: DesignMode,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    policy.validate()?;
    if policy.n_inputs() != env.n_features() {
        return Err(CoreError::InvalidInput("policy input size does not match the environment".into()));
    }
    let mut policy = policy;
    let mut design = design;
    let zero = zero_policy_return(env, design.point(), config)?;
    let guard = zero - (config.divergence_factor - 1.0) * zero.abs();
    let mut policy_opt = Adam::new(policy.theta.len() + 1, config.policy_lr);
    let mut design_opt = Adam::new(4, config.design_lr);
    let mut stats = TrainStats::default();
    let mut flat = Vec::with_capacity(policy.theta.len() + 1);
    for it in 0..config.iterations {
        let batch = collect_batch(env, &policy, &design, config, it)?;
        let k = 1.0 / batch.len() as f64;
        let mean_return = batch.iter().map(|e| e.outcome.ret()).sum::<f64>() * k;
        stats.mean_return.push(mean_return);
        stats.mean_income.push(batch.iter().map(|e| e.outcome.income).sum::<f64>() * k);
        stats.pv_kwp.push(batch.iter().map(|e| e.design.p_nom).sum::<f64>() * k);
        stats.battery_kwh.push(batch.iter().map(|e| e.design.b).sum::<f64>() * k);
        if !mean_return.is_finite() || mean_return < guard {
            return Err(CoreError::Diverged { iteration: it, mean_return, guard });
        }

        let g = policy_gradient(&policy, &batch, config.baseline)?;
        flat.clear();
        flat.extend_from_slice(&policy.theta);
        flat.push(policy.log_std);
        let mut gflat = g.theta;
        gflat.push(g.log_std);
        policy_opt.ascend(&mut flat, &gflat);
        policy.log_std = flat.pop().unwrap_or(policy.log_std);
        policy.theta.copy_from_slice(&flat);
        policy.clamp_log_std();

        if let DesignMode::Learn(dist) = &mut design {
            let dg = design_gradient(&batch, config.baseline);
            let mut p = [dist.mean[0], dist.mean[1], dist.log_std[0], dist.log_std[1]];
            design_opt.ascend(&mut p, &[dg.mean[0], dg.mean[1], dg.log_std[0], dg.log_std[1]]);
            dist.mean = [p[0], p[1]];
            dist.log_std = [p[2], p[3]];
            dist.clamp_log_std();
        }
        if !policy.theta.iter().all(|v| v.is_finite()) {
            return Err(CoreError::Diverged { iteration: it, mean_return: f64::NAN, guard });
        }
        if config.eval_every > 0 && (it + 1) % config.eval_every == 0 {
            let r = evaluate(env, &policy, design.point(), config.eval_episodes, config.seed ^ it as u64)?;
            stats.evaluations.push((it, r.mean_reward));
        }
    }
    stats.smoothed_return = ema(&stats.mean_return, config.ema_alpha);
    Ok(TrainOutcome { policy, design, stats })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mean_reward: f64,
    pub mean_income: f64,
    /// Mean of `initial_soc − final_soc`.
    pub mean_final_soc_gap: f64,
    pub mean_correction_cost: f64,
    pub episodes: Vec<EpisodeOutcome>,
}

impl EvalResult {
    /// Reward after paying for the restoration of the initial SOC.
    pub fn adjusted_reward(&self) -> f64 {
        self.mean_reward - self.mean_correction_cost
    }
}

/// Rolls out the mean action from half-capacity SOC over `n_episodes` random start days.
pub fn evaluate<E: TrainingEnv + ?Sized>(
    env: &E,
    policy: &PolicyParams,
    design: DesignPoint,
    n_episodes: usize,
    seed: u64,
) -> Result<EvalResult> {
    if n_episodes == 0 {
        return Err(CoreError::InvalidInput("evaluation needs at least one episode".into()));
    }
    let mut episodes = Vec::with_capacity(n_episodes);
    for ep in 0..n_episodes {
        let mut rng = episode_rng(seed, ep as u64);
        let mut failure = None;
        let mut ws = policy::Workspace::new(policy);
        let mut act = |x: &[f64]| match policy::mean_action(policy, x, &mut ws) {
            Ok(m) => m,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let out = env.run_episode(design, EpisodeMode::Evaluate, &mut rng, &mut act)?;
        if let Some(e) = failure {
            return Err(e);
        }
        episodes.push(out);
    }
    let k = 1.0 / n_episodes as f64;
    Ok(EvalResult {
        mean_reward: episodes.iter().map(EpisodeOutcome::ret).sum::<f64>() * k,
        mean_income: episodes.iter().map(|e| e.income).sum::<f64>() * k,
        mean_final_soc_gap: episodes.iter().map(|e| e.initial_soc - e.final_soc).sum::<f64>() * k,
        mean_correction_cost: episodes.iter().map(|e| e.correction_cost).sum::<f64>() * k,
        episodes,
    })
}
