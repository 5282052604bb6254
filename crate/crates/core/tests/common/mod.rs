//! Brute-force oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use codesign_core::data::Window;
use codesign_core::deps::policy::log_prob;
use codesign_core::deps::{logprob_grad, policy_forward, sample_design, DesignDistribution, PolicyParams};
use codesign_core::{DesignPoint, SystemParameters};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const DP_STEP: f64 = 0.5;

/// A tiny CTR instance whose capacity is a whole number of kWh, so `B/2` sits on the grid.
pub struct MicroInstance {
    pub window: Window,
    pub design: DesignPoint,
}

pub fn micro_instance(seed: u64) -> MicroInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = rng.random_range(2..=6);
    let b = rng.random_range(1..=6) as f64;
    let p_nom = rng.random_range(0.0..12.0);
    let load = (0..t).map(|_| rng.random_range(0.0..4.0)).collect();
    let pv_norm = (0..t).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
    MicroInstance { window: Window { start_day: 0, load, pv_norm }, design: DesignPoint::new(p_nom, b) }
}

/// Grid cost of one exclusive step from `s` to `next`, or `None` if the battery cannot make the move.
fn step_cost(s: f64, next: f64, load: f64, pv: f64, design: DesignPoint, p: &SystemParameters) -> Option<f64> {
    let ds = next - s;
    let p_b = if ds >= 0.0 {
        let c = ds / (p.eta_b * p.dt);
        if c * p.dt + s > design.b + 1e-12 {
            return None;
        }
        c
    } else {
        let d = -ds * p.eta_b / p.dt;
        if d * p.dt > s + 1e-12 {
            return None;
        }
        -d
    };
    let net = load + p_b - design.p_nom * pv;
    let (imp, exp) = (net.max(0.0), (-net).max(0.0));
    if imp > p.p_grid_max || exp > p.p_grid_max {
        return None;
    }
    Some(imp * p.c_imp * p.dt - exp * p.c_exp * p.dt)
}

/// Minimum grid cost over SOC paths on a `step` grid that start at `B/2` and end there.
pub fn dp_grid_cost(window: &Window, design: DesignPoint, p: &SystemParameters, step: f64) -> f64 {
    let n = (design.b / step).round() as usize + 1;
    let level = |i: usize| i as f64 * step;
    let start = n / 2;
    let mut best = vec![f64::INFINITY; n];
    best[start] = 0.0;
    for t in 0..window.len() {
        let mut next = vec![f64::INFINITY; n];
        for (i, &cost) in best.iter().enumerate().filter(|(_, c)| c.is_finite()) {
            for (j, slot) in next.iter_mut().enumerate() {
                if let Some(c) = step_cost(level(i), level(j), window.load[t], window.pv_norm[t], design, p) {
                    *slot = slot.min(cost + c);
                }
            }
        }
        best = next;
    }
    best[start]
}

/// Cost a continuous schedule can lose by snapping every SOC to the grid: each step's
/// battery power moves by at most `step/η`, priced at the steeper grid tariff.
pub fn dp_discretization_bound(t: usize, p: &SystemParameters, step: f64) -> f64 {
    t as f64 * p.c_imp.max(p.c_exp.abs()) * step / (p.eta_b * p.dt) * p.dt
}

pub const FD_STEP: f64 = 1e-5;

/// Largest relative disagreement, with a floor of 1e-6 of the vector's own scale.
fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().chain(numeric).fold(1.0f64, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(1e-6 * scale))
        .fold(0.0, f64::max)
}

fn with_param(p: &PolicyParams, j: usize, v: f64) -> PolicyParams {
    let mut q = p.clone();
    if j == q.theta.len() {
        q.log_std = v;
    } else {
        q.theta[j] = v;
    }
    q
}

/// Random network, state and action; returns the worst relative error of `logprob_grad`
/// against central differences of `log_prob`.
pub fn policy_fd_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_in = rng.random_range(1..=9);
    let hidden: Vec<usize> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(1..=12)).collect();
    let scale = if rng.random_bool(0.5) { 1.0 } else { 200.0 };
    let mut p = PolicyParams::zeros(n_in, &hidden, scale, rng.random_range(-4.0..0.5));
    p.theta.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
    let x: Vec<f64> = (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (mean, _) = policy_forward(&p, &x).unwrap();
    let z: f64 = rng.sample(StandardNormal);
    let action = mean + p.std() * z * rng.random_range(0.2..2.0);
    let (_, g) = logprob_grad(&p, &x, action).unwrap();
    let mut analytic = g.theta.clone();
    analytic.push(g.log_std);
    let numeric: Vec<f64> = (0..=p.theta.len())
        .map(|j| {
            let v = if j == p.theta.len() { p.log_std } else { p.theta[j] };
            let up = log_prob(&with_param(&p, j, v + FD_STEP), &x, action).unwrap();
            let down = log_prob(&with_param(&p, j, v - FD_STEP), &x, action).unwrap();
            (up - down) / (2.0 * FD_STEP)
        })
        .collect();
    max_relative_error(&analytic, &numeric)
}

/// Same check for the score of a sampled design.
pub fn design_fd_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = DesignDistribution {
        mean: [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
        log_std: [rng.random_range(-2.0..0.5), rng.random_range(-2.0..0.5)],
        lower: [0.0, rng.random_range(0.0..10.0)],
        upper: [rng.random_range(20.0..300.0), rng.random_range(50.0..300.0)],
    };
    let s = sample_design(&dist, &mut rng);
    let analytic = [s.grad.mean[0], s.grad.mean[1], s.grad.log_std[0], s.grad.log_std[1]];
    let numeric: Vec<f64> = (0..4)
        .map(|k| {
            let shifted = |h: f64| {
                let mut d = dist.clone();
                if k < 2 {
                    d.mean[k] += h;
                } else {
                    d.log_std[k - 2] += h;
                }
                d.log_prob_grad(s.design).0
            };
            (shifted(FD_STEP) - shifted(-FD_STEP)) / (2.0 * FD_STEP)
        })
        .collect();
    max_relative_error(&analytic, &numeric)
}
