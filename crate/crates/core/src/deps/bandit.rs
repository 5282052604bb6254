//! One-step bandit with a quadratic reward, used to check the trainer against a known optimum.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{EpisodeMode, EpisodeOutcome, TrainingEnv};
use crate::error::Result;
use crate::params::DesignPoint;

/// Reward `−(a − peak)²` for a single action; the context is uniform noise the policy should ignore.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticBandit {
    pub peak: f64,
    pub n_features: usize,
    pub scale: f64,
}

impl QuadraticBandit {
    pub fn new(peak: f64) -> Self {
        Self { peak, n_features: 2, scale: 1.0 }
    }
}

impl TrainingEnv for QuadraticBandit {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn action_scale(&self) -> f64 {
        self.scale
    }

    fn run_episode(
        &self,
        _design: DesignPoint,
        _mode: EpisodeMode,
        rng: &mut ChaCha8Rng,
        act: &mut dyn FnMut(&[f64]) -> f64,
    ) -> Result<EpisodeOutcome> {
        let x: Vec<f64> = (0..self.n_features).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let a = act(&x);
        let r = -(a - self.peak).powi(2);
        Ok(EpisodeOutcome { rewards: vec![r], income: r, initial_soc: 0.0, final_soc: 0.0, correction_cost: 0.0 })
    }
}
