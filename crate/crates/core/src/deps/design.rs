//! Sampling distribution over designs: a Gaussian squashed by a scaled sigmoid into the design box.

use rand::Rng;
use rand_distr::StandardNormal;

use super::policy::{gaussian_log_prob, LOG_STD_MAX, LOG_STD_MIN};
use crate::params::{DesignPoint, SystemParameters};

/// Pre-squash values are clipped to this magnitude so designs stay strictly inside the box.
const PRE_SQUASH_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignDistribution {
    /// `[p_nom, b]` pre-squash means.
    pub mean: [f64; 2],
    pub log_std: [f64; 2],
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignGrad {
    pub mean: [f64; 2],
    pub log_std: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSample {
    pub design: DesignPoint,
    pub log_prob: f64,
    pub grad: DesignGrad,
}

fn sigmoid(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

impl DesignDistribution {
    pub fn new(params: &SystemParameters, log_std: f64) -> Self {
        Self {
            mean: [0.0; 2],
            log_std: [log_std; 2],
            lower: [params.p_nom_min, params.b_min],
            upper: [params.p_nom_max, params.b_max],
        }
    }

    fn squash(&self, i: usize, y: f64) -> f64 {
        self.lower[i] + (self.upper[i] - self.lower[i]) * sigmoid(y)
    }

    /// Design at the pre-squash means.
    pub fn mean_design(&self) -> DesignPoint {
        DesignPoint::new(self.squash(0, self.mean[0]), self.squash(1, self.mean[1]))
    }

    pub fn clamp_log_std(&mut self) {
        for s in &mut self.log_std {
            *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    /// Log-density of `design` and its gradient with respect to the distribution parameters.
    ///
    /// Variables with an empty range are treated as fixed and contribute nothing.
    pub fn log_prob_grad(&self, design: DesignPoint) -> (f64, DesignGrad) {
        let x = [design.p_nom, design.b];
        let mut y = [0.0; 2];
        for i in 0..2 {
            let width = self.upper[i] - self.lower[i];
            if width > 0.0 {
                let u = ((x[i] - self.lower[i]) / width).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                y[i] = (u / (1.0 - u)).ln();
            }
        }
        self.log_prob_grad_pre(y)
    }

    /// Same as [`Self::log_prob_grad`] from the pre-squash values.
    pub fn log_prob_grad_pre(&self, y: [f64; 2]) -> (f64, DesignGrad) {
        let mut lp = 0.0;
        let mut grad = DesignGrad { mean: [0.0; 2], log_std: [0.0; 2] };
        for i in 0..2 {
            let width = self.upper[i] - self.lower[i];
            if width <= 0.0 {
                continue;
            }
            let s = sigmoid(y[i]);
            let sigma = self.log_std[i].exp();
            let z = (y[i] - self.mean[i]) / sigma;
            // Change of variables: dx/dy = width · s(y) · (1 − s(y)).
            lp += gaussian_log_prob(y[i], self.mean[i], sigma) - (width * s * (1.0 - s)).ln();
            grad.mean[i] = z / sigma;
            grad.log_std[i] = z * z - 1.0;
        }
        (lp, grad)
    }
}

pub fn sample_design<R: Rng + ?Sized>(dist: &DesignDistribution, rng: &mut R) -> DesignSample {
    let mut y = [0.0; 2];
    for (i, yi) in y.iter_mut().enumerate() {
        let eps: f64 = rng.sample(StandardNormal);
        *yi = (dist.mean[i] + dist.log_std[i].exp() * eps).clamp(-PRE_SQUASH_LIMIT, PRE_SQUASH_LIMIT);
    }
    let design = DesignPoint::new(dist.squash(0, y[0]), dist.squash(1, y[1]));
    let (log_prob, grad) = dist.log_prob_grad_pre(y);
    DesignSample { design, log_prob, grad }
}
