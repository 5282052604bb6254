//! Hourly battery-dispatch MDP: projected actions, SOC dynamics, net grid settlement and rewards.

use std::io::Write;

use codesign_lp::lp_format::format_significant;
use rand::Rng;

use crate::data::{Dataset, DAYS};
use crate::error::{CoreError, Result};
use crate::params::{fixed_cost_per_horizon, grid_step_cost, income, DesignPoint, SystemParameters};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdpState {
    /// Hour of day, 0..24.
    pub h: usize,
    /// Day of year, 0..365.
    pub d: usize,
    pub soc: f64,
    pub p_prod_bar: f64,
    pub p_load_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: MdpState,
    pub reward: f64,
    pub p_b_applied: f64,
    pub p_imp: f64,
    pub p_exp: f64,
    pub grid_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitSocMode {
    UniformRandom,
    HalfCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitDayMode {
    /// Uniform over the days of the environment's span.
    Uniform,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeConfig {
    pub t_horizon: usize,
    pub init_soc: InitSocMode,
    pub init_day: InitDayMode,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { t_horizon: 168, init_soc: InitSocMode::UniformRandom, init_day: InitDayMode::Uniform, seed: 0 }
    }
}

/// Consecutive days an episode cycles through; the day counter wraps back to `first_day`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DaySpan {
    pub first_day: usize,
    pub n_days: usize,
}

impl DaySpan {
    pub fn year() -> Self {
        Self { first_day: 0, n_days: DAYS }
    }

    pub fn week(first_day: usize) -> Self {
        Self { first_day, n_days: 7 }
    }

    pub fn next_day(&self, d: usize) -> usize {
        let offset = (d + DAYS - self.first_day) % DAYS;
        (self.first_day + (offset + 1) % self.n_days) % DAYS
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        (self.first_day + rng.random_range(0..self.n_days)) % DAYS
    }

    fn validate(&self) -> Result<()> {
        if self.first_day >= DAYS || self.n_days == 0 || self.n_days > DAYS {
            return Err(CoreError::InvalidInput(format!("invalid day span {self:?}")));
        }
        Ok(())
    }
}

/// Literal clipping of a requested battery power to the headroom and stock bounds.
pub fn project_action(soc: f64, b: f64, dt: f64, requested: f64) -> Result<f64> {
    if !(soc >= 0.0 && soc <= b) {
        return Err(CoreError::InvalidInput(format!("soc {soc} outside [0, {b}]")));
    }
    if !requested.is_finite() {
        return Err(CoreError::InvalidInput(format!("requested power {requested} is not finite")));
    }
    Ok(if requested >= 0.0 { requested.min((b - soc) / dt) } else { requested.max(-soc / dt) })
}

/// Projection used by the simulator: the literal bounds, with discharge further
/// limited to what the stored energy can deliver after losses.
pub fn feasible_action(soc: f64, b: f64, eta: f64, dt: f64, requested: f64) -> Result<f64> {
    let p = project_action(soc, b, dt, requested)?;
    Ok(p.max(-eta * soc / dt))
}

pub fn soc_update(soc: f64, p_b: f64, eta: f64, dt: f64) -> f64 {
    if p_b >= 0.0 {
        soc + p_b * eta * dt
    } else {
        soc + p_b / eta * dt
    }
}

/// Net settlement: `(import, export)` covering `load + p_b − prod`.
pub fn settle_grid(p_prod: f64, p_load: f64, p_b: f64, params: &SystemParameters) -> Result<(f64, f64)> {
    let net = p_load + p_b - p_prod;
    if !net.is_finite() {
        return Err(CoreError::InvalidInput("non-finite power in grid settlement".into()));
    }
    if net.abs() > params.p_grid_max {
        return Err(CoreError::GridLimit { step: 0, net, limit: params.p_grid_max });
    }
    Ok(if net >= 0.0 { (net, 0.0) } else { (0.0, -net) })
}

/// Grid cost of restoring the initial SOC at the end of an episode.
///
/// A deficit is bought at the import price through the charging loss; a surplus is
/// discharged and exported, which costs money when the export price is negative.
pub fn cyclic_correction_cost(soc_final: f64, soc_initial: f64, params: &SystemParameters) -> f64 {
    let deficit = soc_initial - soc_final;
    if deficit > 0.0 {
        deficit / params.eta_b * params.c_imp
    } else if deficit < 0.0 {
        -(-deficit) * params.eta_b * params.c_exp
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    pub h: usize,
    pub d: usize,
    /// SOC at the start of the step.
    pub soc: f64,
    pub p_b: f64,
    pub p_imp: f64,
    pub p_exp: f64,
    pub p_prod: f64,
    pub p_load: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub trajectory: Vec<TrajectoryRow>,
    pub ret: f64,
    pub income: f64,
    pub initial_soc: f64,
    pub final_soc: f64,
}

impl Rollout {
    pub fn correction_cost(&self, params: &SystemParameters) -> f64 {
        cyclic_correction_cost(self.final_soc, self.initial_soc, params)
    }
}

/// Simulator over a dataset, a span of days and a fixed episode length.
#[derive(Debug, Clone, Copy)]
pub struct Environment<'a> {
    pub dataset: &'a Dataset,
    pub params: &'a SystemParameters,
    pub span: DaySpan,
    pub t_horizon: usize,
}

impl<'a> Environment<'a> {
    pub fn new(dataset: &'a Dataset, params: &'a SystemParameters, span: DaySpan, t_horizon: usize) -> Result<Self> {
        params.validate()?;
        span.validate()?;
        Ok(Self { dataset, params, span, t_horizon })
    }

    pub fn observe(&self, h: usize, d: usize, soc: f64, design: DesignPoint) -> MdpState {
        MdpState {
            h,
            d,
            soc,
            p_prod_bar: self.dataset.pv_at(h, d) * design.p_nom,
            p_load_bar: self.dataset.load_at(h, d),
        }
    }

    /// Per-step share of the design's fixed cost over this horizon.
    pub fn fixed_per_step(&self, design: DesignPoint) -> f64 {
        if self.t_horizon == 0 {
            return 0.0;
        }
        fixed_cost_per_horizon(design, self.params, self.t_horizon as f64) / self.t_horizon as f64
    }

    pub fn reset<R: Rng + ?Sized>(
        &self,
        soc_mode: InitSocMode,
        day_mode: InitDayMode,
        design: DesignPoint,
        rng: &mut R,
    ) -> Result<MdpState> {
        let d = match day_mode {
            InitDayMode::Uniform => self.span.sample(rng),
            InitDayMode::Fixed(day) if day < DAYS => day,
            InitDayMode::Fixed(day) => return Err(CoreError::InvalidInput(format!("start day {day} out of range"))),
        };
        let soc = match soc_mode {
            InitSocMode::HalfCapacity => design.b / 2.0,
            InitSocMode::UniformRandom if design.b > 0.0 => rng.random_range(0.0..=design.b),
            InitSocMode::UniformRandom => 0.0,
        };
        Ok(self.observe(0, d, soc, design))
    }

    pub fn step(&self, state: &MdpState, requested: f64, design: DesignPoint) -> Result<StepOutcome> {
        self.step_with_fixed(state, requested, design, self.fixed_per_step(design))
    }

    pub fn step_with_fixed(
        &self,
        state: &MdpState,
        requested: f64,
        design: DesignPoint,
        fixed_per_step: f64,
    ) -> Result<StepOutcome> {
        let p = self.params;
        let p_b = feasible_action(state.soc, design.b, p.eta_b, p.dt, requested)?;
        // Rounding can leave the SOC a few ulps outside [0, B].
        let soc = soc_update(state.soc, p_b, p.eta_b, p.dt).clamp(0.0, design.b);
        let (p_imp, p_exp) = settle_grid(state.p_prod_bar, state.p_load_bar, p_b, p)?;
        let grid_cost = grid_step_cost(p_imp, p_exp, p)?;
        let h = (state.h + 1) % 24;
        let d = if h == 0 { self.span.next_day(state.d) } else { state.d };
        Ok(StepOutcome {
            next_state: self.observe(h, d, soc, design),
            reward: -fixed_per_step - grid_cost,
            p_b_applied: p_b,
            p_imp,
            p_exp,
            grid_cost,
        })
    }

    /// Runs one episode of `t_horizon` steps from `start` under `policy`.
    pub fn rollout_from<F>(&self, start: MdpState, design: DesignPoint, mut policy: F) -> Result<Rollout>
    where
        F: FnMut(&MdpState) -> f64,
    {
        let fixed = self.fixed_per_step(design);
        let mut state = start;
        let mut trajectory = Vec::with_capacity(self.t_horizon);
        let mut ret = 0.0;
        for t in 0..self.t_horizon {
            let out = self.step_with_fixed(&state, policy(&state), design, fixed).map_err(|e| match e {
                CoreError::GridLimit { net, limit, .. } => CoreError::GridLimit { step: t, net, limit },
                other => other,
            })?;
            trajectory.push(TrajectoryRow {
                t,
                h: state.h,
                d: state.d,
                soc: state.soc,
                p_b: out.p_b_applied,
                p_imp: out.p_imp,
                p_exp: out.p_exp,
                p_prod: state.p_prod_bar,
                p_load: state.p_load_bar,
                reward: out.reward,
            });
            ret += out.reward;
            state = out.next_state;
        }
        let imports: Vec<f64> = trajectory.iter().map(|r| r.p_imp).collect();
        let exports: Vec<f64> = trajectory.iter().map(|r| r.p_exp).collect();
        Ok(Rollout {
            income: income(&imports, &exports, self.params)?,
            trajectory,
            ret,
            initial_soc: start.soc,
            final_soc: state.soc,
        })
    }

    pub fn rollout<F, R>(&self, policy: F, design: DesignPoint, config: &EpisodeConfig, rng: &mut R) -> Result<Rollout>
    where
        F: FnMut(&MdpState) -> f64,
        R: Rng + ?Sized,
    {
        let env = Self { t_horizon: config.t_horizon, ..*self };
        let start = env.reset(config.init_soc, config.init_day, design, rng)?;
        env.rollout_from(start, design, policy)
    }
}

pub const TRAJECTORY_HEADER: &str = "t,h,d,soc,p_b,p_imp,p_exp,reward";

pub fn write_trajectory<W: Write>(rows: &[TrajectoryRow], mut w: W) -> Result<()> {
    let f = |v: f64| format_significant(v, 9);
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{},{}", r.t, r.h, r.d, f(r.soc), f(r.p_b), f(r.p_imp), f(r.p_exp), f(r.reward))?;
    }
    Ok(())
}
