//! Perfect-foresight dispatch and sizing as a linear program over a data window.

use std::io::Write;

use codesign_lp::lp_format::format_significant;
use codesign_lp::{
    solve_mip_with, BinaryMarking, LinearProgram, LpSolution, MipOptions, Relation, Sense, SolveStatus,
};

use crate::data::Window;
use crate::error::{CoreError, Result};
use crate::params::{grid_step_cost, CostBreakdown, DesignPoint, SystemParameters};

/// Threshold below which a charge/discharge or import/export pair counts as exclusive.
pub const EXCLUSIVITY_TOL: f64 = 1e-6;
const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Design fixed, dispatch optimized.
    Ctr,
    /// Design and dispatch optimized jointly.
    CtrDes,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Ctr => "CTR",
            Scenario::CtrDes => "CTR_DES",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulationOptions {
    pub scenario: Scenario,
    pub t_horizon: usize,
    pub enforce_exclusivity: bool,
    pub enforce_cyclic_soc: bool,
    pub fixed_design: Option<DesignPoint>,
}

impl FormulationOptions {
    pub fn ctr(design: DesignPoint, t_horizon: usize) -> Self {
        Self {
            scenario: Scenario::Ctr,
            t_horizon,
            enforce_exclusivity: false,
            enforce_cyclic_soc: true,
            fixed_design: Some(design),
        }
    }

    pub fn ctr_des(t_horizon: usize) -> Self {
        Self {
            scenario: Scenario::CtrDes,
            t_horizon,
            enforce_exclusivity: false,
            enforce_cyclic_soc: true,
            fixed_design: None,
        }
    }

    fn validate(&self, window: &Window, params: &SystemParameters) -> Result<()> {
        let bad = |m: String| Err(CoreError::InvalidInput(format!("{}: {m}", self.scenario.as_str())));
        match (self.scenario, self.fixed_design) {
            (Scenario::Ctr, None) => return bad("a fixed design is required".into()),
            (Scenario::CtrDes, Some(_)) => return bad("a fixed design is not allowed".into()),
            (Scenario::Ctr, Some(d)) => d.validate(params)?,
            _ => {}
        }
        if self.t_horizon == 0 {
            return bad("horizon must be at least one hour".into());
        }
        if window.len() != self.t_horizon {
            return bad(format!("window has {} hours, horizon is {}", window.len(), self.t_horizon));
        }
        params.validate()
    }
}

/// Column indices of one formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct VarLayout {
    pub t: usize,
    /// `(p_nom, b)` columns in the design scenario.
    pub design: Option<(usize, usize)>,
    /// First binary column, when exclusivity is enforced.
    pub binaries: Option<usize>,
}

impl VarLayout {
    pub fn charge(&self, t: usize) -> usize {
        5 * t
    }
    pub fn discharge(&self, t: usize) -> usize {
        5 * t + 1
    }
    pub fn battery_power(&self, t: usize) -> usize {
        5 * t + 2
    }
    pub fn import(&self, t: usize) -> usize {
        5 * t + 3
    }
    pub fn export(&self, t: usize) -> usize {
        5 * t + 4
    }
    /// `t` ranges over `0..=T`.
    pub fn soc(&self, t: usize) -> usize {
        5 * self.t + t
    }
    pub fn n_continuous(&self) -> usize {
        6 * self.t + 1 + if self.design.is_some() { 2 } else { 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Formulation {
    pub lp: LinearProgram,
    pub marking: BinaryMarking,
    pub layout: VarLayout,
}

pub fn build(window: &Window, params: &SystemParameters, options: &FormulationOptions) -> Result<(LinearProgram, BinaryMarking)> {
    let f = build_formulation(window, params, options)?;
    Ok((f.lp, f.marking))
}

/// Builds the dispatch program. The conditional battery model is split into
/// charge and discharge flows; optional binaries forbid using both in one step.
pub fn build_formulation(window: &Window, params: &SystemParameters, options: &FormulationOptions) -> Result<Formulation> {
    options.validate(window, params)?;
    let p = params;
    let t_len = options.t_horizon;
    let dt = p.dt;
    let tag = options.scenario.as_str();
    let mut lp = LinearProgram::new(format!("{tag}_T{t_len}"), Sense::Minimize);
    let grid = p.p_grid_max;

    let fixed = options.fixed_design;
    let b_cap = fixed.map_or(p.b_max, |d| d.b);
    for t in 0..t_len {
        lp.add_var(format!("c_{t}"), 0.0, f64::INFINITY, 0.0);
        lp.add_var(format!("d_{t}"), 0.0, f64::INFINITY, 0.0);
        lp.add_var(format!("pb_{t}"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_var(format!("imp_{t}"), 0.0, grid, p.c_imp * dt);
        lp.add_var(format!("exp_{t}"), 0.0, grid, -p.c_exp * dt);
    }
    for t in 0..=t_len {
        lp.add_var(format!("soc_{t}"), 0.0, b_cap, 0.0);
    }
    let mut layout = VarLayout { t: t_len, design: None, binaries: None };

    // Fixed cost: a constant for a given design, linear in the design variables otherwise.
    let probe = |design| CostBreakdown::new(design, p, t_len as f64, 0.0).fixed();
    let base = probe(DesignPoint::new(0.0, 0.0));
    match fixed {
        Some(d) => lp.objective_offset = probe(d),
        None => {
            let per_kwp = probe(DesignPoint::new(1.0, 0.0)) - base;
            let per_kwh = probe(DesignPoint::new(0.0, 1.0)) - base;
            let pn = lp.add_var("p_nom", p.p_nom_min, p.p_nom_max, per_kwp);
            let b = lp.add_var("b", p.b_min, p.b_max, per_kwh);
            lp.objective_offset = base;
            layout.design = Some((pn, b));
        }
    }

    let l = layout.clone();
    for t in 0..t_len {
        let eta = p.eta_b;
        lp.add_constraint(
            format!("soc_rec_{t}"),
            vec![(l.soc(t + 1), 1.0), (l.soc(t), -1.0), (l.charge(t), -eta * dt), (l.discharge(t), dt / eta)],
            Relation::Equal,
            0.0,
        );
        lp.add_constraint(
            format!("pb_split_{t}"),
            vec![(l.battery_power(t), 1.0), (l.charge(t), -1.0), (l.discharge(t), 1.0)],
            Relation::Equal,
            0.0,
        );
        let mut headroom = vec![(l.charge(t), dt), (l.soc(t), 1.0)];
        let head_rhs = match l.design {
            Some((_, b)) => {
                headroom.push((b, -1.0));
                0.0
            }
            None => b_cap,
        };
        lp.add_constraint(format!("headroom_{t}"), headroom, Relation::LessEq, head_rhs);
        lp.add_constraint(format!("stock_{t}"), vec![(l.discharge(t), dt), (l.soc(t), -1.0)], Relation::LessEq, 0.0);
        let mut balance = vec![(l.import(t), 1.0), (l.battery_power(t), -1.0), (l.export(t), -1.0)];
        let mut bal_rhs = window.load[t];
        match (l.design, fixed) {
            (Some((pn, _)), _) => balance.push((pn, window.pv_norm[t])),
            (None, Some(d)) => bal_rhs -= d.p_nom * window.pv_norm[t],
            (None, None) => unreachable!("validated above"),
        }
        lp.add_constraint(format!("balance_{t}"), balance, Relation::Equal, bal_rhs);
    }
    match l.design {
        Some((_, b)) => lp.add_constraint("soc_init", vec![(l.soc(0), 1.0), (b, -0.5)], Relation::Equal, 0.0),
        None => lp.add_constraint("soc_init", vec![(l.soc(0), 1.0)], Relation::Equal, b_cap / 2.0),
    };
    if options.enforce_cyclic_soc {
        lp.add_constraint("soc_cyclic", vec![(l.soc(t_len), 1.0), (l.soc(0), -1.0)], Relation::Equal, 0.0);
    }

    let mut marking = BinaryMarking::default();
    if options.enforce_exclusivity {
        // Either flow is at most B/dt, so B/dt (b_max/dt when sizing) is a valid big-M.
        let big_m = b_cap / dt;
        let first = lp.n_vars();
        for t in 0..t_len {
            let u = lp.add_var(format!("u_{t}"), 0.0, 1.0, 0.0);
            marking.indices.push(u);
            lp.add_constraint(format!("excl_c_{t}"), vec![(l.charge(t), 1.0), (u, -big_m)], Relation::LessEq, 0.0);
            lp.add_constraint(format!("excl_d_{t}"), vec![(l.discharge(t), 1.0), (u, big_m)], Relation::LessEq, big_m);
        }
        layout.binaries = Some(first);
    }
    Ok(Formulation { lp, marking, layout })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    pub scenario: Scenario,
    pub design: DesignPoint,
    /// `T+1` values.
    pub soc: Vec<f64>,
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    pub p_imp: Vec<f64>,
    pub p_exp: Vec<f64>,
    pub costs: CostBreakdown,
    pub avg_weekly_reward: f64,
    pub status: SolveStatus,
    /// Proven lower bound on totex (equals totex when solved to optimality).
    pub totex_bound: f64,
    pub nodes: usize,
    pub iterations: usize,
    /// Steps where the battery both charges and discharges.
    pub simultaneous_battery: Vec<usize>,
    /// Steps where the grid both imports and exports.
    pub simultaneous_grid: Vec<usize>,
}

impl DispatchSolution {
    pub fn t_horizon(&self) -> usize {
        self.charge.len()
    }

    pub fn battery_power(&self) -> Vec<f64> {
        self.charge.iter().zip(&self.discharge).map(|(c, d)| c - d).collect()
    }

    pub fn is_exclusive(&self) -> bool {
        self.simultaneous_battery.is_empty() && self.simultaneous_grid.is_empty()
    }

    /// End-of-horizon cost of restoring `soc_0`; zero when the cyclic row was enforced.
    pub fn correction_cost(&self, params: &SystemParameters) -> f64 {
        crate::env::cyclic_correction_cost(self.soc[self.soc.len() - 1], self.soc[0], params)
    }

    /// Reward per step, `-fixed/T - grid_step_cost`.
    pub fn step_rewards(&self, params: &SystemParameters) -> Vec<f64> {
        let t = self.t_horizon() as f64;
        let fixed = self.costs.fixed() / t;
        self.p_imp
            .iter()
            .zip(&self.p_exp)
            .map(|(i, e)| -fixed - (i * params.c_imp * params.dt - e * params.c_exp * params.dt))
            .collect()
    }
}

pub fn solve_and_extract(window: &Window, params: &SystemParameters, options: &FormulationOptions) -> Result<DispatchSolution> {
    solve_and_extract_with(window, params, options, &MipOptions::default())
}

pub fn solve_and_extract_with(
    window: &Window,
    params: &SystemParameters,
    options: &FormulationOptions,
    solver: &MipOptions,
) -> Result<DispatchSolution> {
    let f = build_formulation(window, params, options)?;
    let sol = solve_mip_with(&f.lp, &f.marking, solver)?;
    extract(window, params, options, &f, &sol)
}

fn solver_error(options: &FormulationOptions, status: SolveStatus) -> CoreError {
    CoreError::Solver { scenario: options.scenario.as_str().into(), status: status.as_str().into() }
}

/// Rebuilds a schedule from solver output and checks it against the physical model.
pub fn extract(
    window: &Window,
    params: &SystemParameters,
    options: &FormulationOptions,
    f: &Formulation,
    sol: &LpSolution,
) -> Result<DispatchSolution> {
    let usable = sol.status == SolveStatus::Optimal || (sol.status == SolveStatus::NodeLimit && !sol.values.is_empty());
    if !usable {
        return Err(solver_error(options, sol.status));
    }
    let l = &f.layout;
    let x = &sol.values;
    let t_len = l.t;
    let nonneg = |v: f64| v.max(0.0);
    let design = match (l.design, options.fixed_design) {
        (Some((pn, b)), _) => DesignPoint::new(
            x[pn].clamp(params.p_nom_min, params.p_nom_max),
            x[b].clamp(params.b_min, params.b_max),
        ),
        (None, Some(d)) => d,
        (None, None) => unreachable!("validated by the builder"),
    };
    let charge: Vec<f64> = (0..t_len).map(|t| nonneg(x[l.charge(t)])).collect();
    let discharge: Vec<f64> = (0..t_len).map(|t| nonneg(x[l.discharge(t)])).collect();
    let p_imp: Vec<f64> = (0..t_len).map(|t| nonneg(x[l.import(t)])).collect();
    let p_exp: Vec<f64> = (0..t_len).map(|t| nonneg(x[l.export(t)])).collect();
    let soc: Vec<f64> = (0..=t_len).map(|t| x[l.soc(t)].clamp(0.0, design.b)).collect();

    let mut grid_cost = 0.0;
    for t in 0..t_len {
        grid_cost += grid_step_cost(p_imp[t].min(params.p_grid_max), p_exp[t].min(params.p_grid_max), params)?;
    }
    let costs = CostBreakdown::new(design, params, t_len as f64, grid_cost);
    let totex_bound = if sol.status == SolveStatus::Optimal { costs.totex } else { sol.bound.min(costs.totex) };
    let out = DispatchSolution {
        scenario: options.scenario,
        design,
        simultaneous_battery: (0..t_len).filter(|&t| charge[t].min(discharge[t]) > EXCLUSIVITY_TOL).collect(),
        simultaneous_grid: (0..t_len).filter(|&t| p_imp[t].min(p_exp[t]) > EXCLUSIVITY_TOL).collect(),
        soc,
        charge,
        discharge,
        p_imp,
        p_exp,
        avg_weekly_reward: -costs.totex * 168.0 / t_len as f64,
        costs,
        status: sol.status,
        totex_bound,
        nodes: sol.nodes,
        iterations: sol.iterations,
    };
    verify(window, params, options, &out)?;
    Ok(out)
}

/// Checks a schedule against the physical equations directly, not the LP rows.
pub fn verify(window: &Window, params: &SystemParameters, options: &FormulationOptions, s: &DispatchSolution) -> Result<()> {
    let fail = |constraint: &str, step: usize, amount: f64| {
        Err(CoreError::Verification {
            scenario: options.scenario.as_str().into(),
            constraint: constraint.into(),
            step,
            amount,
        })
    };
    let (eta, dt, b) = (params.eta_b, params.dt, s.design.b);
    let tol = |scale: f64| VERIFY_TOL * scale.abs().max(1.0);
    if s.design.validate(params).is_err() {
        return fail("design bounds", 0, 0.0);
    }
    for t in 0..s.t_horizon() {
        let (c, d) = (s.charge[t], s.discharge[t]);
        let p_b = c - d;
        let next = s.soc[t] + (eta * c - d / eta) * dt;
        if (s.soc[t + 1] - next).abs() > tol(b) {
            return fail("soc recursion", t, (s.soc[t + 1] - next).abs());
        }
        if p_b >= 0.0 && p_b > (b - s.soc[t]) / dt + tol(b) {
            return fail("charge headroom", t, p_b - (b - s.soc[t]) / dt);
        }
        if p_b < 0.0 && p_b < -s.soc[t] / dt - tol(b) {
            return fail("discharge stock", t, -s.soc[t] / dt - p_b);
        }
        let supply = s.design.p_nom * window.pv_norm[t] + s.p_imp[t];
        let demand = window.load[t] + p_b + s.p_exp[t];
        if (supply - demand).abs() > tol(supply.max(demand)) {
            return fail("power balance", t, (supply - demand).abs());
        }
        if s.p_imp[t] > params.p_grid_max || s.p_exp[t] > params.p_grid_max {
            return fail("grid limit", t, s.p_imp[t].max(s.p_exp[t]) - params.p_grid_max);
        }
    }
    if s.soc.iter().any(|&v| v < -tol(b) || v > b + tol(b)) {
        return fail("soc bounds", 0, 0.0);
    }
    if (s.soc[0] - b / 2.0).abs() > tol(b) {
        return fail("initial soc", 0, (s.soc[0] - b / 2.0).abs());
    }
    let last = s.soc.len() - 1;
    if options.enforce_cyclic_soc && (s.soc[last] - s.soc[0]).abs() > tol(b) {
        return fail("cyclic soc", last, (s.soc[last] - s.soc[0]).abs());
    }
    if options.enforce_exclusivity && !s.simultaneous_battery.is_empty() {
        return fail("charge/discharge exclusivity", s.simultaneous_battery[0], 0.0);
    }
    Ok(())
}

/// CTR solve of a design proposed elsewhere.
pub fn cross_evaluate_design(
    window: &Window,
    params: &SystemParameters,
    rl_design: DesignPoint,
    t: usize,
) -> Result<DispatchSolution> {
    solve_and_extract(window, params, &FormulationOptions::ctr(rl_design, t))
}

/// Relaxed solve plus, when the relaxation uses both battery flows in a step,
/// a re-solve with exclusivity binaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDispatch {
    pub relaxed: DispatchSolution,
    /// Re-solve with binaries; `None` when the relaxation was already exclusive.
    pub exact: Option<DispatchSolution>,
}

impl ExactDispatch {
    /// The schedule to report: the exclusive re-solve when one was needed.
    pub fn best(&self) -> &DispatchSolution {
        self.exact.as_ref().unwrap_or(&self.relaxed)
    }

    /// Totex increase forced by exclusivity (0 when the relaxation was exact).
    pub fn exactness_gap(&self) -> f64 {
        self.best().costs.totex - self.relaxed.costs.totex
    }

    /// Remaining optimality gap of the reported schedule.
    pub fn mip_gap(&self) -> f64 {
        let b = self.best();
        (b.costs.totex - b.totex_bound).max(0.0)
    }
}

pub fn solve_exact(
    window: &Window,
    params: &SystemParameters,
    options: &FormulationOptions,
    solver: &MipOptions,
) -> Result<ExactDispatch> {
    solve_exact_from(window, params, options, solver, &[])
}

/// As [`solve_exact`], seeding the binary search with the best of the given
/// schedules that is feasible for this formulation.
pub fn solve_exact_from(
    window: &Window,
    params: &SystemParameters,
    options: &FormulationOptions,
    solver: &MipOptions,
    known: &[&DispatchSolution],
) -> Result<ExactDispatch> {
    let relaxed_opts = FormulationOptions { enforce_exclusivity: false, ..options.clone() };
    let relaxed = solve_and_extract_with(window, params, &relaxed_opts, solver)?;
    // Simultaneous import and export is never optimal while c_imp > c_exp, so only the battery needs binaries.
    if relaxed.simultaneous_battery.is_empty() {
        return Ok(ExactDispatch { relaxed, exact: None });
    }
    let exact_opts = FormulationOptions { enforce_exclusivity: true, ..options.clone() };
    let f = build_formulation(window, params, &exact_opts)?;
    let mut candidates: Vec<Vec<f64>> = known.iter().filter_map(|s| schedule_point(&f, s)).collect();
    candidates.extend(dive_incumbent(&f, solver)?);
    candidates.extend(solver.initial_incumbent.iter().cloned());
    let mut mip = solver.clone();
    mip.initial_incumbent = candidates
        .into_iter()
        .filter(|x| f.lp.is_feasible(x))
        .min_by(|a, b| f.lp.evaluate(a).total_cmp(&f.lp.evaluate(b)));
    let sol = solve_mip_with(&f.lp, &f.marking, &mip)?;
    let exact = extract(window, params, &exact_opts, &f, &sol)?;
    Ok(ExactDispatch { relaxed, exact: Some(exact) })
}

/// Maps a schedule onto the columns of `f`, or `None` if the design does not fit the formulation.
fn schedule_point(f: &Formulation, s: &DispatchSolution) -> Option<Vec<f64>> {
    let l = &f.layout;
    if s.t_horizon() != l.t {
        return None;
    }
    let mut x = vec![0.0; f.lp.n_vars()];
    for t in 0..l.t {
        x[l.charge(t)] = s.charge[t];
        x[l.discharge(t)] = s.discharge[t];
        x[l.battery_power(t)] = s.charge[t] - s.discharge[t];
        x[l.import(t)] = s.p_imp[t];
        x[l.export(t)] = s.p_exp[t];
        if let Some(first) = l.binaries {
            x[first + t] = if s.charge[t] >= s.discharge[t] { 1.0 } else { 0.0 };
        }
    }
    for t in 0..=l.t {
        x[l.soc(t)] = s.soc[t];
    }
    if let Some((pn, b)) = l.design {
        x[pn] = s.design.p_nom;
        x[b] = s.design.b;
    }
    f.lp.is_feasible(&x).then_some(x)
}

/// Feasible integral point by diving: steps where the relaxation uses both battery
/// flows get their binary fixed to the dominant flow, then the relaxation is re-solved.
fn dive_incumbent(f: &Formulation, solver: &MipOptions) -> Result<Option<Vec<f64>>> {
    let Some(first) = f.layout.binaries else { return Ok(None) };
    let l = &f.layout;
    let mut lp = f.lp.clone();
    for _ in 0..=l.t {
        let sol = codesign_lp::solve_lp_with(&lp, &solver.lp)?;
        if !sol.is_optimal() {
            return Ok(None);
        }
        let mut x = sol.values;
        let both: Vec<usize> =
            (0..l.t).filter(|&t| x[l.charge(t)].min(x[l.discharge(t)]) > EXCLUSIVITY_TOL).collect();
        if both.is_empty() {
            for t in 0..l.t {
                x[first + t] = if x[l.charge(t)] >= x[l.discharge(t)] { 1.0 } else { 0.0 };
            }
            return Ok(f.lp.is_feasible(&x).then_some(x));
        }
        for t in both {
            let u = if x[l.charge(t)] >= x[l.discharge(t)] { 1.0 } else { 0.0 };
            lp.lower[first + t] = u;
            lp.upper[first + t] = u;
        }
    }
    Ok(None)
}

pub const DISPATCH_HEADER: &str = "t,soc,charge,discharge,p_imp,p_exp";

/// Writes one row per step plus a final row carrying only `soc_T`.
pub fn write_dispatch<W: Write>(s: &DispatchSolution, mut w: W) -> Result<()> {
    let f = |v: f64| format_significant(v, 9);
    writeln!(w, "{DISPATCH_HEADER}")?;
    for t in 0..s.t_horizon() {
        writeln!(w, "{t},{},{},{},{},{}", f(s.soc[t]), f(s.charge[t]), f(s.discharge[t]), f(s.p_imp[t]), f(s.p_exp[t]))?;
    }
    writeln!(w, "{},{},,,,", s.t_horizon(), f(s.soc[s.t_horizon()]))?;
    Ok(())
}
