//! Experiment harness: the {week, year} × {CTR, CTR_DES} × {RL, MILP, MILP on RL design} matrix.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use codesign_lp::lp_format::{format_significant, write_lp_file};
use codesign_lp::MipOptions;

use crate::config::KeyValues;
use crate::data::{load_dataset, slice_window, synthesize_dataset, Dataset, SynthConfig, Window, HOURS};
use crate::deps::{
    self, checkpoint, ema, evaluate, initial_policy, DesignDistribution, DesignMode, MdpTrainingEnv, TrainConfig,
    TrainStats,
};
use crate::env::{DaySpan, Environment, InitDayMode};
use crate::error::{CoreError, Result};
use crate::milp::{self, build_formulation, DispatchSolution, ExactDispatch, FormulationOptions, Scenario};
use crate::params::{fixed_cost_per_horizon, DesignPoint, SystemParameters};

pub const WEEK_HOURS: usize = 168;
/// First day of the synthetic summer week.
pub const DEFAULT_WEEK_START: usize = 182;
/// Default cap on the memory an embedded simplex basis inverse may take.
pub const DEFAULT_MAX_DENSE_BYTES: f64 = 2.0 * 1024.0 * 1024.0 * 1024.0;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Synthetic { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizonPreset {
    Week,
    Year,
}

impl HorizonPreset {
    pub fn hours(self) -> usize {
        match self {
            HorizonPreset::Week => WEEK_HOURS,
            HorizonPreset::Year => HOURS,
        }
    }

    /// Design used by the control-only scenario when none is given.
    pub fn default_design(self) -> DesignPoint {
        match self {
            HorizonPreset::Week => DesignPoint::new(55.81, 31.89),
            HorizonPreset::Year => DesignPoint::new(63.65, 64.9),
        }
    }

    pub fn hidden(self) -> Vec<usize> {
        match self {
            HorizonPreset::Week => vec![32],
            HorizonPreset::Year => vec![64, 64],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HorizonPreset::Week => "week",
            HorizonPreset::Year => "year",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub horizon: HorizonPreset,
    pub scenario: Scenario,
    /// CTR design; `None` picks the preset default. Must be `None` for CTR_DES.
    pub design: Option<DesignPoint>,
    pub params: SystemParameters,
    pub train: TrainConfig,
    pub eval_episodes: usize,
    pub mip: MipOptions,
    /// Solve one-year MILPs with the embedded solver instead of only exporting them.
    pub embedded_year: bool,
    pub max_dense_bytes: f64,
    pub week_start: usize,
    pub out_dir: PathBuf,
}

/// Config keys besides the [`SystemParameters`] fields.
pub const EXPERIMENT_KEYS: [&str; 16] = [
    "train.iterations",
    "train.batch",
    "train.policy_lr",
    "train.design_lr",
    "train.hidden",
    "train.init_log_std",
    "train.design_init_log_std",
    "train.baseline",
    "train.ema_alpha",
    "train.eval_every",
    "train.divergence_factor",
    "eval.episodes",
    "mip.max_nodes",
    "lp.max_iterations",
    "lp.max_dense_bytes",
    "data.week_start",
];

impl ExperimentConfig {
    /// Preset defaults: synthetic data (seed 7), 1000 evaluation episodes, 20 B&B nodes.
    pub fn new(horizon: HorizonPreset, scenario: Scenario) -> Self {
        let train = TrainConfig { hidden: horizon.hidden(), seed: 7, ..TrainConfig::default() };
        Self {
            data: DataSource::Synthetic { seed: 7 },
            horizon,
            scenario,
            design: None,
            params: SystemParameters::default(),
            train,
            eval_episodes: 1000,
            mip: MipOptions { max_nodes: 20, ..MipOptions::default() },
            embedded_year: false,
            max_dense_bytes: DEFAULT_MAX_DENSE_BYTES,
            week_start: DEFAULT_WEEK_START,
            out_dir: PathBuf::from("out"),
        }
    }

    /// Seeds both the synthetic data (when used) and training.
    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        if let DataSource::Synthetic { seed: s } = &mut self.data {
            *s = seed;
        }
    }

    /// Applies a flat config; unknown keys are rejected.
    pub fn apply_key_values(&mut self, kv: &KeyValues) -> Result<()> {
        for k in kv.keys() {
            if !SystemParameters::KEYS.contains(&k) && !EXPERIMENT_KEYS.contains(&k) {
                return Err(CoreError::InvalidInput(format!("unknown config key {k}")));
            }
        }
        self.params = self.params.with_key_values(kv)?;
        let t = &mut self.train;
        if let Some(v) = kv.get_usize("train.iterations")? {
            t.iterations = v;
        }
        if let Some(v) = kv.get_usize("train.batch")? {
            t.batch = v;
        }
        if let Some(v) = kv.get_f64("train.policy_lr")? {
            t.policy_lr = v;
        }
        if let Some(v) = kv.get_f64("train.design_lr")? {
            t.design_lr = v;
        }
        if let Some(v) = kv.get_str("train.hidden") {
            t.hidden = v
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| CoreError::InvalidInput(format!("train.hidden must be a comma list, got {v:?}")))?;
        }
        if let Some(v) = kv.get_f64("train.init_log_std")? {
            t.init_log_std = v;
        }
        if let Some(v) = kv.get_f64("train.design_init_log_std")? {
            t.design_init_log_std = v;
        }
        if let Some(v) = kv.get_parsed::<bool>("train.baseline")? {
            t.baseline = v;
        }
        if let Some(v) = kv.get_f64("train.ema_alpha")? {
            t.ema_alpha = v;
        }
        if let Some(v) = kv.get_usize("train.eval_every")? {
            t.eval_every = v;
        }
        if let Some(v) = kv.get_f64("train.divergence_factor")? {
            t.divergence_factor = v;
        }
        if let Some(v) = kv.get_usize("eval.episodes")? {
            self.eval_episodes = v;
        }
        if let Some(v) = kv.get_usize("mip.max_nodes")? {
            self.mip.max_nodes = v;
        }
        if let Some(v) = kv.get_usize("lp.max_iterations")? {
            self.mip.lp.max_iterations = Some(v);
        }
        if let Some(v) = kv.get_f64("lp.max_dense_bytes")? {
            self.max_dense_bytes = v;
        }
        if let Some(v) = kv.get_usize("data.week_start")? {
            self.week_start = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.train.validate()?;
        if self.scenario == Scenario::CtrDes && self.design.is_some() {
            return Err(CoreError::InvalidInput("CTR_DES learns the design; a fixed design is not allowed".into()));
        }
        self.ctr_design().validate(&self.params)?;
        if self.eval_episodes == 0 {
            return Err(CoreError::InvalidInput("evaluation needs at least one episode".into()));
        }
        if self.week_start >= crate::data::DAYS {
            return Err(CoreError::InvalidInput(format!("week start {} outside 0..365", self.week_start)));
        }
        Ok(())
    }

    pub fn t_horizon(&self) -> usize {
        self.horizon.hours()
    }

    pub fn ctr_design(&self) -> DesignPoint {
        self.design.unwrap_or(self.horizon.default_design())
    }

    pub fn span(&self) -> DaySpan {
        match self.horizon {
            HorizonPreset::Week => DaySpan::week(self.week_start),
            HorizonPreset::Year => DaySpan::year(),
        }
    }

    /// First day of the MILP window.
    pub fn window_start(&self) -> usize {
        match self.horizon {
            HorizonPreset::Week => self.week_start,
            HorizonPreset::Year => 0,
        }
    }

    pub fn formulation(&self) -> FormulationOptions {
        match self.scenario {
            Scenario::Ctr => FormulationOptions::ctr(self.ctr_design(), self.t_horizon()),
            Scenario::CtrDes => FormulationOptions::ctr_des(self.t_horizon()),
        }
    }

    pub fn design_mode(&self) -> DesignMode {
        match self.scenario {
            Scenario::Ctr => DesignMode::Fixed(self.ctr_design()),
            Scenario::CtrDes => DesignMode::Learn(DesignDistribution::new(&self.params, self.train.design_init_log_std)),
        }
    }
}

pub fn load_data(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::File(path) => load_dataset(path),
        DataSource::Synthetic { seed } => Ok(synthesize_dataset(*seed, &SynthConfig::default())),
    }
}

/// The five table metrics of one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodResult {
    pub t: usize,
    /// Reward per 168 hours.
    pub reward: f64,
    /// Income per 168 hours.
    pub income: f64,
    pub battery_kwh: f64,
    pub pv_kwp: f64,
}

impl MethodResult {
    pub fn from_dispatch(s: &DispatchSolution) -> Self {
        let t = s.t_horizon();
        Self {
            t,
            reward: s.avg_weekly_reward,
            income: -s.costs.grid_cost * WEEK_HOURS as f64 / t as f64,
            battery_kwh: s.design.b,
            pv_kwp: s.design.p_nom,
        }
    }

    pub fn design(&self) -> DesignPoint {
        DesignPoint::new(self.pv_kwp, self.battery_kwh)
    }
}

/// Outcome of one report column.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Done(MethodResult),
    /// Not run by design (for example a one-year MILP routed to LP export).
    Skipped(String),
    Failed(String),
}

impl Cell {
    pub fn result(&self) -> Option<&MethodResult> {
        match self {
            Cell::Done(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub horizon: HorizonPreset,
    pub scenario: Scenario,
    pub rl: Cell,
    pub milp: Cell,
    /// Present for CTR_DES only.
    pub cross: Option<Cell>,
    /// RL evaluation reward after paying for the cyclic SOC correction, per 168 hours.
    pub rl_adjusted_reward: Option<f64>,
    /// Ordered `(key, value)` pairs for diagnostics.csv.
    pub diagnostics: Vec<(String, String)>,
    /// Wall-clock seconds per step; written separately since they vary between runs.
    pub timings: Vec<(String, f64)>,
    pub stats: Option<TrainStats>,
    pub milp_solution: Option<ExactDispatch>,
    pub cross_solution: Option<ExactDispatch>,
}

impl BenchmarkReport {
    pub fn failures(&self) -> Vec<(&'static str, &str)> {
        let mut out = Vec::new();
        for (name, cell) in [("RL", Some(&self.rl)), ("MILP", Some(&self.milp)), ("MILP on RL design", self.cross.as_ref())] {
            if let Some(Cell::Failed(e)) = cell {
                out.push((name, e.as_str()));
            }
        }
        out
    }

    pub fn columns(&self) -> Vec<(&'static str, &Cell)> {
        let mut cols = vec![("RL", &self.rl), ("MILP", &self.milp)];
        if let Some(c) = &self.cross {
            cols.push(("MILP on RL design", c));
        }
        cols
    }
}

pub const REPORT_ROWS: [&str; 5] = ["T", "Reward", "Income", "Battery capacity", "PV power"];

fn num(v: f64) -> String {
    format_significant(v, 9)
}

/// Table-shaped report: one row per metric, one column per method.
pub fn report_csv(report: &BenchmarkReport) -> String {
    let cols = report.columns();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# {} {}: reward and income per 168 h; RL uses the mean action at the final design",
        report.horizon.as_str(),
        report.scenario.as_str()
    );
    s.push_str("metric");
    for (name, _) in &cols {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (row, label) in REPORT_ROWS.iter().enumerate() {
        s.push_str(label);
        for (_, cell) in &cols {
            s.push(',');
            match cell.result() {
                Some(r) => s.push_str(&match row {
                    0 => r.t.to_string(),
                    1 => num(r.reward),
                    2 => num(r.income),
                    3 => num(r.battery_kwh),
                    _ => num(r.pv_kwp),
                }),
                None => s.push_str("NA"),
            }
        }
        s.push('\n');
    }
    s
}

pub const CURVE_HEADER: &str = "iteration,reward,income,pv_kwp,battery_kwh,reward_smoothed";
pub const SMOOTHED_HEADER: &str = "iteration,reward,income,pv_kwp,battery_kwh";

/// Companion path holding the smoothed series: `curves.csv` → `curves_smoothed.csv`.
pub fn smoothed_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("curves");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_smoothed.{ext}"),
        None => format!("{stem}_smoothed"),
    };
    path.with_file_name(name)
}

/// Writes per-iteration statistics and an EMA-smoothed companion file.
pub fn emit_curves(stats: &TrainStats, path: &Path, alpha: f64) -> Result<()> {
    if stats.is_empty() {
        return Err(CoreError::InvalidInput("no training statistics to write".into()));
    }
    let smoothed = ema(&stats.mean_return, alpha);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{CURVE_HEADER}")?;
    for i in 0..stats.len() {
        writeln!(
            w,
            "{i},{},{},{},{},{}",
            num(stats.mean_return[i]),
            num(stats.mean_income[i]),
            num(stats.pv_kwp[i]),
            num(stats.battery_kwh[i]),
            num(smoothed[i])
        )?;
    }
    w.flush()?;
    let series = [&smoothed, &ema(&stats.mean_income, alpha), &ema(&stats.pv_kwp, alpha), &ema(&stats.battery_kwh, alpha)];
    let mut w = std::io::BufWriter::new(std::fs::File::create(smoothed_path(path))?);
    writeln!(w, "{SMOOTHED_HEADER}")?;
    for i in 0..stats.len() {
        let row: Vec<String> = series.iter().map(|s| num(s[i])).collect();
        writeln!(w, "{i},{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Memory the embedded simplex needs for the basis inverse of `rows` constraints.
pub fn dense_basis_bytes(rows: usize) -> f64 {
    (rows as f64).powi(2) * 8.0
}

/// What happened to one MILP solve.
enum MilpRun {
    Solved(ExactDispatch),
    Exported(PathBuf),
}

struct Harness<'a> {
    config: &'a ExperimentConfig,
    window: Window,
    diagnostics: Vec<(String, String)>,
    timings: Vec<(String, f64)>,
}

impl Harness<'_> {
    fn diag(&mut self, key: &str, value: impl ToString) {
        self.diagnostics.push((key.to_string(), value.to_string()));
    }

    fn milp(&mut self, tag: &str, options: &FormulationOptions, known: &[&DispatchSolution]) -> Result<MilpRun> {
        let c = self.config;
        let exact = FormulationOptions { enforce_exclusivity: true, ..options.clone() };
        if c.horizon == HorizonPreset::Year {
            let path = c.out_dir.join(format!("{tag}.lp"));
            let f = build_formulation(&self.window, &c.params, &exact)?;
            write_lp_file(&f.lp, &f.marking, &path)?;
            if !c.embedded_year {
                return Ok(MilpRun::Exported(path));
            }
            let need = dense_basis_bytes(f.lp.n_constraints());
            if need > c.max_dense_bytes {
                return Err(CoreError::InvalidInput(format!(
                    "embedded solve of {} rows needs about {:.1} GiB for the basis inverse, above lp.max_dense_bytes",
                    f.lp.n_constraints(),
                    need / 1024f64.powi(3)
                )));
            }
        }
        Ok(MilpRun::Solved(milp::solve_exact_from(&self.window, &c.params, options, &c.mip, known)?))
    }

    fn record_dispatch(&mut self, tag: &str, d: &ExactDispatch) {
        let b = d.best();
        self.diag(&format!("{tag}.status"), b.status.as_str());
        self.diag(&format!("{tag}.totex"), num(b.costs.totex));
        self.diag(&format!("{tag}.totex_bound"), num(b.totex_bound));
        self.diag(&format!("{tag}.relaxed_totex"), num(d.relaxed.costs.totex));
        self.diag(&format!("{tag}.relaxed_pv_kwp"), num(d.relaxed.design.p_nom));
        self.diag(&format!("{tag}.relaxed_battery_kwh"), num(d.relaxed.design.b));
        self.diag(&format!("{tag}.relaxation_simultaneous_steps"), d.relaxed.simultaneous_battery.len());
        self.diag(&format!("{tag}.exactness_gap"), num(d.exactness_gap()));
        self.diag(&format!("{tag}.mip_gap"), num(d.mip_gap()));
        self.diag(&format!("{tag}.nodes"), b.nodes);
        self.diag(&format!("{tag}.correction_cost"), num(b.correction_cost(&self.config.params)));
    }
}

/// Adopts `candidate`, a fixed-design schedule, as the joint-design incumbent when it is
/// exclusive, verifies against the joint formulation and is cheaper. Any schedule feasible
/// for one design is feasible for the joint problem, so this only tightens the incumbent.
pub fn share_incumbent(des: &mut ExactDispatch, candidate: &DispatchSolution, window: &Window, params: &SystemParameters) -> bool {
    let Some(exact) = &mut des.exact else { return false };
    if !candidate.is_exclusive() || candidate.costs.totex >= exact.costs.totex - 1e-9 {
        return false;
    }
    let opts = FormulationOptions { enforce_exclusivity: true, ..FormulationOptions::ctr_des(candidate.t_horizon()) };
    let mut shared = candidate.clone();
    shared.scenario = Scenario::CtrDes;
    shared.status = exact.status;
    shared.totex_bound = exact.totex_bound.min(shared.costs.totex);
    if milp::verify(window, params, &opts, &shared).is_err() {
        return false;
    }
    *exact = shared;
    true
}

/// MILP on a given design, warm-started from the joint-design schedule, with the
/// result fed back as a joint-design incumbent when it is cheaper.
pub fn cross_evaluate_shared(
    window: &Window,
    params: &SystemParameters,
    design: DesignPoint,
    mip: &MipOptions,
    des: &mut ExactDispatch,
) -> Result<ExactDispatch> {
    let cross = milp::solve_exact_from(window, params, &FormulationOptions::ctr(design, window.len()), mip, &[des.best()])?;
    share_incumbent(des, cross.best(), window, params);
    Ok(cross)
}

fn cell_from(run: &Result<MilpRun>) -> Cell {
    match run {
        Ok(MilpRun::Solved(d)) => Cell::Done(MethodResult::from_dispatch(d.best())),
        Ok(MilpRun::Exported(p)) => Cell::Skipped(format!("exported to {}", p.display())),
        Err(e) => Cell::Failed(e.to_string()),
    }
}

/// Runs every cell of one experiment and writes its files into `config.out_dir`.
///
/// A failing cell is recorded and the others still run; only configuration
/// and output errors abort.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let dataset = load_data(&config.data)?;
    let t = config.t_horizon();
    let window = slice_window(&dataset, config.window_start(), t)?;
    let mut h = Harness { config, window, diagnostics: Vec::new(), timings: Vec::new() };
    h.diag("horizon", config.horizon.as_str());
    h.diag("scenario", config.scenario.as_str());
    h.diag("seed", config.train.seed);
    h.diag("iterations", config.train.iterations);
    h.diag("eval_episodes", config.eval_episodes);
    h.diag("mip.max_nodes", config.mip.max_nodes);

    let clock = Instant::now();
    let milp_run = h.milp("milp", &config.formulation(), &[]);
    h.timings.push(("milp".into(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let rl = run_rl(config, &dataset);
    h.timings.push(("train_and_evaluate".into(), clock.elapsed().as_secs_f64()));

    let mut milp_solution = match &milp_run {
        Ok(MilpRun::Solved(d)) => Some(d.clone()),
        _ => None,
    };
    let mut cross_run = None;
    if config.scenario == Scenario::CtrDes {
        cross_run = Some(match &rl {
            Ok(r) => {
                let clock = Instant::now();
                let known: Vec<&DispatchSolution> = milp_solution.iter().map(ExactDispatch::best).collect();
                let run = h.milp("milp_on_rl_design", &FormulationOptions::ctr(r.design, t), &known);
                h.timings.push(("milp_on_rl_design".into(), clock.elapsed().as_secs_f64()));
                run
            }
            Err(e) => Err(CoreError::InvalidInput(format!("no RL design: {e}"))),
        });
    }
    if let (Some(des), Some(Ok(MilpRun::Solved(cross)))) = (&mut milp_solution, &cross_run) {
        if share_incumbent(des, cross.best(), &h.window, &config.params) {
            h.diag("milp.incumbent_from", "milp_on_rl_design");
        }
    }

    let milp_cell = match (&milp_run, &milp_solution) {
        (Ok(MilpRun::Solved(_)), Some(d)) => Cell::Done(MethodResult::from_dispatch(d.best())),
        _ => cell_from(&milp_run),
    };
    if let Some(d) = &milp_solution {
        h.record_dispatch("milp", d);
        write_file(&config.out_dir.join("milp_dispatch.csv"), |w| milp::write_dispatch(d.best(), w))?;
    }
    let cross_solution = match &cross_run {
        Some(Ok(MilpRun::Solved(d))) => Some(d.clone()),
        _ => None,
    };
    if let Some(d) = &cross_solution {
        h.record_dispatch("milp_on_rl_design", d);
        write_file(&config.out_dir.join("milp_on_rl_design_dispatch.csv"), |w| milp::write_dispatch(d.best(), w))?;
    }

    let (rl_cell, rl_adjusted, stats) = match rl {
        Ok(r) => {
            let k = WEEK_HOURS as f64 / t as f64;
            h.diag("rl.correction_cost", num(r.eval.mean_correction_cost * k));
            h.diag("rl.final_soc_gap", num(r.eval.mean_final_soc_gap));
            h.diag("rl.adjusted_reward", num(r.eval.adjusted_reward() * k));
            h.diag("rl.fixed_cost", num(fixed_cost_per_horizon(r.design, &config.params, t as f64) * k));
            emit_curves(&r.outcome.stats, &config.out_dir.join("curves.csv"), config.train.ema_alpha)?;
            checkpoint::save(&r.outcome.policy, &r.outcome.design, &config.out_dir.join("policy.ckpt"))?;
            let result = MethodResult {
                t,
                reward: r.eval.mean_reward * k,
                income: r.eval.mean_income * k,
                battery_kwh: r.design.b,
                pv_kwp: r.design.p_nom,
            };
            (Cell::Done(result), Some(r.eval.adjusted_reward() * k), Some(r.outcome.stats))
        }
        Err(e) => (Cell::Failed(e.to_string()), None, None),
    };

    let report = BenchmarkReport {
        horizon: config.horizon,
        scenario: config.scenario,
        rl: rl_cell,
        milp: milp_cell,
        cross: cross_run.as_ref().map(cell_from).map(|c| match (&c, &cross_solution) {
            (Cell::Done(_), Some(d)) => Cell::Done(MethodResult::from_dispatch(d.best())),
            _ => c,
        }),
        rl_adjusted_reward: rl_adjusted,
        diagnostics: h.diagnostics,
        timings: h.timings,
        stats,
        milp_solution,
        cross_solution,
    };
    let mut diagnostics = report.diagnostics.clone();
    for (name, cell) in report.columns() {
        match cell {
            Cell::Skipped(why) => diagnostics.push((format!("{name}.skipped"), why.clone())),
            Cell::Failed(why) => diagnostics.push((format!("{name}.error"), why.clone())),
            Cell::Done(_) => {}
        }
    }
    std::fs::write(config.out_dir.join("report.csv"), report_csv(&report))?;
    write_file(&config.out_dir.join("diagnostics.csv"), |w| {
        writeln!(w, "key,value")?;
        for (k, v) in &diagnostics {
            writeln!(w, "{k},{}", csv_field(v))?;
        }
        Ok(())
    })?;
    write_file(&config.out_dir.join("timings.csv"), |w| {
        writeln!(w, "step,seconds")?;
        for (k, v) in &report.timings {
            writeln!(w, "{k},{v:.3}")?;
        }
        Ok(())
    })?;
    Ok(report)
}

fn csv_field(v: &str) -> String {
    if v.contains([',', '"', '\n']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

pub struct RlRun {
    pub outcome: deps::TrainOutcome,
    pub eval: deps::EvalResult,
    pub design: DesignPoint,
}

/// Trains DEPS for the configured scenario and evaluates the final policy.
pub fn run_rl(config: &ExperimentConfig, dataset: &Dataset) -> Result<RlRun> {
    let env = Environment::new(dataset, &config.params, config.span(), config.t_horizon())?;
    let tenv = MdpTrainingEnv { day_mode: InitDayMode::Uniform, ..MdpTrainingEnv::new(env) };
    let policy = initial_policy(&tenv, &config.train);
    let outcome = deps::train(&tenv, policy, config.design_mode(), &config.train)?;
    let design = outcome.final_design();
    let eval = evaluate(&tenv, &outcome.policy, design, config.eval_episodes, config.train.seed)?;
    Ok(RlRun { outcome, eval, design })
}
