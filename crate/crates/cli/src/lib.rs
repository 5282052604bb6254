//! Argument parsing and subcommand dispatch for the `codesign` binary.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use codesign_core::bench::{self, DataSource, ExperimentConfig, HorizonPreset};
use codesign_core::config::KeyValues;
use codesign_core::data::slice_window;
use codesign_core::deps::{self, checkpoint, DesignMode, MdpTrainingEnv, PolicyParams};
use codesign_core::env::{write_trajectory, Environment, InitDayMode, InitSocMode};
use codesign_core::milp::{self, build_formulation, Scenario};
use codesign_core::DesignPoint;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "codesign", version, about = "PV-battery co-design: MILP benchmark versus policy search")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Roll out one evaluation episode and write its trajectory.
    Simulate(Common),
    /// Solve the perfect-foresight MILP and write the schedule.
    SolveMilp(Common),
    /// Train a policy and write curves and a checkpoint.
    Train(Common),
    /// Evaluate a checkpoint over many episodes.
    Evaluate(Common),
    /// Run RL, MILP and cross-evaluation and write the report.
    Benchmark(Common),
    /// Write the MILP in LP text format for an external solver.
    ExportLp(Common),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HorizonArg {
    Week,
    Year,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScenarioArg {
    Ctr,
    #[value(name = "ctr_des", alias = "ctr-des")]
    CtrDes,
}

#[derive(Args, Debug)]
struct Common {
    /// Dataset file (`hour,load_kw,pv_norm`); synthetic data when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, env = "CODESIGN_SEED", default_value_t = 7)]
    seed: u64,
    #[arg(long, value_enum, default_value = "week")]
    horizon: HorizonArg,
    #[arg(long, value_enum, default_value = "ctr")]
    scenario: ScenarioArg,
    /// PV power of the CTR design, kWp.
    #[arg(long)]
    design_pv: Option<f64>,
    /// Battery capacity of the CTR design, kWh.
    #[arg(long)]
    design_batt: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Flat `key = value` file with parameter and harness overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Evaluation episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Solve one-year MILPs with the embedded solver.
    #[arg(long)]
    embedded_year: bool,
    /// First day of the week preset.
    #[arg(long)]
    week_start: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Simulate,
    SolveMilp,
    Train,
    Evaluate,
    Benchmark,
    ExportLp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub action: Action,
    pub config: ExperimentConfig,
    pub checkpoint: Option<PathBuf>,
}

/// A command line that cannot be run.
#[derive(Debug)]
pub struct UsageError {
    pub message: String,
    /// Help and version requests are printed to stdout and exit 0.
    pub is_help: bool,
}

fn usage(message: impl Into<String>) -> UsageError {
    UsageError { message: message.into(), is_help: false }
}

pub fn parse_cli<I, T>(argv: I) -> Result<Invocation, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| UsageError {
        is_help: matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion),
        message: e.render().to_string(),
    })?;
    let (action, c) = match cli.command {
        Cmd::Simulate(c) => (Action::Simulate, c),
        Cmd::SolveMilp(c) => (Action::SolveMilp, c),
        Cmd::Train(c) => (Action::Train, c),
        Cmd::Evaluate(c) => (Action::Evaluate, c),
        Cmd::Benchmark(c) => (Action::Benchmark, c),
        Cmd::ExportLp(c) => (Action::ExportLp, c),
    };
    let horizon = match c.horizon {
        HorizonArg::Week => HorizonPreset::Week,
        HorizonArg::Year => HorizonPreset::Year,
    };
    let scenario = match c.scenario {
        ScenarioArg::Ctr => Scenario::Ctr,
        ScenarioArg::CtrDes => Scenario::CtrDes,
    };
    let mut config = ExperimentConfig::new(horizon, scenario);
    if let Some(path) = &c.config {
        let kv = KeyValues::load(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        config.apply_key_values(&kv).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    }
    if let Some(path) = c.data {
        config.data = DataSource::File(path);
    }
    config.set_seed(c.seed);
    if scenario == Scenario::CtrDes && (c.design_pv.is_some() || c.design_batt.is_some()) {
        return Err(usage("--design-pv and --design-batt are not allowed with --scenario ctr_des"));
    }
    if scenario == Scenario::Ctr {
        let d = horizon.default_design();
        config.design = Some(DesignPoint::new(c.design_pv.unwrap_or(d.p_nom), c.design_batt.unwrap_or(d.b)));
    }
    if let Some(n) = c.iterations {
        config.train.iterations = n;
    }
    if let Some(n) = c.episodes {
        config.eval_episodes = n;
    }
    if let Some(d) = c.week_start {
        config.week_start = d;
    }
    config.embedded_year = c.embedded_year;
    config.out_dir = c.out;
    config.validate().map_err(|e| usage(e.to_string()))?;
    if action == Action::Evaluate && c.checkpoint.is_none() {
        return Err(usage("evaluate needs --checkpoint"));
    }
    Ok(Invocation { action, config, checkpoint: c.checkpoint })
}

/// Runs a parsed invocation and returns the process exit code.
pub fn run(inv: &Invocation, out: &mut dyn Write) -> anyhow::Result<i32> {
    let cfg = &inv.config;
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    match inv.action {
        Action::Benchmark => {
            let report = bench::run_benchmark(cfg)?;
            out.write_all(bench::report_csv(&report).as_bytes())?;
            let failures = report.failures();
            for (cell, e) in &failures {
                writeln!(out, "{cell} failed: {e}")?;
            }
            Ok(if failures.is_empty() { EXIT_OK } else { EXIT_FAILURE })
        }
        Action::Train => {
            let dataset = bench::load_data(&cfg.data)?;
            let r = bench::run_rl(cfg, &dataset)?;
            bench::emit_curves(&r.outcome.stats, &cfg.out_dir.join("curves.csv"), cfg.train.ema_alpha)?;
            checkpoint::save(&r.outcome.policy, &r.outcome.design, &cfg.out_dir.join("policy.ckpt"))?;
            writeln!(out, "{}", summary_line("final design", &r.eval, r.design))?;
            Ok(EXIT_OK)
        }
        Action::Evaluate | Action::Simulate => {
            let dataset = bench::load_data(&cfg.data)?;
            let env = Environment::new(&dataset, &cfg.params, cfg.span(), cfg.t_horizon())?;
            let (policy, design) = match &inv.checkpoint {
                Some(path) => {
                    let (p, d) = checkpoint::load(path)?;
                    let design = match (&d, cfg.scenario) {
                        (DesignMode::Learn(_), _) | (_, Scenario::CtrDes) => d.point(),
                        (DesignMode::Fixed(_), Scenario::Ctr) => cfg.ctr_design(),
                    };
                    (p, design)
                }
                None => {
                    let tenv = MdpTrainingEnv::new(env);
                    let zero = PolicyParams::zeros(deps::N_FEATURES, &cfg.train.hidden, deps::TrainingEnv::action_scale(&tenv), cfg.train.init_log_std);
                    (zero, cfg.ctr_design())
                }
            };
            let tenv = MdpTrainingEnv { day_mode: InitDayMode::Uniform, ..MdpTrainingEnv::new(env) };
            if inv.action == Action::Evaluate {
                let e = deps::evaluate(&tenv, &policy, design, cfg.eval_episodes, cfg.train.seed)?;
                writeln!(out, "{}", summary_line("design", &e, design))?;
                let mut s = String::from("episode,reward,income,initial_soc,final_soc,correction_cost\n");
                for (i, ep) in e.episodes.iter().enumerate() {
                    let _ = writeln!(s, "{i},{},{},{},{},{}", ep.ret(), ep.income, ep.initial_soc, ep.final_soc, ep.correction_cost);
                }
                std::fs::write(cfg.out_dir.join("evaluation.csv"), s)?;
            } else {
                let mut rng = deps::episode_rng(cfg.train.seed, 0);
                let start = env.reset(InitSocMode::HalfCapacity, InitDayMode::Uniform, design, &mut rng)?;
                let mut ws = deps::policy::Workspace::new(&policy);
                let load_scale = tenv.load_scale;
                let rollout = env.rollout_from(start, design, |s| {
                    let x = deps::encode_state(s, design, &cfg.params, load_scale);
                    deps::policy::mean_action(&policy, &x, &mut ws).unwrap_or(0.0)
                })?;
                let file = std::fs::File::create(cfg.out_dir.join("trajectory.csv"))?;
                write_trajectory(&rollout.trajectory, std::io::BufWriter::new(file))?;
                writeln!(
                    out,
                    "return {:.6} income {:.6} correction {:.6} over {} h from day {}",
                    rollout.ret,
                    rollout.income,
                    rollout.correction_cost(&cfg.params),
                    rollout.trajectory.len(),
                    start.d
                )?;
            }
            Ok(EXIT_OK)
        }
        Action::SolveMilp => {
            if cfg.horizon == HorizonPreset::Year && !cfg.embedded_year {
                bail!("one-year MILPs are exported, not solved; use export-lp or pass --embedded-year");
            }
            let dataset = bench::load_data(&cfg.data)?;
            let window = slice_window(&dataset, cfg.window_start(), cfg.t_horizon())?;
            if cfg.horizon == HorizonPreset::Year {
                let f = build_formulation(&window, &cfg.params, &cfg.formulation())?;
                let need = bench::dense_basis_bytes(f.lp.n_constraints());
                if need > cfg.max_dense_bytes {
                    bail!("embedded solve needs about {:.1} GiB; raise lp.max_dense_bytes to proceed", need / 1024f64.powi(3));
                }
            }
            let d = milp::solve_exact(&window, &cfg.params, &cfg.formulation(), &cfg.mip)?;
            let b = d.best();
            let file = std::fs::File::create(cfg.out_dir.join("milp_dispatch.csv"))?;
            milp::write_dispatch(b, std::io::BufWriter::new(file))?;
            writeln!(
                out,
                "{} totex {:.6} (bound {:.6}, relaxed {:.6}) reward/168h {:.6} PV {:.4} kWp battery {:.4} kWh status {}",
                b.scenario.as_str(),
                b.costs.totex,
                b.totex_bound,
                d.relaxed.costs.totex,
                b.avg_weekly_reward,
                b.design.p_nom,
                b.design.b,
                b.status.as_str()
            )?;
            Ok(EXIT_OK)
        }
        Action::ExportLp => {
            let dataset = bench::load_data(&cfg.data)?;
            let window = slice_window(&dataset, cfg.window_start(), cfg.t_horizon())?;
            let opts = milp::FormulationOptions { enforce_exclusivity: true, ..cfg.formulation() };
            let f = build_formulation(&window, &cfg.params, &opts)?;
            let name = format!("milp_{}_{}.lp", cfg.horizon.as_str(), cfg.scenario.as_str().to_lowercase());
            let path = cfg.out_dir.join(name);
            codesign_lp::lp_format::write_lp_file(&f.lp, &f.marking, &path)?;
            writeln!(out, "wrote {} ({} variables, {} rows, {} binaries)", path.display(), f.lp.n_vars(), f.lp.n_constraints(), f.marking.len())?;
            Ok(EXIT_OK)
        }
    }
}

fn summary_line(label: &str, e: &deps::EvalResult, d: DesignPoint) -> String {
    format!(
        "mean reward {:.6} income {:.6} adjusted {:.6} over {} episodes; {label} PV {:.4} kWp battery {:.4} kWh",
        e.mean_reward,
        e.mean_income,
        e.adjusted_reward(),
        e.episodes.len(),
        d.p_nom,
        d.b
    )
}
