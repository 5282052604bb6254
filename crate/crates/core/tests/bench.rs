use codesign_core::bench::*;
use codesign_core::config::KeyValues;
use codesign_core::deps::TrainStats;
use codesign_core::milp::Scenario;
use codesign_core::params::fixed_cost_per_horizon;
use codesign_lp::lp_format::format_significant;

fn quick(horizon: HorizonPreset, scenario: Scenario, dir: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(horizon, scenario);
    c.train.iterations = 20;
    c.train.batch = 4;
    c.eval_episodes = 10;
    c.out_dir = dir.to_path_buf();
    c
}

fn sample_stats(n: usize) -> TrainStats {
    let f = |k: f64| (0..n).map(|i| k * (i as f64 + 1.0).sqrt() - (i % 3) as f64).collect::<Vec<_>>();
    TrainStats { mean_return: f(-50.0), mean_income: f(-30.0), pv_kwp: f(4.0), battery_kwh: f(2.5), ..TrainStats::default() }
}

fn column(text: &str, col: usize) -> Vec<f64> {
    text.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

/// EMA written out longhand, independent of the library helper.
fn reference_ema(xs: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = vec![xs[0]];
    for x in &xs[1..] {
        let prev = *out.last().unwrap();
        out.push(prev + alpha * (x - prev));
    }
    out
}

#[test]
fn curve_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curves.csv");
    let stats = sample_stats(10);
    emit_curves(&stats, &path, 0.3).unwrap();
    let raw = std::fs::read_to_string(&path).unwrap();
    let smooth = std::fs::read_to_string(smoothed_path(&path)).unwrap();
    assert_eq!(smoothed_path(&path), dir.path().join("curves_smoothed.csv"));
    assert_eq!(raw.lines().count(), 11);
    assert_eq!(smooth.lines().count(), 11);
    assert_eq!(raw.lines().next(), Some(CURVE_HEADER));
    assert_eq!(smooth.lines().next(), Some(SMOOTHED_HEADER));
    assert_eq!(column(&raw, 1)[0], column(&smooth, 1)[0]);
    // Files carry nine significant digits, so the oracle is rounded the same way before comparing.
    for (col, series) in [(1, &stats.mean_return), (2, &stats.mean_income), (3, &stats.pv_kwp), (4, &stats.battery_kwh)] {
        let oracle = reference_ema(series, 0.3);
        for (got, want) in column(&smooth, col).iter().zip(&oracle) {
            let want: f64 = format_significant(*want, 9).parse().unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
    assert!(emit_curves(&TrainStats::default(), &path, 0.3).is_err());
}

fn report_lines(dir: &std::path::Path) -> Vec<String> {
    std::fs::read_to_string(dir.join("report.csv")).unwrap().lines().map(String::from).collect()
}

fn assert_self_consistent(report: &BenchmarkReport, params: &codesign_core::SystemParameters) {
    for (name, cell) in report.columns() {
        let r = cell.result().unwrap_or_else(|| panic!("{name} did not finish: {cell:?}"));
        let fixed = fixed_cost_per_horizon(r.design(), params, WEEK_HOURS as f64);
        assert!((r.reward - r.income + fixed).abs() < 1e-6, "{name}: {} - {} vs {fixed}", r.reward, r.income);
    }
}

#[test]
fn ctr_week_report() {
    let dir = tempfile::tempdir().unwrap();
    let c = quick(HorizonPreset::Week, Scenario::Ctr, dir.path());
    let report = run_benchmark(&c).unwrap();
    assert!(report.failures().is_empty());
    let lines = report_lines(dir.path());
    assert!(lines[0].starts_with("# week CTR"));
    assert_eq!(lines[1], "metric,RL,MILP");
    let labels: Vec<&str> = lines[2..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, REPORT_ROWS);
    assert_eq!(lines[2], "T,168,168");
    assert_self_consistent(&report, &c.params);
    let milp = report.milp.result().unwrap();
    assert_eq!((milp.pv_kwp, milp.battery_kwh), (55.81, 31.89));
    for f in ["curves.csv", "curves_smoothed.csv", "policy.ckpt", "milp_dispatch.csv", "diagnostics.csv", "timings.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let diag = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert!(diag.contains("milp.correction_cost,0\n"));
}

#[test]
fn ctr_des_week_report() {
    let dir = tempfile::tempdir().unwrap();
    let c = quick(HorizonPreset::Week, Scenario::CtrDes, dir.path());
    let report = run_benchmark(&c).unwrap();
    assert_eq!(report_lines(dir.path())[1], "metric,RL,MILP,MILP on RL design");
    assert_self_consistent(&report, &c.params);
    let des = report.milp.result().unwrap();
    let cross = report.cross.as_ref().unwrap().result().unwrap();
    assert!(cross.reward <= des.reward + 1e-9);
    assert_eq!(cross.design(), report.rl.result().unwrap().design());
    assert!(dir.path().join("milp_on_rl_design_dispatch.csv").exists());
}

#[test]
fn year_milp_is_exported_or_guarded() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick(HorizonPreset::Year, Scenario::Ctr, dir.path());
    c.train.iterations = 1;
    c.train.batch = 2;
    c.eval_episodes = 1;
    let report = run_benchmark(&c).unwrap();
    assert!(matches!(report.milp, Cell::Skipped(_)));
    assert!(report.failures().is_empty());
    let lp = std::fs::read_to_string(dir.path().join("milp.lp")).unwrap();
    assert!(lp.contains("Binaries") || lp.contains("Binary"));
    assert_eq!(report_lines(dir.path())[2], "T,8760,NA");

    c.embedded_year = true;
    let report = run_benchmark(&c).unwrap();
    match &report.milp {
        Cell::Failed(why) => assert!(why.contains("lp.max_dense_bytes"), "{why}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(report.failures().len(), 1);
    assert!(dense_basis_bytes(61_322) > DEFAULT_MAX_DENSE_BYTES);
}

#[test]
fn config_keys() {
    let mut c = ExperimentConfig::new(HorizonPreset::Week, Scenario::Ctr);
    let kv = KeyValues::parse("train.iterations = 12\ntrain.hidden = 16, 8\neval.episodes = 5\nc_imp = 0.3\nmip.max_nodes = 3\n").unwrap();
    c.apply_key_values(&kv).unwrap();
    assert_eq!((c.train.iterations, c.eval_episodes, c.mip.max_nodes), (12, 5, 3));
    assert_eq!(c.train.hidden, vec![16, 8]);
    assert_eq!(c.params.c_imp, 0.3);
    assert!(c.apply_key_values(&KeyValues::parse("train.nonsense = 1").unwrap()).is_err());
    assert!(c.apply_key_values(&KeyValues::parse("train.hidden = a,b").unwrap()).is_err());
    c.set_seed(99);
    assert_eq!(c.train.seed, 99);
    assert_eq!(c.data, DataSource::Synthetic { seed: 99 });
    c.design = Some(codesign_core::DesignPoint::new(1.0, 1.0));
    c.scenario = Scenario::CtrDes;
    assert!(c.validate().is_err());
}
