use codesign_core::data::{synthesize_dataset, Dataset, SynthConfig};
use codesign_core::env::*;
use codesign_core::params::{fixed_cost_per_horizon, grid_step_cost, CostBreakdown};
use codesign_core::{CoreError, DesignPoint, SystemParameters};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset() -> Dataset {
    synthesize_dataset(7, &SynthConfig::default())
}

fn random_design(rng: &mut impl Rng) -> DesignPoint {
    DesignPoint::new(rng.random_range(0.0..200.0), rng.random_range(0.0..200.0))
}

proptest! {
    #[test]
    fn projection_is_idempotent(b in 0.0..200.0f64, frac in 0.0..=1.0f64, req in -1e4..1e4f64) {
        let soc = b * frac;
        let once = project_action(soc, b, 1.0, req).unwrap();
        prop_assert_eq!(project_action(soc, b, 1.0, once).unwrap(), once);
        let f = feasible_action(soc, b, 0.9, 1.0, req).unwrap();
        prop_assert_eq!(feasible_action(soc, b, 0.9, 1.0, f).unwrap(), f);
    }

    #[test]
    fn feasible_actions_keep_soc_in_range(b in 0.0..200.0f64, frac in 0.0..=1.0f64, req in -1e4..1e4f64, eta in 0.5..=1.0f64) {
        let soc = b * frac;
        let p = feasible_action(soc, b, eta, 1.0, req).unwrap();
        let next = soc_update(soc, p, eta, 1.0);
        prop_assert!(next >= -1e-9 && next <= b + 1e-9, "{soc} -> {next} with {p}");
        // Never stronger than the literal bounds, and the same sign as the request.
        let literal = project_action(soc, b, 1.0, req).unwrap();
        prop_assert!(p.abs() <= literal.abs());
        prop_assert!(p * req >= 0.0);
    }
}

#[test]
fn round_trip_returns_eta_squared() {
    let (eta, x) = (0.9, 10.0);
    let stored = soc_update(0.0, x, eta, 1.0);
    let out = feasible_action(stored, 100.0, eta, 1.0, -1e6).unwrap();
    assert!((soc_update(stored, out, eta, 1.0)).abs() < 1e-12);
    assert!((-out - x * eta * eta).abs() < 1e-12);
}

#[test]
fn uniform_reset_has_mean_half_capacity() {
    let ds = dataset();
    let p = SystemParameters::default();
    let env = Environment::new(&ds, &p, DaySpan::year(), 168).unwrap();
    let design = DesignPoint::new(10.0, 62.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 10_000;
    let mut days = [0usize; 7];
    let wk = Environment::new(&ds, &p, DaySpan::week(182), 168).unwrap();
    let mut sum = 0.0;
    for _ in 0..n {
        let s = env.reset(InitSocMode::UniformRandom, InitDayMode::Uniform, design, &mut rng).unwrap();
        assert!(s.soc >= 0.0 && s.soc <= design.b && s.h == 0);
        sum += s.soc;
        let w = wk.reset(InitSocMode::UniformRandom, InitDayMode::Uniform, design, &mut rng).unwrap();
        days[w.d - 182] += 1;
    }
    let sigma = design.b / 12f64.sqrt() / (n as f64).sqrt();
    assert!((sum / n as f64 - design.b / 2.0).abs() < 3.0 * sigma);
    assert!(days.iter().all(|&c| c > 1200), "{days:?}");
}

#[test]
fn random_rollouts_conserve_power_and_contain_soc() {
    let ds = dataset();
    let p = SystemParameters::default();
    let env = Environment::new(&ds, &p, DaySpan::year(), 48).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..2_000 {
        let design = random_design(&mut rng);
        let scale = rng.random_range(1.0..400.0);
        let mut noise = ChaCha8Rng::seed_from_u64(rng.random());
        let cfg = EpisodeConfig { t_horizon: 48, ..EpisodeConfig::default() };
        let r = env.rollout(|_| noise.random_range(-scale..scale), design, &cfg, &mut rng).unwrap();
        for row in &r.trajectory {
            let balance = row.p_prod + row.p_imp - (row.p_load + row.p_b + row.p_exp);
            assert!(balance.abs() <= 1e-9, "balance off by {balance}");
            assert!(row.soc >= 0.0 && row.soc <= design.b);
            assert!(row.p_imp == 0.0 || row.p_exp == 0.0);
        }
        assert!(r.final_soc >= 0.0 && r.final_soc <= design.b);
    }
}

#[test]
fn rollouts_are_deterministic() {
    let ds = dataset();
    let p = SystemParameters::default();
    let env = Environment::new(&ds, &p, DaySpan::year(), 168).unwrap();
    let design = DesignPoint::new(40.0, 30.0);
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = ChaCha8Rng::seed_from_u64(seed + 1);
        env.rollout(|_| noise.random_range(-30.0..30.0), design, &EpisodeConfig::default(), &mut rng).unwrap()
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3).trajectory, run(4).trajectory);
}

#[test]
fn idle_system_pays_for_its_load() {
    let ds = dataset();
    let p = SystemParameters::default();
    let env = Environment::new(&ds, &p, DaySpan::year(), 168).unwrap();
    let design = DesignPoint::new(0.0, 0.0);
    let start = env.observe(0, 40, 0.0, design);
    let r = env.rollout_from(start, design, |_| 0.0).unwrap();
    let load: f64 = (0..168).map(|k| ds.load.values[40 * 24 + k]).sum();
    let expected = -load * p.c_imp * p.dt - fixed_cost_per_horizon(design, &p, 168.0);
    assert!((r.ret - expected).abs() < 1e-9 * expected.abs());
}

#[test]
fn return_is_minus_totex() {
    let ds = dataset();
    let p = SystemParameters::default();
    let env = Environment::new(&ds, &p, DaySpan::week(182), 168).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let design = random_design(&mut rng);
        let mut noise = ChaCha8Rng::seed_from_u64(rng.random());
        let r = env
            .rollout(|_| noise.random_range(-50.0..50.0), design, &EpisodeConfig::default(), &mut rng)
            .unwrap();
        let grid: f64 = r.trajectory.iter().map(|row| grid_step_cost(row.p_imp, row.p_exp, &p).unwrap()).sum();
        let costs = CostBreakdown::new(design, &p, 168.0, grid);
        assert!((r.ret + costs.totex).abs() < 1e-9 * costs.totex.abs().max(1.0));
        assert!((r.income - costs.income).abs() < 1e-9 * grid.abs().max(1.0));
    }
}

#[test]
fn reward_minus_negated_grid_cost_is_constant() {
    let ds = dataset();
    let p = SystemParameters::default();
    let env = Environment::new(&ds, &p, DaySpan::year(), 168).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let design = DesignPoint::new(63.65, 64.9);
    let mut noise = ChaCha8Rng::seed_from_u64(2);
    let r = env.rollout(|_| noise.random_range(-80.0..80.0), design, &EpisodeConfig::default(), &mut rng).unwrap();
    let expected = -fixed_cost_per_horizon(design, &p, 168.0) / 168.0;
    for row in &r.trajectory {
        let gap = row.reward + grid_step_cost(row.p_imp, row.p_exp, &p).unwrap();
        assert!((gap - expected).abs() < 1e-9);
    }
}

#[test]
fn grid_limit_is_an_error() {
    let ds = dataset();
    let p = SystemParameters { p_grid_max: 1.0, ..SystemParameters::default() };
    let env = Environment::new(&ds, &p, DaySpan::year(), 24).unwrap();
    let design = DesignPoint::new(0.0, 0.0);
    let err = env.rollout_from(env.observe(0, 100, 0.0, design), design, |_| 0.0).unwrap_err();
    assert!(matches!(err, CoreError::GridLimit { .. }));
}

#[test]
fn trajectory_export() {
    let ds = dataset();
    let p = SystemParameters::default();
    let env = Environment::new(&ds, &p, DaySpan::year(), 30).unwrap();
    let design = DesignPoint::new(20.0, 10.0);
    let r = env.rollout_from(env.observe(0, 0, 5.0, design), design, |_| 3.0).unwrap();
    let mut buf = Vec::new();
    write_trajectory(&r.trajectory, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], TRAJECTORY_HEADER);
    assert_eq!(lines.len(), 31);
    assert!(lines[25].starts_with("24,0,1,"));
}
