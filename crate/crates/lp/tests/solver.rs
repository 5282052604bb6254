mod common;

use codesign_lp::lp_format::{parse_lp, to_lp_string};
use codesign_lp::{
    solve_lp, solve_mip, solve_mip_with, BinaryMarking, LinearProgram, MipOptions, Relation, Sense, SolveStatus,
};
use common::{binary_enumeration, random_binary_problem, random_bounded_lp, vertex_enumeration};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Dual objective `yᵀb + Σ d_j·bound_j` from the returned row duals.
fn dual_objective(lp: &LinearProgram, y: &[f64]) -> f64 {
    let mut d = lp.objective.clone();
    for (c, &yi) in lp.constraints.iter().zip(y) {
        for &(j, a) in &c.terms {
            d[j] -= yi * a;
        }
    }
    let mut total = lp.objective_offset + lp.constraints.iter().zip(y).map(|(c, yi)| c.rhs * yi).sum::<f64>();
    for (j, &dj) in d.iter().enumerate() {
        let at_lower = match lp.sense {
            Sense::Minimize => dj > 0.0,
            Sense::Maximize => dj < 0.0,
        };
        total += dj * if at_lower { lp.lower[j] } else { lp.upper[j] };
    }
    total
}

#[test]
fn random_lps_match_vertex_enumeration() {
    for seed in 0..300 {
        let lp = random_bounded_lp(seed);
        let sol = solve_lp(&lp).unwrap();
        match vertex_enumeration(&lp) {
            Some(best) => {
                assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}");
                assert!(close(sol.objective, best, 1e-6), "seed {seed}: {} vs {best}", sol.objective);
                assert!(lp.max_violation(&sol.values) <= 1e-7, "seed {seed}");
            }
            None => assert_eq!(sol.status, SolveStatus::Infeasible, "seed {seed}"),
        }
    }
}

#[test]
fn duals_close_the_gap() {
    for seed in 0..200 {
        let lp = random_bounded_lp(seed);
        let sol = solve_lp(&lp).unwrap();
        if !sol.is_optimal() {
            continue;
        }
        assert_eq!(sol.duals.len(), lp.n_constraints());
        let dual = dual_objective(&lp, &sol.duals);
        assert!(close(dual, sol.objective, 1e-6), "seed {seed}: dual {dual} primal {}", sol.objective);
    }
}

#[test]
fn binary_problems_match_enumeration() {
    for seed in 0..200 {
        let lp = random_binary_problem(seed, 10);
        let marking = BinaryMarking::new((0..lp.n_vars()).collect());
        let sol = solve_mip(&lp, &marking).unwrap();
        match binary_enumeration(&lp) {
            Some(best) => {
                assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}");
                assert!(close(sol.objective, best, 1e-6), "seed {seed}: {} vs {best}", sol.objective);
                assert!(sol.values.iter().all(|v| *v == 0.0 || *v == 1.0));
            }
            None => assert_eq!(sol.status, SolveStatus::Infeasible, "seed {seed}"),
        }
    }
}

#[test]
fn knapsack_of_six() {
    let weights = [12.0, 7.0, 11.0, 8.0, 9.0, 6.0];
    let values = [24.0, 13.0, 23.0, 15.0, 16.0, 11.0];
    let mut lp = LinearProgram::new("knapsack", Sense::Maximize);
    for (i, v) in values.iter().enumerate() {
        lp.add_var(format!("take{i}"), 0.0, 1.0, *v);
    }
    lp.add_constraint("cap", weights.iter().copied().enumerate().collect(), Relation::LessEq, 26.0);
    let marking = BinaryMarking::new((0..6).collect());
    let sol = solve_mip(&lp, &marking).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(sol.objective, binary_enumeration(&lp).unwrap());
    assert_eq!(sol.objective, 51.0);
}

#[test]
fn binary_sum_below_one_and_a_half() {
    let mut lp = LinearProgram::new("pair", Sense::Maximize);
    let x = lp.add_var("x", 0.0, 1.0, 1.0);
    let y = lp.add_var("y", 0.0, 1.0, 1.0);
    lp.add_constraint("c", vec![(x, 1.0), (y, 1.0)], Relation::LessEq, 1.5);
    let sol = solve_mip(&lp, &BinaryMarking::new(vec![x, y])).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(sol.objective, 1.0);
    assert_eq!(solve_lp(&lp).unwrap().objective, 1.5);
}

#[test]
fn empty_marking_is_a_plain_lp() {
    for seed in 0..50 {
        let lp = random_bounded_lp(seed);
        let (a, b) = (solve_lp(&lp).unwrap(), solve_mip(&lp, &BinaryMarking::default()).unwrap());
        assert_eq!(a.status, b.status);
        assert_eq!(a.values, b.values);
        assert_eq!(a.duals, b.duals);
        assert!(a.objective == b.objective || (a.objective.is_nan() && b.objective.is_nan()));
    }
}

#[test]
fn node_limit_reports_incumbent_and_bound() {
    // Equal-weight subset sum with an odd capacity defeats the LP bound.
    let mut lp = LinearProgram::new("parity", Sense::Maximize);
    let n = 16;
    for i in 0..n {
        lp.add_var(format!("b{i}"), 0.0, 1.0, 2.0);
    }
    lp.add_constraint("cap", (0..n).map(|j| (j, 2.0)).collect(), Relation::LessEq, 15.0);
    let marking = BinaryMarking::new((0..n).collect());
    let options = MipOptions { max_nodes: 5, rounding_heuristic: false, ..MipOptions::default() };
    let sol = solve_mip_with(&lp, &marking, &options).unwrap();
    assert_eq!(sol.status, SolveStatus::NodeLimit);
    assert!(sol.bound >= 14.0 - 1e-9);
    if !sol.values.is_empty() {
        assert!(sol.objective <= sol.bound + 1e-9);
    }
}

#[test]
fn round_trip_through_lp_text() {
    for seed in 0..100 {
        let mut lp = random_bounded_lp(seed);
        lp.objective_offset = 1.0 / 3.0;
        let marking = BinaryMarking::new(if lp.n_vars() > 1 { vec![0] } else { vec![] });
        lp.lower[0] = 0.0;
        lp.upper[0] = 1.0;
        let (back, back_marking) = parse_lp(&to_lp_string(&lp, &marking)).unwrap();
        // The reader numbers variables by first appearance; map back by name.
        let idx: Vec<usize> =
            lp.var_names.iter().map(|n| back.var_names.iter().position(|m| m == n).unwrap()).collect();
        assert_eq!(back.sense, lp.sense);
        assert_eq!(back.n_vars(), lp.n_vars());
        assert_eq!(back_marking.indices, marking.indices.iter().map(|&j| idx[j]).collect::<Vec<_>>());
        assert_eq!(back.n_constraints(), lp.n_constraints());
        assert!(close(back.objective_offset, lp.objective_offset, 5e-9));
        for j in 0..lp.n_vars() {
            assert!(close(back.objective[idx[j]], lp.objective[j], 5e-9));
            assert_eq!(back.lower[idx[j]], lp.lower[j]);
            assert_eq!(back.upper[idx[j]], lp.upper[j]);
        }
        for (a, b) in lp.constraints.iter().zip(&back.constraints) {
            assert_eq!(a.relation, b.relation);
            assert_eq!(a.rhs, b.rhs);
            let mut dense_a = vec![0.0; lp.n_vars()];
            for &(j, c) in &a.terms {
                dense_a[idx[j]] += c;
            }
            let mut dense_b = vec![0.0; lp.n_vars()];
            for &(j, c) in &b.terms {
                dense_b[j] += c;
            }
            assert_eq!(dense_a, dense_b);
        }
        let s1 = solve_mip(&lp, &marking).unwrap();
        let s2 = solve_mip(&back, &back_marking).unwrap();
        assert_eq!(s1.status, s2.status);
        if s1.is_optimal() {
            assert!(close(s1.objective, s2.objective, 1e-7));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relaxation_bounds_the_mip(seed in any::<u64>()) {
        let lp = random_binary_problem(seed, 8);
        let lp_sol = solve_lp(&lp).unwrap();
        let mip = solve_mip(&lp, &BinaryMarking::new((0..lp.n_vars()).collect())).unwrap();
        if mip.is_optimal() {
            prop_assert!(lp_sol.is_optimal());
            let slack = 1e-7 * (1.0 + lp_sol.objective.abs());
            match lp.sense {
                Sense::Minimize => prop_assert!(lp_sol.objective <= mip.objective + slack),
                Sense::Maximize => prop_assert!(lp_sol.objective >= mip.objective - slack),
            }
        }
    }

    #[test]
    fn objective_scaling_keeps_the_optimum(seed in any::<u64>(), k in 0.1f64..100.0) {
        let lp = random_bounded_lp(seed);
        let base = solve_lp(&lp).unwrap();
        let mut scaled = lp.clone();
        scaled.objective.iter_mut().for_each(|c| *c *= k);
        let sol = solve_lp(&scaled).unwrap();
        prop_assert_eq!(base.status, sol.status);
        if base.is_optimal() {
            prop_assert!(close(scaled.evaluate(&sol.values), k * base.objective, 1e-6));
            prop_assert!(close(lp.evaluate(&sol.values), base.objective, 1e-6));
        }
    }

    #[test]
    fn returned_points_are_feasible(seed in any::<u64>()) {
        let lp = random_bounded_lp(seed);
        let sol = solve_lp(&lp).unwrap();
        if sol.is_optimal() {
            prop_assert!(lp.max_violation(&sol.values) <= 1e-7);
            prop_assert!(close(lp.evaluate(&sol.values), sol.objective, 1e-9));
        }
    }
}
