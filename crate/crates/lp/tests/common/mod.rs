//! Independent oracles and random instance generators for the LP kernel tests.
#![allow(dead_code)]

use codesign_lp::{LinearProgram, Relation, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive vertex enumeration over every `n`-subset of rows and bounds.
///
/// Requires finite bounds on every variable. Returns the best objective or
/// `None` when no vertex is feasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut row = vec![0.0; n];
        for &(j, a) in &c.terms {
            row[j] += a;
        }
        planes.push((row, c.rhs));
    }
    for j in 0..n {
        for bound in [lp.lower[j], lp.upper[j]] {
            assert!(bound.is_finite(), "oracle needs a bounded box");
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            planes.push((row, bound));
        }
    }
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = solve_dense(&subset.iter().map(|&k| planes[k].clone()).collect::<Vec<_>>()) {
            if point_feasible(lp, &x) {
                let v = lp.evaluate(&x);
                best = Some(match (best, lp.sense) {
                    (None, _) => v,
                    (Some(b), Sense::Minimize) => b.min(v),
                    (Some(b), Sense::Maximize) => b.max(v),
                });
            }
        }
        if !next_combination(&mut subset, planes.len()) {
            break;
        }
    }
    best
}

fn next_combination(c: &mut [usize], total: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < total - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn solve_dense(rows: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut a: Vec<Vec<f64>> = rows.iter().map(|(r, b)| {
        let mut v = r.clone();
        v.push(*b);
        v
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &k| a[i][col].abs().total_cmp(&a[k][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = a[i][col] / a[col][col];
                if f != 0.0 {
                    for j in col..=n {
                        a[i][j] -= f * a[col][j];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

pub fn point_feasible(lp: &LinearProgram, x: &[f64]) -> bool {
    let rows = lp.constraints.iter().all(|c| c.violation(x) <= 1e-9 * (1.0 + c.rhs.abs()));
    let bounds = (0..lp.n_vars()).all(|j| x[j] >= lp.lower[j] - 1e-9 && x[j] <= lp.upper[j] + 1e-9);
    rows && bounds
}

/// Best objective over all 0/1 assignments of a pure-binary problem.
pub fn binary_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| f64::from((mask >> j) & 1)).collect();
        if point_feasible(lp, &x) {
            let v = lp.evaluate(&x);
            best = Some(match (best, lp.sense) {
                (None, _) => v,
                (Some(b), Sense::Minimize) => b.min(v),
                (Some(b), Sense::Maximize) => b.max(v),
            });
        }
    }
    best
}

fn relation(rng: &mut ChaCha8Rng) -> Relation {
    match rng.random_range(0..10) {
        0..=5 => Relation::LessEq,
        6..=8 => Relation::GreaterEq,
        _ => Relation::Equal,
    }
}

/// Random LP with ≤ 8 variables inside a finite box and ≤ 8 mixed-relation rows.
pub fn random_bounded_lp(seed: u64) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=8);
    let m = rng.random_range(1..=8);
    let sense = if rng.random_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let mut lp = LinearProgram::new(format!("rand{seed}"), sense);
    for j in 0..n {
        let lo = -f64::from(rng.random_range(0..=3));
        let hi = f64::from(rng.random_range(1..=6));
        let c = f64::from(rng.random_range(-5..=5)) + rng.random_range(-0.5..0.5);
        lp.add_var(format!("x{j}"), lo, hi, c);
    }
    for i in 0..m {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                terms.push((j, f64::from(rng.random_range(-5..=5))));
            }
        }
        let rhs = f64::from(rng.random_range(-8..=12));
        let rel = relation(&mut rng);
        lp.add_constraint(format!("r{i}"), terms, rel, rhs);
    }
    lp
}

/// Random pure-binary problem with ≤ `max_binaries` variables.
pub fn random_binary_problem(seed: u64, max_binaries: usize) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_binaries);
    let m = rng.random_range(1..=6);
    let sense = if rng.random_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let mut lp = LinearProgram::new(format!("bin{seed}"), sense);
    for j in 0..n {
        let c = f64::from(rng.random_range(-9..=9)) + rng.random_range(-0.5..0.5);
        lp.add_var(format!("b{j}"), 0.0, 1.0, c);
    }
    for i in 0..m {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                terms.push((j, f64::from(rng.random_range(-4..=6))));
            }
        }
        let rhs = f64::from(rng.random_range(-2..=2 * n as i32));
        let rel = relation(&mut rng);
        lp.add_constraint(format!("r{i}"), terms, rel, rhs);
    }
    lp
}
