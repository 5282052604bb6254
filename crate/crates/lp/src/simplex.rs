//! Two-phase bounded-variable revised simplex.
//!
//! Every row `i` gets a logical column `s_i` so that `A x + s = b`, with the
//! slack bounds encoding the relation (`≤`: `s ≥ 0`, `≥`: `s ≤ 0`, `=`: `s = 0`).
//! Rows whose slack cannot absorb the starting residual receive an artificial
//! column, and phase one minimizes the sum of artificials. The basis inverse
//! is kept explicitly and updated by elementary row operations that skip zero
//! entries, which keeps the time-staged dispatch models cheap to pivot.

use crate::error::LpError;
use crate::problem::{LinearProgram, LpSolution, Relation, Sense, SolveStatus};
use crate::tolerances::TOL;

#[derive(Debug, Clone, PartialEq)]
pub struct LpOptions {
    /// Pivot cap; `None` means `50 · (n_vars + n_constraints)`.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before Bland's rule takes over.
    pub stall_threshold: usize,
    /// Pivots between fresh factorizations of the basis inverse.
    pub refactor_interval: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { max_iterations: None, stall_threshold: 50, refactor_interval: 200 }
    }
}

impl LpOptions {
    pub fn iteration_cap(&self, problem: &LinearProgram) -> usize {
        self.max_iterations.unwrap_or(50 * (problem.n_vars() + problem.n_constraints()))
    }
}

pub fn solve_lp(problem: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(problem, &LpOptions::default())
}

pub fn solve_lp_with(problem: &LinearProgram, options: &LpOptions) -> Result<LpSolution, LpError> {
    problem.validate()?;
    solve_with_bounds(problem, &problem.lower, &problem.upper, options)
}

/// Solves `problem` with its variable bounds replaced by `lower`/`upper`.
pub(crate) fn solve_with_bounds(
    problem: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    options: &LpOptions,
) -> Result<LpSolution, LpError> {
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Ok(LpSolution::without_point(SolveStatus::Infeasible, 0));
    }
    let mut tableau = Simplex::new(problem, lower, upper, options);
    let phase_one = tableau.run()?;
    if phase_one == Outcome::IterationLimit {
        return Ok(LpSolution::without_point(SolveStatus::IterationLimit, tableau.iterations));
    }
    let infeasibility: f64 = tableau.artificial_sum();
    if infeasibility > TOL.feasibility * (1.0 + tableau.rhs_scale) {
        return Ok(LpSolution::without_point(SolveStatus::Infeasible, tableau.iterations));
    }
    tableau.enter_phase_two(problem);
    let status = match tableau.run()? {
        Outcome::Optimal => SolveStatus::Optimal,
        Outcome::Unbounded => SolveStatus::Unbounded,
        Outcome::IterationLimit => SolveStatus::IterationLimit,
    };
    if status != SolveStatus::Optimal {
        return Ok(LpSolution::without_point(status, tableau.iterations));
    }
    let values = tableau.x[..problem.n_vars()].to_vec();
    let objective = problem.evaluate(&values);
    let sign = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let duals = tableau.y.iter().map(|&v| sign * v).collect();
    Ok(LpSolution {
        status,
        objective,
        values,
        duals,
        iterations: tableau.iterations,
        nodes: 0,
        bound: objective,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at zero.
    Zero,
}

struct Simplex {
    m: usize,
    n_structural: usize,
    first_artificial: usize,
    /// Sparse columns for structurals, slacks and artificials alike.
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    rhs_scale: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    /// Row-major `m × m` basis inverse.
    binv: Vec<f64>,
    y: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
    stall_threshold: usize,
    refactor_interval: usize,
    since_refactor: usize,
}

impl Simplex {
    fn new(problem: &LinearProgram, lower: &[f64], upper: &[f64], options: &LpOptions) -> Self {
        let m = problem.n_constraints();
        let n = problem.n_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in problem.constraints.iter().enumerate() {
            for &(j, a) in &row.terms {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
        }
        // Merge duplicate entries so each column lists a row at most once.
        for col in &mut cols {
            col.sort_by_key(|&(i, _)| i);
            col.dedup_by(|next, prev| {
                if next.0 == prev.0 {
                    prev.1 += next.1;
                    true
                } else {
                    false
                }
            });
            col.retain(|&(_, a)| a != 0.0);
        }
        let rhs: Vec<f64> = problem.constraints.iter().map(|c| c.rhs).collect();
        let rhs_scale = rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        let mut x = vec![0.0; n];
        let mut status = vec![Status::AtLower; n];
        for j in 0..n {
            (x[j], status[j]) = if lo[j].is_finite() {
                (lo[j], Status::AtLower)
            } else if hi[j].is_finite() {
                (hi[j], Status::AtUpper)
            } else {
                (0.0, Status::Zero)
            };
        }

        // Residual each logical must absorb.
        let mut residual = rhs.clone();
        for (j, col) in cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    residual[i] -= a * x[j];
                }
            }
        }

        let mut basis = vec![0; m];
        for (i, row) in problem.constraints.iter().enumerate() {
            let (slo, shi) = match row.relation {
                Relation::LessEq => (0.0, f64::INFINITY),
                Relation::GreaterEq => (f64::NEG_INFINITY, 0.0),
                Relation::Equal => (0.0, 0.0),
            };
            cols.push(vec![(i, 1.0)]);
            lo.push(slo);
            hi.push(shi);
            x.push(0.0);
            status.push(Status::AtLower);
        }
        let first_artificial = n + m;
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            let slack = n + i;
            let r = residual[i];
            if r >= lo[slack] && r <= hi[slack] {
                x[slack] = r;
                status[slack] = Status::Basic;
                basis[i] = slack;
                binv[i * m + i] = 1.0;
            } else {
                let parked = if r < lo[slack] { lo[slack] } else { hi[slack] };
                x[slack] = parked;
                status[slack] = if parked == lo[slack] { Status::AtLower } else { Status::AtUpper };
                let gap = r - parked;
                let sign = if gap >= 0.0 { 1.0 } else { -1.0 };
                cols.push(vec![(i, sign)]);
                lo.push(0.0);
                hi.push(f64::INFINITY);
                x.push(gap.abs());
                status.push(Status::Basic);
                basis[i] = cols.len() - 1;
                binv[i * m + i] = sign;
            }
        }
        let total = cols.len();
        let mut cost = vec![0.0; total];
        for c in cost.iter_mut().skip(first_artificial) {
            *c = 1.0;
        }
        let mut simplex = Self {
            m,
            n_structural: n,
            first_artificial,
            cols,
            rhs,
            rhs_scale,
            lo,
            hi,
            cost,
            x,
            status,
            basis,
            binv,
            y: vec![0.0; m],
            iterations: 0,
            max_iterations: options.iteration_cap(problem),
            stall_threshold: options.stall_threshold,
            refactor_interval: options.refactor_interval.max(1),
            since_refactor: 0,
        };
        simplex.recompute_duals();
        simplex
    }

    fn artificial_sum(&self) -> f64 {
        self.x[self.first_artificial..].iter().sum()
    }

    fn enter_phase_two(&mut self, problem: &LinearProgram) {
        let sign = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };
        for c in self.cost.iter_mut() {
            *c = 0.0;
        }
        for j in 0..self.n_structural {
            self.cost[j] = sign * problem.objective[j];
        }
        for j in self.first_artificial..self.cols.len() {
            self.hi[j] = 0.0;
            if self.status[j] != Status::Basic {
                self.x[j] = 0.0;
                self.status[j] = Status::AtLower;
            }
        }
        self.recompute_duals();
    }

    fn recompute_duals(&mut self) {
        let m = self.m;
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..m {
            let cb = self.cost[self.basis[k]];
            if cb != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, &b) in self.y.iter_mut().zip(row) {
                    *yi += cb * b;
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cost[j] - self.cols[j].iter().map(|&(i, a)| self.y[i] * a).sum::<f64>()
    }

    /// Chooses an entering column and its direction of motion.
    fn price(&self, bland: bool) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols.len() {
            let dir = match self.status[j] {
                Status::Basic => continue,
                _ if self.hi[j] <= self.lo[j] => continue,
                Status::AtLower => {
                    let d = self.reduced_cost(j);
                    if d < -TOL.optimality {
                        (1.0, d)
                    } else {
                        continue;
                    }
                }
                Status::AtUpper => {
                    let d = self.reduced_cost(j);
                    if d > TOL.optimality {
                        (-1.0, d)
                    } else {
                        continue;
                    }
                }
                Status::Zero => {
                    let d = self.reduced_cost(j);
                    if d.abs() > TOL.optimality {
                        (-d.signum(), d)
                    } else {
                        continue;
                    }
                }
            };
            if bland {
                return Some((j, dir.0, dir.1));
            }
            if best.is_none_or(|(_, _, bd)| dir.1.abs() > bd.abs()) {
                best = Some((j, dir.0, dir.1));
            }
        }
        best
    }

    fn entering_column(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(i, a) in &self.cols[q] {
            for (k, al) in alpha.iter_mut().enumerate() {
                let b = self.binv[k * m + i];
                if b != 0.0 {
                    *al += b * a;
                }
            }
        }
        alpha
    }

    /// Two-pass ratio test. Returns the blocking row, or `None` when no basic variable limits the step.
    fn ratio_test(&self, alpha: &[f64], dir: f64, bland: bool) -> Option<(usize, f64)> {
        let limit = |k: usize, slack: f64| -> Option<f64> {
            let a = alpha[k];
            if a.abs() <= TOL.pivot {
                return None;
            }
            let b = self.basis[k];
            let rate = -dir * a;
            if rate < 0.0 && self.lo[b].is_finite() {
                Some(((self.x[b] - self.lo[b] + slack) / -rate).max(0.0))
            } else if rate > 0.0 && self.hi[b].is_finite() {
                Some(((self.hi[b] - self.x[b] + slack) / rate).max(0.0))
            } else {
                None
            }
        };
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for k in 0..self.m {
                if let Some(t) = limit(k, 0.0) {
                    let better = match best {
                        None => true,
                        Some((bk, bt)) => t < bt - 1e-12 || (t <= bt + 1e-12 && self.basis[k] < self.basis[bk]),
                    };
                    if better {
                        best = Some((k, t));
                    }
                }
            }
            return best;
        }
        let relaxed = (0..self.m).filter_map(|k| limit(k, TOL.feasibility)).fold(f64::INFINITY, f64::min);
        if !relaxed.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for k in 0..self.m {
            if let Some(t) = limit(k, 0.0) {
                if t <= relaxed && best.is_none_or(|(bk, _)| alpha[k].abs() > alpha[bk].abs()) {
                    best = Some((k, t));
                }
            }
        }
        best
    }

    fn run(&mut self) -> Result<Outcome, LpError> {
        let mut degenerate_run = 0usize;
        let mut fresh = false;
        loop {
            let bland = degenerate_run > self.stall_threshold;
            let Some((q, dir, d_q)) = self.price(bland) else {
                if fresh {
                    return Ok(Outcome::Optimal);
                }
                self.refactor()?;
                fresh = true;
                continue;
            };
            if self.iterations >= self.max_iterations {
                return Ok(Outcome::IterationLimit);
            }
            self.iterations += 1;
            fresh = false;

            let alpha = self.entering_column(q);
            let flip = self.hi[q] - self.lo[q];
            let blocking = self.ratio_test(&alpha, dir, bland);
            let step = match blocking {
                Some((_, t)) if t < flip => t,
                _ if flip.is_finite() => flip,
                _ => return Ok(Outcome::Unbounded),
            };

            if step * d_q.abs() <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            for (k, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[k]] -= dir * step * a;
                }
            }
            self.x[q] += dir * step;

            match blocking {
                Some((r, t)) if t < flip => self.pivot(q, r, -dir * alpha[r] < 0.0, &alpha, d_q),
                _ => {
                    // Bound flip: the entering variable crosses to its other bound, basis unchanged.
                    if dir > 0.0 {
                        self.x[q] = self.hi[q];
                        self.status[q] = Status::AtUpper;
                    } else {
                        self.x[q] = self.lo[q];
                        self.status[q] = Status::AtLower;
                    }
                }
            }

            self.since_refactor += 1;
            if self.since_refactor >= self.refactor_interval {
                self.refactor()?;
            }
        }
    }

    fn pivot(&mut self, q: usize, r: usize, to_lower: bool, alpha: &[f64], d_q: f64) {
        let m = self.m;
        let leaving = self.basis[r];
        // Snap the leaving variable onto the bound it reached.
        if to_lower {
            self.x[leaving] = self.lo[leaving];
            self.status[leaving] = Status::AtLower;
        } else {
            self.x[leaving] = self.hi[leaving];
            self.status[leaving] = Status::AtUpper;
        }

        let ar = alpha[r];
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].iter().map(|v| v / ar).collect();
        let nz: Vec<usize> = (0..m).filter(|&j| pivot_row[j] != 0.0).collect();
        for (i, &f) in alpha.iter().enumerate() {
            if i == r || f == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for &j in &nz {
                row[j] -= f * pivot_row[j];
            }
        }
        self.binv[r * m..(r + 1) * m].copy_from_slice(&pivot_row);
        for &j in &nz {
            self.y[j] += d_q * pivot_row[j];
        }
        self.basis[r] = q;
        self.status[q] = Status::Basic;
    }

    /// Rebuilds the basis inverse from scratch and recomputes basic values and duals.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        // Gauss-Jordan on [B | I] with partial pivoting, skipping zero entries.
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        // Row permutation is implicit: after elimination row `p` of `a` is e_col.
        let mut row_of_col = vec![usize::MAX; m];
        let mut used = vec![false; m];
        for col in 0..m {
            let mut piv = usize::MAX;
            let mut best = 0.0;
            for i in 0..m {
                if !used[i] {
                    let v = a[i * m + col].abs();
                    if v > best {
                        best = v;
                        piv = i;
                    }
                }
            }
            if piv == usize::MAX || best < 1e-11 {
                return Err(LpError::Numerical(format!("singular basis at column {col}")));
            }
            used[piv] = true;
            row_of_col[col] = piv;
            let p = a[piv * m + col];
            let a_nz: Vec<usize> = (0..m).filter(|&j| a[piv * m + j] != 0.0).collect();
            let i_nz: Vec<usize> = (0..m).filter(|&j| inv[piv * m + j] != 0.0).collect();
            for &j in &a_nz {
                a[piv * m + j] /= p;
            }
            for &j in &i_nz {
                inv[piv * m + j] /= p;
            }
            for i in 0..m {
                if i == piv {
                    continue;
                }
                let f = a[i * m + col];
                if f == 0.0 {
                    continue;
                }
                for &j in &a_nz {
                    a[i * m + j] -= f * a[piv * m + j];
                }
                for &j in &i_nz {
                    inv[i * m + j] -= f * inv[piv * m + j];
                }
                a[i * m + col] = 0.0;
            }
        }
        // B⁻¹ row k corresponds to basis position k, which is the pivot row chosen for column k.
        for k in 0..m {
            let src = row_of_col[k];
            self.binv[k * m..(k + 1) * m].copy_from_slice(&inv[src * m..(src + 1) * m]);
        }

        let mut residual = self.rhs.clone();
        for j in 0..self.cols.len() {
            if self.status[j] != Status::Basic && self.x[j] != 0.0 {
                for &(i, v) in &self.cols[j] {
                    residual[i] -= v * self.x[j];
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            self.x[self.basis[k]] = row.iter().zip(&residual).map(|(b, r)| b * r).sum();
        }
        self.recompute_duals();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Relation::*;

    fn two_var() -> LinearProgram {
        let mut lp = LinearProgram::new("t", Sense::Minimize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint("a", vec![(x, 1.0), (y, 2.0)], GreaterEq, 4.0);
        lp.add_constraint("b", vec![(x, 3.0), (y, 1.0)], GreaterEq, 6.0);
        lp
    }

    #[test]
    fn maximize_single_bounded_variable() {
        let mut lp = LinearProgram::new("t", Sense::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint("cap", vec![(x, 1.0)], LessEq, 5.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.values[0] - 5.0).abs() < 1e-9);
        assert!((sol.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn two_variable_vertex() {
        let sol = solve_lp(&two_var()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.values[0] - 1.6).abs() < 1e-9);
        assert!((sol.values[1] - 1.2).abs() < 1e-9);
        assert!((sol.objective - 2.8).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LinearProgram::new("t", Sense::Minimize);
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_constraint("le", vec![(x, 1.0)], LessEq, 1.0);
        lp.add_constraint("ge", vec![(x, 1.0)], GreaterEq, 2.0);
        assert_eq!(solve_lp(&lp).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray_detected() {
        let mut lp = LinearProgram::new("t", Sense::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 0.0);
        lp.add_constraint("r", vec![(x, 1.0), (y, -1.0)], LessEq, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, SolveStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min |x - 3| style: x free, x = 3 - z, z in [-1, 1] → minimize x
        let mut lp = LinearProgram::new("t", Sense::Minimize);
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let z = lp.add_var("z", -1.0, 1.0, 0.0);
        lp.add_constraint("e", vec![(x, 1.0), (z, 1.0)], Equal, 3.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.values[x] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_reported() {
        let sol = solve_lp_with(&two_var(), &LpOptions { max_iterations: Some(0), ..Default::default() }).unwrap();
        assert_eq!(sol.status, SolveStatus::IterationLimit);
    }

    #[test]
    fn bound_flip_only_problem() {
        let mut lp = LinearProgram::new("t", Sense::Maximize);
        lp.add_var("x", -2.0, 7.0, 1.0);
        lp.add_var("y", -2.0, 7.0, -1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.values, vec![7.0, -2.0]);
        assert_eq!(sol.objective, 9.0);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic Beale cycling example under Dantzig's rule without anti-cycling.
        let mut lp = LinearProgram::new("beale", Sense::Minimize);
        let x: Vec<usize> = [-0.75, 150.0, -0.02, 6.0]
            .iter()
            .enumerate()
            .map(|(i, &c)| lp.add_var(format!("x{i}"), 0.0, f64::INFINITY, c))
            .collect();
        lp.add_constraint("r1", vec![(x[0], 0.25), (x[1], -60.0), (x[2], -0.04), (x[3], 9.0)], LessEq, 0.0);
        lp.add_constraint("r2", vec![(x[0], 0.5), (x[1], -90.0), (x[2], -0.02), (x[3], 3.0)], LessEq, 0.0);
        lp.add_constraint("r3", vec![(x[2], 1.0)], LessEq, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 0.05).abs() < 1e-9);
    }
}
