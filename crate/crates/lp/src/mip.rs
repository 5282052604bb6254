//! Best-first branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::LpError;
use crate::problem::{BinaryMarking, LinearProgram, LpSolution, Sense, SolveStatus};
use crate::simplex::{solve_with_bounds, LpOptions};
use crate::tolerances::TOL;

#[derive(Debug, Clone, PartialEq)]
pub struct MipOptions {
    /// LP relaxations solved before giving up (root and heuristic included).
    pub max_nodes: usize,
    pub lp: LpOptions,
    /// Fix every binary to its rounded root value and solve once for an early incumbent.
    pub rounding_heuristic: bool,
    /// Known feasible point used as the starting incumbent (ignored if infeasible or fractional).
    pub initial_incumbent: Option<Vec<f64>>,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self { max_nodes: 100_000, lp: LpOptions::default(), rounding_heuristic: true, initial_incumbent: None }
    }
}

pub fn solve_mip(problem: &LinearProgram, marking: &BinaryMarking) -> Result<LpSolution, LpError> {
    solve_mip_with(problem, marking, &MipOptions::default())
}

struct Node {
    /// Relaxation objective, always in minimization sense.
    bound: f64,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    branch_on: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Reversed so the max-heap pops the smallest bound, oldest first among ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    problem: &'a LinearProgram,
    marking: &'a BinaryMarking,
    options: &'a MipOptions,
    sign: f64,
    nodes: usize,
    iterations: usize,
    incumbent: Option<(f64, Vec<f64>)>,
}

enum Relaxation {
    Pruned,
    Integral,
    Fractional { branch_on: usize, bound: f64, values: Vec<f64> },
    Stop(SolveStatus),
}

impl Search<'_> {
    fn prune_level(&self) -> f64 {
        match &self.incumbent {
            Some((best, _)) => best - 1e-9 * best.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut pick: Option<(usize, f64)> = None;
        for &j in &self.marking.indices {
            let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
            if frac > TOL.integrality && pick.is_none_or(|(_, f)| frac > f) {
                pick = Some((j, frac));
            }
        }
        pick.map(|(j, _)| j)
    }

    fn relax(&mut self, lower: &[f64], upper: &[f64]) -> Result<Relaxation, LpError> {
        self.nodes += 1;
        let sol = solve_with_bounds(self.problem, lower, upper, &self.options.lp)?;
        self.iterations += sol.iterations;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Ok(Relaxation::Pruned),
            other => return Ok(Relaxation::Stop(other)),
        }
        let bound = self.sign * sol.objective;
        if bound >= self.prune_level() {
            return Ok(Relaxation::Pruned);
        }
        match self.most_fractional(&sol.values) {
            Some(branch_on) => Ok(Relaxation::Fractional { branch_on, bound, values: sol.values }),
            None => {
                let mut x = sol.values;
                for &j in &self.marking.indices {
                    x[j] = x[j].round();
                }
                self.incumbent = Some((bound, x));
                Ok(Relaxation::Integral)
            }
        }
    }

    fn finish(&self, status: SolveStatus, open_bound: f64) -> LpSolution {
        let (objective, values) = match &self.incumbent {
            Some((_, x)) => (self.problem.evaluate(x), x.clone()),
            None => (f64::NAN, Vec::new()),
        };
        let status = match (status, &self.incumbent) {
            (SolveStatus::Optimal, None) => SolveStatus::Infeasible,
            (s, _) => s,
        };
        let bound = match &self.incumbent {
            Some((best, _)) => self.sign * open_bound.min(*best),
            None => self.sign * open_bound,
        };
        LpSolution {
            status,
            objective,
            values,
            duals: Vec::new(),
            iterations: self.iterations,
            nodes: self.nodes,
            bound,
        }
    }
}

/// Branch-and-bound: most fractional binary first (lowest index on ties),
/// children explored in order of their relaxation bound.
pub fn solve_mip_with(
    problem: &LinearProgram,
    marking: &BinaryMarking,
    options: &MipOptions,
) -> Result<LpSolution, LpError> {
    problem.validate()?;
    marking.validate(problem)?;
    if marking.is_empty() {
        return solve_with_bounds(problem, &problem.lower, &problem.upper, &options.lp);
    }
    let mut search = Search {
        problem,
        marking,
        options,
        sign: if problem.sense == Sense::Maximize { -1.0 } else { 1.0 },
        nodes: 0,
        iterations: 0,
        incumbent: None,
    };
    if let Some(x) = &options.initial_incumbent {
        let integral = marking.indices.iter().all(|&j| x[j] == 0.0 || x[j] == 1.0);
        if x.len() == problem.n_vars() && integral && problem.is_feasible(x) {
            search.incumbent = Some((search.sign * problem.evaluate(x), x.clone()));
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let lower = problem.lower.clone();
    let upper = problem.upper.clone();
    match search.relax(&lower, &upper)? {
        Relaxation::Stop(status) => return Ok(LpSolution::without_point(status, search.iterations)),
        Relaxation::Pruned | Relaxation::Integral => return Ok(search.finish(SolveStatus::Optimal, f64::INFINITY)),
        Relaxation::Fractional { branch_on, bound, values } => {
            if options.rounding_heuristic {
                let (mut lo, mut hi) = (lower.clone(), upper.clone());
                for &j in &marking.indices {
                    let v = values[j].round().clamp(lo[j], hi[j]);
                    lo[j] = v;
                    hi[j] = v;
                }
                search.relax(&lo, &hi)?;
            }
            heap.push(Node { bound, seq, lower, upper, branch_on });
            seq += 1;
        }
    }

    while let Some(node) = heap.pop() {
        if node.bound >= search.prune_level() {
            continue;
        }
        if search.nodes >= options.max_nodes {
            let open = heap.iter().map(|n| n.bound).fold(node.bound, f64::min);
            return Ok(search.finish(SolveStatus::NodeLimit, open));
        }
        let j = node.branch_on;
        for value in [0.0, 1.0] {
            let mut lower = node.lower.clone();
            let mut upper = node.upper.clone();
            lower[j] = value;
            upper[j] = value;
            match search.relax(&lower, &upper)? {
                Relaxation::Fractional { branch_on, bound, .. } => {
                    heap.push(Node { bound, seq, lower, upper, branch_on });
                    seq += 1;
                }
                Relaxation::Stop(status) => return Ok(search.finish(status, node.bound)),
                Relaxation::Pruned | Relaxation::Integral => {}
            }
        }
    }
    Ok(search.finish(SolveStatus::Optimal, f64::INFINITY))
}
