//! Problem and solution types shared by the simplex and branch-and-bound solvers.

use crate::error::LpError;
use crate::tolerances::TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    Equal,
    GreaterEq,
}

/// One linear row `Σ coef·x (rel) rhs`, stored sparsely as `(variable, coefficient)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::LessEq => (lhs - self.rhs).max(0.0),
            Relation::GreaterEq => (self.rhs - lhs).max(0.0),
            Relation::Equal => (lhs - self.rhs).abs(),
        }
    }
}

/// A linear program over `n_vars()` continuous variables with simple bounds.
///
/// Bounds may be infinite. `objective_offset` is a constant added to the
/// objective value; it does not influence the argmin.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub name: String,
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub var_names: Vec<String>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        Self {
            name: name.into(),
            sense,
            objective: Vec::new(),
            objective_offset: 0.0,
            lower: Vec::new(),
            upper: Vec::new(),
            var_names: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint { name: name.into(), terms, relation, rhs });
        self.constraints.len() - 1
    }

    /// Objective value of `x`, offset included.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n || self.var_names.len() != n {
            return Err(LpError::Malformed("bound or name vectors differ in length from the objective".into()));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(LpError::Malformed(format!(
                    "variable {} has bounds [{}, {}]",
                    self.var_names[j], self.lower[j], self.upper[j]
                )));
            }
            if !self.objective[j].is_finite() {
                return Err(LpError::Malformed(format!("variable {} has a non-finite cost", self.var_names[j])));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("variable {} has an unattainable bound", self.var_names[j])));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(LpError::Malformed(format!("constraint {} has a non-finite rhs", c.name)));
            }
            for &(j, a) in &c.terms {
                if j >= n {
                    return Err(LpError::Malformed(format!("constraint {} references variable {j} of {n}", c.name)));
                }
                if !a.is_finite() {
                    return Err(LpError::Malformed(format!("constraint {} has a non-finite coefficient", c.name)));
                }
            }
        }
        Ok(())
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max);
        let bounds = (0..self.n_vars())
            .map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// True when `x` meets every row within the feasibility tolerance and every bound within 1e-9.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        let rows_ok = self.constraints.iter().all(|c| c.violation(x) <= TOL.feasibility);
        let bounds_ok = (0..self.n_vars()).all(|j| x[j] >= self.lower[j] - 1e-9 && x[j] <= self.upper[j] + 1e-9);
        rows_ok && bounds_ok
    }
}

/// Variables restricted to {0, 1}.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BinaryMarking {
    pub indices: Vec<usize>,
}

impl BinaryMarking {
    pub fn new(indices: Vec<usize>) -> Self {
        Self { indices }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.contains(&j)
    }

    pub fn validate(&self, problem: &LinearProgram) -> Result<(), LpError> {
        for &j in &self.indices {
            if j >= problem.n_vars() {
                return Err(LpError::Malformed(format!("binary index {j} out of range")));
            }
            if problem.lower[j] < 0.0 || problem.upper[j] > 1.0 {
                return Err(LpError::Malformed(format!(
                    "binary variable {} has bounds outside [0, 1]",
                    problem.var_names[j]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// Branch-and-bound stopped at its node cap; `values` holds the incumbent if one exists.
    NodeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration-limit",
            SolveStatus::NodeLimit => "node-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: SolveStatus,
    /// Objective in the problem's own sense, offset included. NaN when no point is available.
    pub objective: f64,
    pub values: Vec<f64>,
    /// Row duals `y` with `c - yᵀA` the reduced costs, in the problem's own sense.
    /// Empty unless the status is optimal and the solution came from a pure LP.
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// Branch-and-bound nodes processed (0 for a pure LP solve).
    pub nodes: usize,
    /// Best proven bound on the objective (equals `objective` for optimal LPs).
    pub bound: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub(crate) fn without_point(status: SolveStatus, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            duals: Vec::new(),
            iterations,
            nodes: 0,
            bound: f64::NAN,
        }
    }
}
