//! Numerical tolerances used by every solver in this crate.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Row feasibility.
    pub feasibility: f64,
    /// Reduced-cost optimality.
    pub optimality: f64,
    /// Distance from {0, 1} accepted as integral.
    pub integrality: f64,
    /// Smallest pivot magnitude accepted by the ratio test.
    pub pivot: f64,
}

pub const TOL: Tolerances = Tolerances { feasibility: 1e-7, optimality: 1e-9, integrality: 1e-6, pivot: 1e-9 };
