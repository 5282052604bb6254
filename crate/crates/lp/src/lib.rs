//! A self-contained linear-programming kernel.
//!
//! [`solve_lp`] is a two-phase bounded-variable revised simplex over a dense
//! explicit basis inverse, with a Bland's-rule fallback once pivoting stalls.
//! [`solve_mip`] runs best-first branch-and-bound over variables restricted to
//! {0, 1}. [`lp_format`] reads and writes the human-readable LP text format
//! understood by mainstream external solvers.

mod error;
pub mod lp_format;
mod mip;
mod problem;
mod simplex;
pub mod tolerances;

pub use error::LpError;
pub use mip::{solve_mip, solve_mip_with, MipOptions};
pub use problem::{BinaryMarking, Constraint, LinearProgram, LpSolution, Relation, Sense, SolveStatus};
pub use simplex::{solve_lp, solve_lp_with, LpOptions};
