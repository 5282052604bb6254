//! PV and battery co-design: shared economics, data, the dispatch MDP, the
//! perfect-foresight MILP and joint design-and-policy search.

pub mod bench;
pub mod config;
pub mod data;
pub mod deps;
pub mod env;
pub mod error;
pub mod milp;
pub mod params;

pub use error::{CoreError, Result};
pub use params::{CostBreakdown, DesignPoint, SystemParameters};
