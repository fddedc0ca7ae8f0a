//! Brute-force reference solvers for tests. Slow on purpose and never used
//! by the main solve path.

mod small_instance;
mod subproblem;

pub use small_instance::{oracle_small_instance, SmallInstanceOptions, SmallInstanceOracle};
pub use subproblem::{oracle_subproblem, GridSpec, OracleMode, OracleSubproblem};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("power grid outgrew {upper}; the objective looks unbounded")]
    Unbounded { upper: f64 },
    #[error("invalid grid: {0}")]
    BadGrid(&'static str),
    #[error("instance too large for enumeration: {subcarriers} subcarriers, {pu_pairs} PU pairs, {sus} SUs")]
    TooLarge { subcarriers: usize, pu_pairs: usize, sus: usize },
}
