//! Per-operator resource allocation with delay-constrained (DC) and
//! non-delay-constrained (NDC) users.
//!
//! [`linearize`] turns an [`IntraInstance`] into a [`ConvexMIModel`],
//! [`branch_and_bound`] solves that model to binary optimality, and
//! [`oracle_exhaustive`] gives ground truth by enumeration for small
//! instances.

mod bnb;
mod check;
mod instance;
mod model;
mod oracle;
mod relax;
pub mod waterfill;

use thiserror::Error;

pub use bnb::{branch_and_bound, branch_and_bound_with, BnbOptions, BnbReport, NodeRecord, NodeStatus};
pub use check::{check_solution, CheckReport, TighteningProbe};
pub use instance::{build_instance, ndc_sum_rate, IntraInstance, IntraSolution, SolverStats};
pub use model::{
    linearize, ConstraintTag, ConvexMIModel, GeoMeanConstraint, LinearConstraint, ModelResiduals, Sense, VarKind,
    XI_FLOOR,
};
pub use oracle::{oracle_exhaustive, oracle_power_split, oracle_table, PowerSplit, ORACLE_LIMIT};
pub use relax::{solve_relaxation, Fix, RelaxedSolution, Relaxation};
pub use waterfill::{total_rate, waterfill_level, waterfill_max_rate, waterfill_min_power};

#[derive(Debug, Error, PartialEq)]
pub enum IntraopError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("user {user} is an NDC user but has a DC target")]
    NdcTarget { user: usize },
    #[error("infeasible: the DC targets cannot be met within the power budget")]
    Infeasible,
    #[error("{assignments} assignments exceed the enumeration limit of {limit}")]
    TooLarge { assignments: f64, limit: f64 },
    #[error("solver failure: {0}")]
    SolverFailure(String),
}

#[cfg(test)]
mod tests;
