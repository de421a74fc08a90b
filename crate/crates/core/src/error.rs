use thiserror::Error;

use crate::feasibility::FeasibilityVerdict;
use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("table function has no entry for belief {0:?}")]
    TableLookup(Vec<f64>),

    #[error("constraint {constraint} evaluates to -inf at belief {belief:?}")]
    NegInfConstraint { constraint: usize, belief: Vec<f64> },

    #[error("grid with {count} atoms exceeds the atom budget of {budget}")]
    AtomBudget { count: u128, budget: u64 },

    #[error("duplicate atom {0:?}")]
    DuplicateAtom(Vec<f64>),

    #[error("atom index {index} out of range for a table of {len} atoms")]
    AtomIndex { index: usize, len: usize },

    #[error("atom {0} has an objective value of -inf and cannot carry weight")]
    ExcludedAtom(usize),

    #[error("plan is infeasible: {0}")]
    InfeasiblePlan(FeasibilityVerdict),

    #[error("lifted plan violates constraint {constraint}: {detail}")]
    Projection { constraint: usize, detail: String },

    #[error("no kernel direction found for {support} atoms (numerical rank {rank})")]
    NumericalRank { support: usize, rank: usize },

    #[error("the prior is not a convex combination of the usable atoms")]
    PriorUnreachable,

    #[error("oracle enumeration of {subsets} subsets exceeds the budget of {budget}")]
    OracleBudget { subsets: u128, budget: u64 },

    #[error("equivalence certification failed: {0}")]
    Certification(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("internal error: {0}")]
    Internal(String),
}
