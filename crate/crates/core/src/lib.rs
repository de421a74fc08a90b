//! Constrained concavification on a simplex grid.
//!
//! A designer splits a prior belief into posteriors that average back to it,
//! maximizing the expected objective subject to expectation constraints on
//! the posteriors. Beliefs are discretized on a grid, the problem becomes a
//! linear program over atom weights, and optimal plans can be thinned to the
//! smallest support the constraints allow.
//!
//! ```
//! use cavsolve::{solve_constrained, AtomTable, Belief, FunctionSpec, ProblemSpec};
//!
//! let problem = ProblemSpec::with_default_states(
//!     Belief::new(vec![0.7, 0.3]).unwrap(),
//!     FunctionSpec::indicator(1, 0.5, 1.0, 0.0),
//!     vec![],
//! )
//! .unwrap();
//! let table = AtomTable::grid(&problem, 10, cavsolve::grid::DEFAULT_ATOM_BUDGET).unwrap();
//! let report = solve_constrained(&problem, &table).unwrap();
//! assert!((report.value.finite().unwrap() - 0.6).abs() < 1e-12);
//! ```

pub mod caratheodory;
pub mod concavify;
pub mod error;
pub mod ext;
pub mod feasibility;
pub mod function;
pub mod grid;
pub mod lifting;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod tol;

pub use caratheodory::{binding_report, reduce_support, reduce_support_slack, BindingReport, SlackReduction};
pub use concavify::{evaluate_extended, solve_constrained, solve_unconstrained, threshold_range};
pub use error::{Error, Result};
pub use ext::ExtReal;
pub use feasibility::{check_plan_feasibility, FeasibilityVerdict, Violation};
pub use function::{AffinePiece, FunctionSpec, TableFn};
pub use grid::{simplex_grid, tabulate, AtomTable};
pub use lifting::{lift_plan, project_plan, verify_equivalence, EquivalenceReport};
pub use lp::{solve_lp, LinearProgram, LpError, LpSolution, LpStatus};
pub use model::{
    Atom, Belief, ConstraintDiagnostic, ConstraintKind, ConstraintSpec, LiftedPlan, PlanEntry, ProblemSpec,
    SolveReport, SolveStatus, SplittingPlan, ThresholdRange,
};
pub use oracle::{brute_force_value, random_problem, BruteForceResult};
