//! Small mixed-integer linear programming toolkit.
//!
//! A sparse bounded-variable revised simplex ([`solve_lp`]), a best-bound
//! branch-and-bound on top of it ([`solve_milp`]) and MPS/LP text formats so
//! models can be handed to other solvers for cross-checking.

mod error;
mod lp_format;
mod lu;
mod milp;
mod mps;
mod problem;
mod simplex;

pub use error::{MpsError, ProblemError};
pub use lp_format::lp_string;
pub use milp::{relative_gap, solve_milp, MilpOutcome, MilpStatus, NodeRecord, SolveParams};
pub use mps::{mps_string, parse_mps, write_mps};
pub use problem::{Constraint, MilpProblem, RowBounds, RowId, VarId, VarKind, Variable};
pub use simplex::{solve_lp, BasisSnapshot, LpOptions, LpSolution, LpSolver, LpStatus, VarStatus};
