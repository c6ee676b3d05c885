//! Internal LP/MILP machinery behind the dispatch and shutoff planners.
//!
//! Models are described once through [`Model`] (variables with bounds,
//! range rows, binary flags, warm-start hints) and solved either as a
//! pure LP by the bounded-variable simplex or as a MILP by
//! branch-and-bound over the LP relaxation. The description layer keeps
//! solver backends swappable.

mod branch_bound;
mod model;
mod simplex;

pub use branch_bound::{solve_milp, MilpOptions, MilpSolution};
pub use model::{Model, VarId};
pub use simplex::{solve_lp, LpOutcome, LpSolution};
