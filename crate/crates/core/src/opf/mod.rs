//! Relaxed OPF models as conic programs, the solver backend and solutions.

pub mod backend;
pub mod cost;
pub mod model;
pub mod program;
pub mod solution;

pub use backend::{Backend, Clarabel, RawSolution, SolveStatus, Tolerances};
pub use cost::CostModel;
pub use model::{build_ar_opf, build_r_opf, tag, ModelKind, ModelOptions, OpfModel};
pub use program::{ConicProgram, LinExpr};
pub use solution::{AuxValues, OpfSolution, GAP_THRESHOLD};

#[cfg(test)]
mod tests;
