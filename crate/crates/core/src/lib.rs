//! Optimal power flow for radial distribution grids with full Pi-line models.
//!
//! The crate builds the augmented relaxed OPF (AR-OPF) as a second-order cone
//! program, certifies the ex-ante exactness conditions C1-C5 from the grid
//! parameters, and turns any relaxed solution into a physical load flow with
//! the same injections by a fixed-point recovery.
//!
//! Module map:
//!
//! * [`grid`], [`gridfile`]: radial grid model, per-unit conversion, text format
//! * [`matrices`]: `G`, `H`, `B`, `M`, `C`, `D`, `E`, `F` and the bound vectors
//! * [`conditions`]: C1-C5 with margins
//! * [`loadflow`]: backward-forward sweep oracle for the exact power-flow equations
//! * [`opf`]: conic programs (AR-OPF, R-OPF), the solver backend and solutions
//! * [`recovery`]: fixed-point recovery and convergence-envelope checks
//! * [`bench`]: desk-scale experiments (3-bus comparison, sweeps, compression)

pub mod bench;
pub mod conditions;
pub mod data;
pub mod error;
pub mod grid;
pub mod gridfile;
pub mod kvtext;
pub mod loadflow;
pub mod matrices;
pub mod opf;
pub mod recovery;

pub use conditions::{check_all, Condition, ConditionReport};
pub use error::{Error, Result};
pub use grid::{Bus, InjectionSet, Line, PerUnitBase, RadialGrid};
pub use loadflow::{solve_loadflow, LoadFlowState};
pub use matrices::{FlowLimitRule, GridMatrices, OperatingBounds};
pub use opf::{build_ar_opf, build_r_opf, CostModel, OpfSolution, SolveStatus};
pub use recovery::{recover, RecoveryTrace};
