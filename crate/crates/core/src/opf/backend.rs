//! Solver backends. The crate ships a Clarabel binding; other solvers can
//! implement [`Backend`] or consume [`ConicProgram::to_json`].

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use serde::{Deserialize, Serialize};

use super::program::{ConeKind, ConicProgram};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical-failure",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Accepted primal residual of the returned point.
    pub feas_tol: f64,
    /// Accepted relative duality gap.
    pub gap_tol: f64,
    pub max_iter: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feas_tol: 1e-8, gap_tol: 1e-8, max_iter: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Largest row/cone violation at `x`, evaluated on the program itself.
    pub primal_residual: f64,
    pub iterations: u32,
    pub solve_time: f64,
    /// Backend-specific status text.
    pub detail: String,
}

pub trait Backend {
    fn solve(&self, program: &ConicProgram, tol: &Tolerances) -> RawSolution;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Clarabel;

impl Backend for Clarabel {
    fn solve(&self, program: &ConicProgram, tol: &Tolerances) -> RawSolution {
        let n = program.n_vars();
        let (a, b, cones) = assemble(program);
        let mut p_rows = Vec::new();
        let mut p_vals = Vec::new();
        for &(i, c) in &program.quadratic {
            p_rows.push(i);
            p_vals.push(2.0 * c);
        }
        let p = CscMatrix::new_from_triplets(n, n, p_rows.clone(), p_rows, p_vals);
        let mut q = vec![0.0; n];
        for &(i, c) in &program.objective {
            q[i] += c;
        }
        let inner = (tol.feas_tol * 1e-2).max(1e-12);
        let settings = DefaultSettings {
            verbose: false,
            max_iter: tol.max_iter,
            tol_feas: inner,
            tol_gap_abs: inner,
            tol_gap_rel: (tol.gap_tol * 1e-2).max(1e-12),
            ..DefaultSettings::default()
        };
        let failed = |detail: String| RawSolution {
            status: SolveStatus::NumericalFailure,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            primal_residual: f64::INFINITY,
            iterations: 0,
            solve_time: 0.0,
            detail,
        };
        let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
            Ok(s) => s,
            Err(e) => return failed(format!("setup failed: {e}")),
        };
        solver.solve();
        let sol = &solver.solution;
        let x = sol.x.clone();
        let residual = if x.iter().all(|v| v.is_finite()) { program.primal_residual(&x) } else { f64::INFINITY };
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved if residual <= tol.feas_tol => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::NumericalFailure,
        };
        let status = if status == SolveStatus::Optimal && residual > tol.feas_tol {
            SolveStatus::NumericalFailure
        } else {
            status
        };
        RawSolution {
            status,
            objective: program.objective_value(&x),
            x,
            primal_residual: residual,
            iterations: sol.iterations,
            solve_time: sol.solve_time,
            detail: format!("{:?}", sol.status),
        }
    }
}

/// Stacks `A x + s = b` with `s` in zero, nonnegative and SOC blocks.
fn assemble(program: &ConicProgram) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
    let n = program.n_vars();
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut b = Vec::new();
    let mut push = |expr: &super::program::LinExpr, scale: f64, rows: &mut Vec<usize>, b: &mut Vec<f64>| {
        let r = b.len();
        for &(i, c) in &expr.terms {
            rows.push(r);
            cols.push(i);
            vals.push(-c * scale);
        }
        b.push(expr.constant * scale);
    };
    let mut cones = Vec::new();
    for row in &program.equalities {
        push(&row.expr, 1.0, &mut rows, &mut b);
    }
    if !program.equalities.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(program.equalities.len()));
    }
    for row in &program.inequalities {
        push(&row.expr, 1.0, &mut rows, &mut b);
    }
    if !program.inequalities.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(program.inequalities.len()));
    }
    for cone in &program.cones {
        match cone.kind {
            ConeKind::SecondOrder => {
                for e in &cone.exprs {
                    push(e, 1.0, &mut rows, &mut b);
                }
            }
            ConeKind::Rotated => {
                let (x, y) = (&cone.exprs[0], &cone.exprs[1]);
                push(&x.clone().plus(y, 1.0), 1.0, &mut rows, &mut b);
                push(&x.clone().plus(y, -1.0), 1.0, &mut rows, &mut b);
                for z in &cone.exprs[2..] {
                    push(z, 2.0, &mut rows, &mut b);
                }
            }
        }
        cones.push(SupportedConeT::SecondOrderConeT(cone.dim()));
    }
    let m = b.len();
    (CscMatrix::new_from_triplets(m, n, rows, cols, vals), b, cones)
}

#[cfg(test)]
mod tests {
    use super::super::program::LinExpr;
    use super::*;

    #[test]
    fn small_socp() {
        // minimize t subject to t >= ||(x - 1, y - 2)||, x + y = 1
        let mut p = ConicProgram::default();
        let t = p.add_var("t");
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.eq0("sum", LinExpr::var(x).add(1.0, y).offset(-1.0));
        p.soc("norm", LinExpr::var(t), vec![LinExpr::var(x).offset(-1.0), LinExpr::var(y).offset(-2.0)]);
        p.objective.push((t, 1.0));
        let sol = Clarabel.solve(&p, &Tolerances::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[t] - 2f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn rotated_cone_minimum() {
        // minimize a + b subject to a b >= 1
        let mut p = ConicProgram::default();
        let a = p.add_var("a");
        let b = p.add_var("b");
        p.rotated("rc", LinExpr::var(a), LinExpr::var(b), vec![LinExpr::constant(1.0)]);
        p.objective.extend([(a, 1.0), (b, 1.0)]);
        let sol = Clarabel.solve(&p, &Tolerances::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = ConicProgram::default();
        let x = p.add_var("x");
        p.ge0("lo", LinExpr::var(x).offset(-2.0));
        p.ge0("hi", LinExpr::constant(1.0).add(-1.0, x));
        assert_eq!(Clarabel.solve(&p, &Tolerances::default()).status, SolveStatus::Infeasible);

        let mut p = ConicProgram::default();
        let x = p.add_var("x");
        p.ge0("hi", LinExpr::constant(1.0).add(-1.0, x));
        p.objective.push((x, 1.0));
        assert_eq!(Clarabel.solve(&p, &Tolerances::default()).status, SolveStatus::Unbounded);
    }

    #[test]
    fn quadratic_objective() {
        let mut p = ConicProgram::default();
        let x = p.add_var("x");
        p.objective.push((x, -2.0));
        p.quadratic.push((x, 1.0));
        let sol = Clarabel.solve(&p, &Tolerances::default());
        assert!((sol.x[x] - 1.0).abs() < 1e-7);
    }
}
