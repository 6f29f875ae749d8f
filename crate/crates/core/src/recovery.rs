//! Fixed-point recovery of a load flow from a relaxed OPF point with the same
//! injections, and the per-iteration checks of its convergence envelope.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::loadflow::{self, check_operational, LoadFlowState, Violation};
use crate::matrices::GridMatrices;
use crate::opf::{AuxValues, OpfSolution, GAP_THRESHOLD};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200;
/// Consecutive growing updates that count as divergence.
pub const GROWTH_LIMIT: usize = 10;
/// Agreement required between the recovered point and the load-flow oracle.
pub const ORACLE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    /// Stop once the largest change in `f` is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// One iterate of the recovery map. `qc` is the reactive flow through the
/// series element, `Q + b v_up`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub f: Vec<f64>,
    pub p: Vec<f64>,
    pub qc: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTrace {
    /// Iterates for n = 0..=N; entry 0 is the input point.
    pub iterates: Vec<Iterate>,
    /// Euclidean norm of `f(n) - f(n-1)` for n = 1..=N.
    pub delta_f_norms: Vec<f64>,
    pub converged: bool,
    /// Recovered point with the rebuilt upper-bound system. The objective is
    /// left as NaN since it depends on the cost model.
    pub recovered: OpfSolution,
    /// Largest relaxation gap at the recovered point.
    pub final_gap: f64,
}

impl RecoveryTrace {
    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }

    /// CSV with one row per iteration: n, ||df||_2, ||df||_inf, max v.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,delta_f_norm,delta_f_max,v_max,v_min\n");
        for (n, it) in self.iterates.iter().enumerate() {
            let (dn, dm) = if n == 0 {
                (0.0, 0.0)
            } else {
                (self.delta_f_norms[n - 1], max_abs_diff(&it.f, &self.iterates[n - 1].f))
            };
            let vmax = it.v.iter().cloned().fold(f64::MIN, f64::max);
            let vmin = it.v.iter().cloned().fold(f64::MAX, f64::min);
            out.push_str(&format!("{n},{dn:e},{dm:e},{vmax},{vmin}\n"));
        }
        out
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn norm2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Lossless lower-bound flows and upper-bound voltages for the injections:
/// `(P_low, Q_low, v_up)`. This system is linear in the injections.
pub fn lossless_bounds(grid: &RadialGrid, s: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = grid.len();
    let p_low: Vec<f64> = (0..n).map(|l| grid.subtree(l).iter().map(|&m| s[m].0).sum()).collect();
    // unknowns: Q_low (0..n) and v_up (n..2n)
    let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut rhs = DVector::<f64>::zeros(2 * n);
    for (l, line) in grid.lines.iter().enumerate() {
        let (r, x, b) = (line.r, line.x, line.b);
        a[(l, l)] = 1.0;
        for &m in grid.children(l) {
            a[(l, m)] -= 1.0;
        }
        a[(l, n + l)] += b;
        rhs[l] = s[l].1;
        let row = n + l;
        a[(row, n + l)] = 1.0;
        a[(row, l)] += 2.0 * x;
        rhs[row] = -2.0 * r * p_low[l];
        match grid.parent(l) {
            Some(k) => {
                a[(l, n + k)] += b;
                a[(row, n + k)] += -1.0 + 2.0 * x * b;
            }
            None => {
                rhs[l] -= b * grid.v0;
                rhs[row] += grid.v0 * (1.0 - 2.0 * x * b);
            }
        }
    }
    let sol = a.lu().solve(&rhs).ok_or_else(|| Error::InvalidInput("lossless flow system is singular".into()))?;
    Ok((p_low, sol.rows(0, n).iter().cloned().collect(), sol.rows(n, n).iter().cloned().collect()))
}

fn v_up_of(grid: &RadialGrid, v: &[f64], l: usize) -> f64 {
    grid.v_up(v, l)
}

/// Runs the recovery map from a relaxed solution. The lower-bound system is
/// taken from the solution when present and rebuilt from the injections
/// otherwise.
pub fn recover(
    solution: &OpfSolution,
    grid: &RadialGrid,
    matrices: &GridMatrices,
    opts: &RecoveryOptions,
) -> Result<RecoveryTrace> {
    let n = grid.len();
    if matrices.len() != n || solution.f.len() != n {
        return Err(Error::InvalidInput("solution, grid and matrices disagree in size".into()));
    }
    let s = solution.injections();
    let (p_low, q_low, v_bar) = match &solution.aux {
        Some(a) => (a.p_low.clone(), a.q_low.clone(), a.v_up.clone()),
        None => lossless_bounds(grid, &s)?,
    };
    let b = grid.b();
    let p_low_v = DVector::from_vec(p_low.clone());
    let qc_low = DVector::from_fn(n, |l, _| q_low[l] + b[l] * v_up_of(grid, &v_bar, l));
    let v_bar_v = DVector::from_vec(v_bar.clone());
    let hr = &matrices.h * DMatrix::from_diagonal(&matrices.r);

    let first = Iterate {
        f: solution.f.clone(),
        p: solution.p_top.clone(),
        qc: (0..n).map(|l| solution.q_top[l] + b[l] * v_up_of(grid, &solution.v, l)).collect(),
        v: solution.v.clone(),
    };
    let mut iterates = vec![first];
    let mut norms = Vec::new();
    let mut converged = false;
    let mut growth = 0;
    for it in 1..=opts.max_iter {
        let prev = iterates.last().unwrap();
        let mut f = Vec::with_capacity(n);
        for l in 0..n {
            let vu = v_up_of(grid, &prev.v, l);
            if vu <= 0.0 {
                return Err(Error::VoltageCollapse { bus: grid.parent(l).map_or(0, |k| k + 1), v: vu });
            }
            f.push((prev.p[l].powi(2) + prev.qc[l].powi(2)) / vu);
        }
        let fv = DVector::from_vec(f.clone());
        let p = &p_low_v + &hr * &fv;
        let qc = &qc_low + &matrices.f * &fv;
        let v = &v_bar_v - &matrices.d * &fv;
        if let Some((bus, &val)) = v.iter().enumerate().find(|(_, &x)| x <= 0.0) {
            return Err(Error::VoltageCollapse { bus: bus + 1, v: val });
        }
        let step_max = max_abs_diff(&f, &prev.f);
        let step = norm2(&f, &prev.f);
        if let Some(&last) = norms.last() {
            growth = if step > last { growth + 1 } else { 0 };
        }
        norms.push(step);
        iterates.push(Iterate {
            f,
            p: p.iter().cloned().collect(),
            qc: qc.iter().cloned().collect(),
            v: v.iter().cloned().collect(),
        });
        if !step.is_finite() || growth >= GROWTH_LIMIT {
            return Err(Error::RecoveryDiverged { iteration: it, norm: step });
        }
        if step_max <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::RecoveryNotConverged { iterations: opts.max_iter });
    }

    let last = iterates.last().unwrap();
    let v_star = &last.v;
    let q_star: Vec<f64> = (0..n).map(|l| last.qc[l] - b[l] * v_up_of(grid, v_star, l)).collect();
    let aux = rebuild_upper(grid, &s, &p_low, &q_low, &v_bar, v_star);
    let recovered = OpfSolution {
        model: solution.model,
        status: solution.status,
        objective: f64::NAN,
        primal_residual: f64::NAN,
        p: solution.p.clone(),
        q: solution.q.clone(),
        p_top: last.p.clone(),
        q_top: q_star,
        v: v_star.clone(),
        f: last.f.clone(),
        aux: Some(aux),
    };
    let final_gap = recovered.max_gap(grid);
    Ok(RecoveryTrace { iterates, delta_f_norms: norms, converged, recovered, final_gap })
}

/// Smallest upper-bound current and flows consistent with the recovered
/// voltages, built from the leaves upwards.
fn rebuild_upper(
    grid: &RadialGrid,
    s: &[(f64, f64)],
    p_low: &[f64],
    q_low: &[f64],
    v_bar: &[f64],
    v: &[f64],
) -> AuxValues {
    let n = grid.len();
    let mut f_up = vec![0.0; n];
    let mut p_up = vec![0.0; n];
    let mut q_up = vec![0.0; n];
    for &l in grid.order().iter().rev() {
        let line = &grid.lines[l];
        let ch = grid.children(l);
        let pb_low = s[l].0 + ch.iter().map(|&m| p_low[m]).sum::<f64>();
        let qb_low = s[l].1 + ch.iter().map(|&m| q_low[m]).sum::<f64>();
        let pb_up = s[l].0 + ch.iter().map(|&m| p_up[m]).sum::<f64>();
        let qb_up = s[l].1 + ch.iter().map(|&m| q_up[m]).sum::<f64>();
        let vu = grid.v_up(v, l);
        let vbu = grid.v_up(v_bar, l);
        let shunt = (vu + v[l]) * line.b;
        let bottom = {
            let a = pb_low.abs().max(pb_up.abs());
            let c = (qb_low - v_bar[l] * line.b).abs().max((qb_up - v[l] * line.b).abs());
            (a * a + c * c) / v[l]
        };
        // the top-end flows grow with f_up
        let top = |fu: f64| {
            let pt_up = pb_up + line.r * fu;
            let qt_up = qb_up + line.x * fu - shunt;
            let a = p_low[l].abs().max(pt_up.abs());
            let c = (q_low[l] + vbu * line.b).abs().max((qt_up + vu * line.b).abs());
            (a * a + c * c) / vu
        };
        // smallest fixed point of fu = max(bottom, top(fu)) by monotone iteration from 0
        let mut fu = bottom;
        for _ in 0..200 {
            let next = bottom.max(top(fu));
            if (next - fu).abs() <= 1e-15 * next.max(1.0) {
                fu = next;
                break;
            }
            fu = next;
        }
        f_up[l] = fu;
        p_up[l] = pb_up + line.r * fu;
        q_up[l] = qb_up + line.x * fu - shunt;
    }
    AuxValues { p_low: p_low.to_vec(), q_low: q_low.to_vec(), v_up: v_bar.to_vec(), f_up, p_up, q_up }
}

/// Outcome of the three-part check on a recovered point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCheck {
    /// Largest deviation from the oracle load flow over P, Q, v, f.
    pub oracle_deviation: f64,
    pub oracle_ok: bool,
    pub violations: Vec<Violation>,
    pub input_import: f64,
    pub recovered_import: f64,
    /// Lines where the input point was strictly relaxed.
    pub inexact_lines: Vec<usize>,
    /// Whether recovery strictly lowered the import; `None` when the input
    /// was already exact.
    pub import_decreased: Option<bool>,
}

impl RecoveryCheck {
    pub fn passes(&self) -> bool {
        self.oracle_ok && self.violations.is_empty() && self.import_decreased != Some(false)
    }
}

/// Margin by which the recovered import must undercut the input one.
pub const IMPORT_MARGIN: f64 = 1e-10;

pub fn verify_recovery(trace: &RecoveryTrace, input: &OpfSolution, grid: &RadialGrid) -> Result<RecoveryCheck> {
    let oracle = loadflow::solve_loadflow(grid, &input.injections())?;
    let rec = &trace.recovered;
    let oracle_deviation = oracle_deviation(rec, &oracle);
    let violations = check_operational(&oracle, grid);
    let inexact = input.inexact_lines(grid, GAP_THRESHOLD);
    let import_decreased = if inexact.is_empty() { None } else { Some(rec.p_top[0] < input.p_top[0] - IMPORT_MARGIN) };
    Ok(RecoveryCheck {
        oracle_deviation,
        oracle_ok: oracle_deviation <= ORACLE_TOL,
        violations,
        input_import: input.p_top[0],
        recovered_import: rec.p_top[0],
        inexact_lines: inexact,
        import_decreased,
    })
}

pub fn oracle_deviation(sol: &OpfSolution, oracle: &LoadFlowState) -> f64 {
    [
        max_abs_diff(&sol.p_top, &oracle.p_top),
        max_abs_diff(&sol.q_top, &oracle.q_top),
        max_abs_diff(&sol.v, &oracle.v),
        max_abs_diff(&sol.f, &oracle.f),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvelopeCheck {
    /// `|df(n)| <= E^(n-1) |df(1)|` entry-wise.
    CurrentStep,
    /// `|dv(n)| <= eta^(n-1) |dv(1)|`.
    VoltageStep,
    /// Input voltages stay below the iterates.
    VoltageFloor,
    /// `|dP(n)| <= eta^(n-1) |dP(1)|` on lines upstream of every inexact line.
    FlowStep,
    /// `P(n) <= P` on those lines.
    FlowCeiling,
    /// `f(n) <= f_up`.
    CurrentBound,
    /// `P(n) <= P_up`.
    ActiveBound,
    /// `Qc(n) <= Q_up + b v_up`.
    ReactiveBound,
    /// `||df(n)|| <= ||E||^(n-1) ||df(1)||`.
    NormStep,
}

impl EnvelopeCheck {
    pub const ALL: [EnvelopeCheck; 9] = [
        EnvelopeCheck::CurrentStep,
        EnvelopeCheck::VoltageStep,
        EnvelopeCheck::VoltageFloor,
        EnvelopeCheck::FlowStep,
        EnvelopeCheck::FlowCeiling,
        EnvelopeCheck::CurrentBound,
        EnvelopeCheck::ActiveBound,
        EnvelopeCheck::ReactiveBound,
        EnvelopeCheck::NormStep,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeViolation {
    pub check: EnvelopeCheck,
    pub iteration: usize,
    /// Line index, or `None` for the norm check.
    pub line: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub eta: f64,
    /// Lines upstream of every inexact line of the input.
    pub upstream_lines: Vec<usize>,
    pub checked: usize,
    pub violations: Vec<EnvelopeViolation>,
}

impl EnvelopeReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Value tolerance on bound checks and absolute tolerance on step checks.
pub const ENVELOPE_VALUE_TOL: f64 = 1e-9;
pub const ENVELOPE_STEP_TOL: f64 = 1e-12;

/// Lines `l` with `H[l][m] = 1` for every `m` in `set`.
pub fn common_upstream(matrices: &GridMatrices, set: &[usize]) -> Vec<usize> {
    if set.is_empty() {
        return Vec::new();
    }
    (0..matrices.len()).filter(|&l| set.iter().all(|&m| matrices.h[(l, m)] == 1.0)).collect()
}

/// Checks every envelope inequality at every recorded iteration. `input`
/// must be the point the trace started from, with its upper-bound system.
pub fn convergence_envelope(
    trace: &RecoveryTrace,
    input: &OpfSolution,
    grid: &RadialGrid,
    matrices: &GridMatrices,
    eta: f64,
) -> Result<EnvelopeReport> {
    let aux =
        input.aux.as_ref().ok_or_else(|| Error::InvalidInput("envelope checks need the upper-bound system".into()))?;
    let n = grid.len();
    let its = &trace.iterates;
    let upstream = common_upstream(matrices, &input.inexact_lines(grid, GAP_THRESHOLD));
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut check = |c: EnvelopeCheck, it: usize, line: Option<usize>, lhs: f64, rhs: f64, tol: f64| {
        checked += 1;
        if lhs > rhs + tol {
            violations.push(EnvelopeViolation { check: c, iteration: it, line, lhs, rhs });
        }
    };
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    if its.len() < 2 {
        return Ok(EnvelopeReport { eta, upstream_lines: upstream, checked: 0, violations });
    }
    let df1 = DVector::from_vec(diff(&its[1].f, &its[0].f)).abs();
    let dv1 = diff(&its[1].v, &its[0].v);
    let dp1 = diff(&its[1].p, &its[0].p);
    let e_norm = matrices.e.norm();
    let mut e_pow = DMatrix::<f64>::identity(n, n);
    for k in 1..its.len() {
        let it = &its[k];
        let df = diff(&it.f, &its[k - 1].f);
        let dv = diff(&it.v, &its[k - 1].v);
        let dp = diff(&it.p, &its[k - 1].p);
        let bound_f = &e_pow * &df1;
        let scale = eta.powi(k as i32 - 1);
        let step_tol = |rhs: f64| ENVELOPE_STEP_TOL + 1e-9 * rhs.abs();
        for l in 0..n {
            check(EnvelopeCheck::CurrentStep, k, Some(l), df[l].abs(), bound_f[l], step_tol(bound_f[l]));
            let rv = scale * dv1[l].abs();
            check(EnvelopeCheck::VoltageStep, k, Some(l), dv[l].abs(), rv, step_tol(rv));
            check(EnvelopeCheck::VoltageFloor, k, Some(l), input.v[l], it.v[l], ENVELOPE_VALUE_TOL);
            check(EnvelopeCheck::CurrentBound, k, Some(l), it.f[l], aux.f_up[l], ENVELOPE_VALUE_TOL);
            check(EnvelopeCheck::ActiveBound, k, Some(l), it.p[l], aux.p_up[l], ENVELOPE_VALUE_TOL);
            let q_ceiling = aux.q_up[l] + grid.lines[l].b * grid.v_up(&input.v, l);
            check(EnvelopeCheck::ReactiveBound, k, Some(l), it.qc[l], q_ceiling, ENVELOPE_VALUE_TOL);
        }
        for &l in &upstream {
            let rp = scale * dp1[l].abs();
            check(EnvelopeCheck::FlowStep, k, Some(l), dp[l].abs(), rp, step_tol(rp));
            check(EnvelopeCheck::FlowCeiling, k, Some(l), it.p[l], input.p_top[l], ENVELOPE_VALUE_TOL);
        }
        let rn = e_norm.powi(k as i32 - 1) * trace.delta_f_norms[0];
        check(EnvelopeCheck::NormStep, k, None, trace.delta_f_norms[k - 1], rn, step_tol(rn));
        e_pow = &matrices.e * e_pow;
    }
    Ok(EnvelopeReport { eta, upstream_lines: upstream, checked, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;
    use crate::matrices::{FlowLimitRule, OperatingBounds};
    use crate::opf::{build_ar_opf, CostModel, ModelOptions};

    fn threebus() -> (RadialGrid, GridMatrices, OpfSolution) {
        let grid = data::threebus();
        let bounds = OperatingBounds::from_rule(&grid, FlowLimitRule::LoadFlow).unwrap();
        let cost = CostModel::parse("[import]\nslope = 150\n[bus 3]\np = 50\n", &grid).unwrap();
        let sol = build_ar_opf(&grid, &bounds, &cost, &ModelOptions::default()).unwrap().solve();
        let m = GridMatrices::build(&grid, &bounds).unwrap();
        (grid, m, sol)
    }

    #[test]
    fn lossless_bounds_match_solver() {
        let (grid, _, sol) = threebus();
        let (p, q, v) = lossless_bounds(&grid, &sol.injections()).unwrap();
        let a = sol.aux.as_ref().unwrap();
        assert!(max_abs_diff(&p, &a.p_low) < 1e-8);
        assert!(max_abs_diff(&q, &a.q_low) < 1e-8);
        assert!(max_abs_diff(&v, &a.v_up) < 1e-8);
    }

    #[test]
    fn matrix_forms_hold_at_solution() {
        let (grid, m, sol) = threebus();
        let a = sol.aux.as_ref().unwrap();
        let f = DVector::from_vec(sol.f.clone());
        let p = DVector::from_vec(a.p_low.clone()) + &m.h * DMatrix::from_diagonal(&m.r) * &f;
        let v = DVector::from_vec(a.v_up.clone()) - &m.d * &f;
        let b = grid.b();
        let qc_low = DVector::from_fn(grid.len(), |l, _| a.q_low[l] + b[l] * grid.v_up(&a.v_up, l));
        let qc = qc_low + &m.f * &f;
        for l in 0..grid.len() {
            assert!((p[l] - sol.p_top[l]).abs() < 1e-8);
            assert!((v[l] - sol.v[l]).abs() < 1e-8);
            assert!((qc[l] - sol.q_top[l] - b[l] * grid.v_up(&sol.v, l)).abs() < 1e-8);
        }
    }

    #[test]
    fn exact_input_is_a_fixed_point() {
        let (grid, m, sol) = threebus();
        let oracle = loadflow::solve_loadflow(&grid, &sol.injections()).unwrap();
        let mut exact = sol.clone();
        exact.p_top = oracle.p_top.clone();
        exact.q_top = oracle.q_top.clone();
        exact.v = oracle.v.clone();
        exact.f = oracle.f.clone();
        exact.aux = None;
        let trace = recover(&exact, &grid, &m, &RecoveryOptions::default()).unwrap();
        assert!(trace.iterations() <= 2);
        assert!(trace.delta_f_norms[0] < 1e-9);
        assert!(oracle_deviation(&trace.recovered, &oracle) < 1e-9);
    }

    #[test]
    fn inflated_current_recovers_to_oracle() {
        let (grid, m, exact) = threebus();
        let bounds = OperatingBounds::from_rule(&grid, FlowLimitRule::LoadFlow).unwrap();
        let cost = CostModel::parse("[import]\nslope = 150\n[bus 3]\np = 50\n", &grid).unwrap();
        let mut model = build_ar_opf(&grid, &bounds, &cost, &ModelOptions::default()).unwrap();
        model.force_current(2, exact.f[2] + 0.05);
        let sol = model.solve();
        assert!(sol.is_optimal());
        assert!(!sol.inexact_lines(&grid, GAP_THRESHOLD).is_empty());

        let trace = recover(&sol, &grid, &m, &RecoveryOptions::default()).unwrap();
        assert!(trace.converged);
        assert!(trace.final_gap < 1e-10);
        for (f1, f0) in trace.iterates[1].f.iter().zip(&trace.iterates[0].f) {
            assert!(f1 <= &(f0 + 1e-12));
        }
        let report = verify_recovery(&trace, &sol, &grid).unwrap();
        assert!(report.oracle_ok, "deviation {}", report.oracle_deviation);
        assert_eq!(report.import_decreased, Some(true));
        assert!(report.violations.is_empty());
        let cond = crate::conditions::check_all(&m);
        let env = convergence_envelope(&trace, &sol, &grid, &m, cond.eta).unwrap();
        assert!(env.holds(), "{:?}", env.violations);
    }

    #[test]
    fn recovered_voltages_are_sandwiched() {
        let (grid, m, sol) = threebus();
        let trace = recover(&sol, &grid, &m, &RecoveryOptions::default()).unwrap();
        let v_bar = &sol.aux.as_ref().unwrap().v_up;
        for l in 0..grid.len() {
            let vs = trace.recovered.v[l];
            assert!(grid.v_min <= sol.v[l] && sol.v[l] <= vs + 1e-9);
            assert!(vs <= v_bar[l] + 1e-9 && v_bar[l] <= grid.v_max + 1e-9);
        }
    }

    #[test]
    fn rebuilt_upper_system_bounds_recovered_point() {
        let (grid, m, sol) = threebus();
        let trace = recover(&sol, &grid, &m, &RecoveryOptions::default()).unwrap();
        let rec = &trace.recovered;
        let a = rec.aux.as_ref().unwrap();
        let input_aux = sol.aux.as_ref().unwrap();
        for l in 0..grid.len() {
            assert!(rec.f[l] <= a.f_up[l] + 1e-9);
            assert!(rec.p_top[l] <= a.p_up[l] + 1e-9);
            assert!(rec.q_top[l] <= a.q_up[l] + 1e-9);
            assert!(a.p_up[l] <= input_aux.p_up[l] + 1e-8);
            assert!(a.q_up[l] <= input_aux.q_up[l] + 1e-8);
        }
    }

    #[test]
    fn common_upstream_of_chain() {
        let (_, m, _) = threebus();
        assert_eq!(common_upstream(&m, &[2]), vec![0, 1, 2]);
        assert_eq!(common_upstream(&m, &[1, 2]), vec![0, 1]);
        assert!(common_upstream(&m, &[]).is_empty());
    }
}
