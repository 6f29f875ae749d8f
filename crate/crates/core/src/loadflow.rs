//! Backward-forward sweep for the exact branch-flow equations of a radial
//! grid with Pi lines. It shares nothing with the conic model and serves as
//! the independent check of every OPF result.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::kvtext;

pub const MAX_ITERATIONS: usize = 500;
/// Target on the largest per-equation residual.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Tolerance on closed operational bounds in [`check_operational`].
pub const OPERATIONAL_TOL: f64 = 1e-8;

/// Converged load flow. Powers are per line, voltages per bus; all squared
/// magnitudes where noted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadFlowState {
    pub p_top: Vec<f64>,
    pub q_top: Vec<f64>,
    pub p_bot: Vec<f64>,
    pub q_bot: Vec<f64>,
    /// Squared voltage magnitude.
    pub v: Vec<f64>,
    /// Squared current through the series element.
    pub f: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl LoadFlowState {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LineEnd {
    Top,
    Bottom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    VoltageLow { bus: usize, v: f64, limit: f64 },
    VoltageHigh { bus: usize, v: f64, limit: f64 },
    Current { line: usize, end: LineEnd, i_sq: f64, limit: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::VoltageLow { bus, v, limit } => write!(f, "bus {bus}: v = {v:.6} below {limit:.6}"),
            Violation::VoltageHigh { bus, v, limit } => write!(f, "bus {bus}: v = {v:.6} above {limit:.6}"),
            Violation::Current { line, end, i_sq, limit } => {
                write!(f, "line {line} ({end:?}): |I|^2 = {i_sq:.6} above {limit:.6}")
            }
        }
    }
}

/// Solves the power flow for absorptions `s = (p, q)` per bus, starting
/// flat at `v0`, which lands on the high-voltage solution.
pub fn solve_loadflow(grid: &RadialGrid, s: &[(f64, f64)]) -> Result<LoadFlowState> {
    let n = grid.len();
    if s.len() != n {
        return Err(Error::InvalidInput(format!("{} injections for {} buses", s.len(), n)));
    }
    let mut v = vec![grid.v0; n];
    let mut st = sweep_back(grid, s, &v);
    let mut damping = 1.0;
    let mut prev_delta = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let next = sweep_forward(grid, &st, &v);
        let mut delta = 0.0f64;
        for l in 0..n {
            let nv = v[l] + damping * (next[l] - v[l]);
            delta = delta.max((nv - v[l]).abs());
            v[l] = nv;
        }
        if let Some(l) = (0..n).find(|&l| !(v[l] > 0.0)) {
            return Err(Error::VoltageCollapse { bus: l + 1, v: v[l] });
        }
        if !delta.is_finite() {
            return Err(Error::NonConvergence { iterations: it, last_delta: delta });
        }
        if delta > prev_delta && damping > 0.1 {
            damping *= 0.5;
        }
        prev_delta = delta;
        st = sweep_back(grid, s, &v);
        if delta <= 1e-13 {
            st.iterations = it;
            st.residual = residual(grid, s, &st);
            if st.residual <= RESIDUAL_TOL {
                return Ok(st);
            }
        }
    }
    let last = residual(grid, s, &st);
    Err(Error::NonConvergence { iterations: MAX_ITERATIONS, last_delta: last })
}

fn sweep_back(grid: &RadialGrid, s: &[(f64, f64)], v: &[f64]) -> LoadFlowState {
    let n = grid.len();
    let mut p_bot = vec![0.0; n];
    let mut q_bot = vec![0.0; n];
    let mut p_top = vec![0.0; n];
    let mut q_top = vec![0.0; n];
    let mut f = vec![0.0; n];
    for &l in grid.order().iter().rev() {
        let line = &grid.lines[l];
        p_bot[l] += s[l].0;
        q_bot[l] += s[l].1;
        let vl = v[l];
        let vu = grid.v_up(v, l);
        let qc = q_bot[l] - vl * line.b;
        f[l] = (p_bot[l] * p_bot[l] + qc * qc) / vl;
        p_top[l] = p_bot[l] + line.r * f[l];
        q_top[l] = q_bot[l] + line.x * f[l] - (vu + vl) * line.b;
        if let Some(k) = grid.parent(l) {
            p_bot[k] += p_top[l];
            q_bot[k] += q_top[l];
        }
    }
    LoadFlowState { p_top, q_top, p_bot, q_bot, v: v.to_vec(), f, residual: f64::NAN, iterations: 0 }
}

fn sweep_forward(grid: &RadialGrid, st: &LoadFlowState, v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    for &l in grid.order() {
        let line = &grid.lines[l];
        let vu = grid.v_up(&out, l);
        out[l] = vu - 2.0 * (line.r * st.p_top[l] + line.x * (st.q_top[l] + vu * line.b))
            + (line.r * line.r + line.x * line.x) * st.f[l];
    }
    out
}

/// Largest absolute residual of the four branch-flow equation families at
/// `state` for absorptions `s`.
pub fn residual(grid: &RadialGrid, s: &[(f64, f64)], state: &LoadFlowState) -> f64 {
    let n = grid.len();
    let mut worst = 0.0f64;
    let mut down_p = vec![0.0; n];
    let mut down_q = vec![0.0; n];
    for l in 0..n {
        if let Some(k) = grid.parent(l) {
            down_p[k] += state.p_top[l];
            down_q[k] += state.q_top[l];
        }
    }
    for (l, line) in grid.lines.iter().enumerate() {
        let vu = grid.v_up(&state.v, l);
        let vl = state.v[l];
        let (p, q) = (state.p_top[l], state.q_top[l]);
        // bottom balance
        worst = worst.max((state.p_bot[l] - s[l].0 - down_p[l]).abs());
        worst = worst.max((state.q_bot[l] - s[l].1 - down_q[l]).abs());
        // top balance
        worst = worst.max((p - state.p_bot[l] - line.r * state.f[l]).abs());
        worst = worst.max((q - state.q_bot[l] - line.x * state.f[l] + (vu + vl) * line.b).abs());
        // voltage drop
        let drop =
            vu - 2.0 * (line.r * p + line.x * (q + vu * line.b)) + (line.r * line.r + line.x * line.x) * state.f[l];
        worst = worst.max((vl - drop).abs());
        // series current, both forms
        let qt = q + vu * line.b;
        worst = worst.max((state.f[l] - (p * p + qt * qt) / vu).abs());
        let qb = state.q_bot[l] - vl * line.b;
        worst = worst.max((state.f[l] - (state.p_bot[l] * state.p_bot[l] + qb * qb) / vl).abs());
    }
    worst
}

/// Squared terminal currents per line: `(top, bottom)`.
pub fn terminal_currents(state: &LoadFlowState, grid: &RadialGrid) -> Vec<(f64, f64)> {
    (0..grid.len())
        .map(|l| {
            let vu = grid.v_up(&state.v, l);
            (
                (state.p_top[l].powi(2) + state.q_top[l].powi(2)) / vu,
                (state.p_bot[l].powi(2) + state.q_bot[l].powi(2)) / state.v[l],
            )
        })
        .collect()
}

/// Voltage and ampacity violations of a load-flow state. Bounds are closed.
pub fn check_operational(state: &LoadFlowState, grid: &RadialGrid) -> Vec<Violation> {
    let mut out = Vec::new();
    for (l, &v) in state.v.iter().enumerate() {
        if v < grid.v_min - OPERATIONAL_TOL {
            out.push(Violation::VoltageLow { bus: l + 1, v, limit: grid.v_min });
        }
        if v > grid.v_max + OPERATIONAL_TOL {
            out.push(Violation::VoltageHigh { bus: l + 1, v, limit: grid.v_max });
        }
    }
    for (l, (top, bot)) in terminal_currents(state, grid).into_iter().enumerate() {
        let limit = grid.lines[l].i_max_sq;
        if top > limit + OPERATIONAL_TOL {
            out.push(Violation::Current { line: l + 1, end: LineEnd::Top, i_sq: top, limit });
        }
        if bot > limit + OPERATIONAL_TOL {
            out.push(Violation::Current { line: l + 1, end: LineEnd::Bottom, i_sq: bot, limit });
        }
    }
    out
}

/// Injection file: one `[bus <label>]` section with `p` and `q` absorptions
/// in per-unit. Buses left out absorb their nominal load.
pub fn parse_injections(text: &str, grid: &RadialGrid) -> Result<Vec<(f64, f64)>> {
    let index: HashMap<&str, usize> = grid.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut s: Vec<(f64, f64)> = grid.buses.iter().map(|b| (b.p_load, b.q_load)).collect();
    for sec in kvtext::parse(text)? {
        if sec.kind != "bus" {
            return Err(Error::Syntax { line: sec.line, msg: format!("unknown section [{}]", sec.kind) });
        }
        sec.check_keys(&["p", "q"])?;
        let label = sec.label.as_deref().unwrap_or("");
        let i = match index.get(label) {
            Some(&i) if i > 0 => i - 1,
            _ => return Err(Error::Syntax { line: sec.line, msg: format!("unknown bus `{label}`") }),
        };
        s[i] = (sec.get_f64("p")?.unwrap_or(s[i].0), sec.get_f64("q")?.unwrap_or(s[i].1));
    }
    Ok(s)
}

pub fn read_injections(path: impl AsRef<std::path::Path>, grid: &RadialGrid) -> Result<Vec<(f64, f64)>> {
    parse_injections(&std::fs::read_to_string(path)?, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::grid_from_ups;
    use approx::assert_relative_eq;

    #[test]
    fn injection_file_overrides_nominal_load() {
        let g = grid_from_ups(&[0, 1, 1]);
        let s = parse_injections("[bus 2]\np = -0.3\n", &g).unwrap();
        assert_eq!(s[1], (-0.3, g.buses[1].q_load));
        assert_eq!(s[0], (g.buses[0].p_load, g.buses[0].q_load));
        assert!(parse_injections("[bus 9]\np = 1\n", &g).is_err());
        assert!(parse_injections("[bus 0]\np = 1\n", &g).is_err());
    }

    #[test]
    fn no_load_without_shunts_is_flat() {
        let g = grid_from_ups(&[0, 1, 2, 2]).without_shunts();
        let st = solve_loadflow(&g, &[(0.0, 0.0); 4]).unwrap();
        assert!(st.v.iter().all(|&v| v == g.v0));
        assert!(st.f.iter().chain(&st.p_top).chain(&st.q_top).all(|&x| x == 0.0));
        assert!(terminal_currents(&st, &g).iter().all(|&(a, b)| a == 0.0 && b == 0.0));
    }

    #[test]
    fn no_load_with_shunts_raises_voltage() {
        let g = grid_from_ups(&[0, 1, 2, 2]);
        let st = solve_loadflow(&g, &[(0.0, 0.0); 4]).unwrap();
        assert!(st.residual <= RESIDUAL_TOL);
        assert!(st.v.iter().all(|&v| v >= g.v0));
        assert!(st.f.iter().all(|&f| f > 0.0));
    }

    #[test]
    fn losses_are_nonnegative() {
        let g = grid_from_ups(&[0, 1, 1, 2, 3]);
        let s = [(0.1, 0.02), (-0.3, 0.0), (0.05, 0.05), (0.2, 0.1), (-0.1, -0.05)];
        let st = solve_loadflow(&g, &s).unwrap();
        let net: f64 = s.iter().map(|x| x.0).sum();
        assert!(st.p_top[0] >= net);
        assert!(residual(&g, &s, &st) <= RESIDUAL_TOL);
    }

    #[test]
    fn terminal_equals_series_current_without_shunts() {
        let g = grid_from_ups(&[0, 1]).without_shunts();
        let st = solve_loadflow(&g, &[(0.2, 0.1), (0.3, 0.05)]).unwrap();
        for (l, (top, bot)) in terminal_currents(&st, &g).into_iter().enumerate() {
            assert_relative_eq!(top, st.f[l], max_relative = 1e-10);
            assert_relative_eq!(bot, st.f[l], max_relative = 1e-10);
        }
    }

    #[test]
    fn extreme_load_fails_loudly() {
        let g = grid_from_ups(&[0, 1]);
        let err = solve_loadflow(&g, &[(0.0, 0.0), (30.0, 30.0)]).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. } | Error::VoltageCollapse { .. }));
    }

    #[test]
    fn boundary_voltage_is_not_a_violation() {
        let g = grid_from_ups(&[0]);
        let st = LoadFlowState {
            p_top: vec![0.0],
            q_top: vec![0.0],
            p_bot: vec![0.0],
            q_bot: vec![0.0],
            v: vec![g.v_max],
            f: vec![0.0],
            residual: 0.0,
            iterations: 0,
        };
        assert!(check_operational(&st, &g).is_empty());
        let mut high = st.clone();
        high.v[0] = g.v_max + 1e-3;
        assert_eq!(check_operational(&high, &g).len(), 1);
    }
}
