use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::backend::{Backend, Clarabel, RawSolution, SolveStatus, Tolerances};
use super::model::{ModelKind, OpfModel};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::kvtext::{self, Writer};

/// Lines whose relaxation gap exceeds this are counted as inexact.
pub const GAP_THRESHOLD: f64 = 1e-6;

/// Values of the auxiliary bound system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxValues {
    pub p_low: Vec<f64>,
    pub q_low: Vec<f64>,
    pub v_up: Vec<f64>,
    pub f_up: Vec<f64>,
    pub p_up: Vec<f64>,
    pub q_up: Vec<f64>,
}

impl AuxValues {
    /// Bottom-end lower-bound flows `p + sum of child lower flows`.
    pub fn low_bottom(&self, grid: &RadialGrid, p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        bottom(grid, p, q, &self.p_low, &self.q_low)
    }

    pub fn up_bottom(&self, grid: &RadialGrid, p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        bottom(grid, p, q, &self.p_up, &self.q_up)
    }
}

fn bottom(grid: &RadialGrid, p: &[f64], q: &[f64], pt: &[f64], qt: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (0..grid.len())
        .map(|l| {
            let ch = grid.children(l);
            (p[l] + ch.iter().map(|&m| pt[m]).sum::<f64>(), q[l] + ch.iter().map(|&m| qt[m]).sum::<f64>())
        })
        .unzip()
}

/// A relaxed OPF point with solver status. Vectors are indexed by line
/// (equivalently by downstream bus).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpfSolution {
    pub model: ModelKind,
    pub status: SolveStatus,
    pub objective: f64,
    pub primal_residual: f64,
    /// Absorbed power at each bus.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Top-end line flows.
    pub p_top: Vec<f64>,
    pub q_top: Vec<f64>,
    pub v: Vec<f64>,
    pub f: Vec<f64>,
    pub aux: Option<AuxValues>,
}

impl OpfModel {
    pub fn solve(&self) -> OpfSolution {
        self.solve_with(&Clarabel, &Tolerances::default())
    }

    pub fn solve_with(&self, backend: &dyn Backend, tol: &Tolerances) -> OpfSolution {
        let raw = backend.solve(&self.program, tol);
        self.extract(&raw)
    }

    pub fn extract(&self, raw: &RawSolution) -> OpfSolution {
        let x = &raw.x;
        let pick = |idx: &[usize]| idx.iter().map(|&i| x[i]).collect::<Vec<f64>>();
        let l = &self.layout;
        OpfSolution {
            model: l.kind,
            status: raw.status,
            objective: raw.objective,
            primal_residual: raw.primal_residual,
            p: pick(&l.p),
            q: pick(&l.q),
            p_top: pick(&l.p_top),
            q_top: pick(&l.q_top),
            v: pick(&l.v),
            f: pick(&l.f),
            aux: l.aux.as_ref().map(|a| AuxValues {
                p_low: pick(&a.p_low),
                q_low: pick(&a.q_low),
                v_up: pick(&a.v_up),
                f_up: pick(&a.f_up),
                p_up: pick(&a.p_up),
                q_up: pick(&a.q_up),
            }),
        }
    }
}

impl OpfSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn injections(&self) -> Vec<(f64, f64)> {
        self.p.iter().zip(&self.q).map(|(&p, &q)| (p, q)).collect()
    }

    /// `f - (P^2 + (Q + v_up b)^2) / v_up` per line.
    pub fn exactness_gap(&self, grid: &RadialGrid) -> Vec<f64> {
        grid.lines
            .iter()
            .enumerate()
            .map(|(l, line)| {
                let vu = grid.v_up(&self.v, l);
                let qs = self.q_top[l] + vu * line.b;
                self.f[l] - (self.p_top[l].powi(2) + qs * qs) / vu
            })
            .collect()
    }

    pub fn max_gap(&self, grid: &RadialGrid) -> f64 {
        self.exactness_gap(grid).into_iter().fold(0.0, |a, g| a.max(g.abs()))
    }

    /// Lines where the relaxation is strict (gap above `threshold`).
    pub fn inexact_lines(&self, grid: &RadialGrid, threshold: f64) -> Vec<usize> {
        self.exactness_gap(grid).iter().enumerate().filter(|(_, &g)| g > threshold).map(|(l, _)| l).collect()
    }

    /// Squared currents of the auxiliary bound system, `(top, bottom)` per
    /// line: the largest flow magnitudes over the two bound systems divided
    /// by the voltage they are held against in the ampacity rows.
    pub fn auxiliary_currents(&self, grid: &RadialGrid) -> Option<Vec<(f64, f64)>> {
        let a = self.aux.as_ref()?;
        let (plb, qlb) = a.low_bottom(grid, &self.p, &self.q);
        let (pub_, qub) = a.up_bottom(grid, &self.p, &self.q);
        let sq = |x: f64, y: f64| x.abs().max(y.abs()).powi(2);
        Some(
            (0..grid.len())
                .map(|l| {
                    let vu = grid.v_up(&self.v, l);
                    let top = (sq(a.p_low[l], a.p_up[l]) + sq(a.q_low[l], a.q_up[l])) / vu;
                    let bottom = (sq(plb[l], pub_[l]) + sq(qlb[l], qub[l])) / self.v[l];
                    (top, bottom)
                })
                .collect(),
        )
    }

    /// Bottom-end flows `p + sum of child top flows`.
    pub fn bottom_flows(&self, grid: &RadialGrid) -> (Vec<f64>, Vec<f64>) {
        bottom(grid, &self.p, &self.q, &self.p_top, &self.q_top)
    }

    pub fn to_text(&self, grid: &RadialGrid) -> String {
        let mut w = Writer::new();
        w.section("solution", None)
            .kv("model", self.model)
            .kv("status", self.status)
            .kv("objective", self.objective)
            .kv("residual", self.primal_residual);
        for l in 0..grid.len() {
            w.section("line", Some(grid.label(l + 1)))
                .kv("p", self.p[l])
                .kv("q", self.q[l])
                .kv("P", self.p_top[l])
                .kv("Q", self.q_top[l])
                .kv("v", self.v[l])
                .kv("f", self.f[l]);
            if let Some(a) = &self.aux {
                w.kv("P_low", a.p_low[l])
                    .kv("Q_low", a.q_low[l])
                    .kv("v_up", a.v_up[l])
                    .kv("f_up", a.f_up[l])
                    .kv("P_up", a.p_up[l])
                    .kv("Q_up", a.q_up[l]);
            }
        }
        w.finish()
    }

    pub fn parse(text: &str, grid: &RadialGrid) -> Result<Self> {
        let index: HashMap<&str, usize> = grid.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let n = grid.len();
        let nan = || vec![f64::NAN; n];
        let mut sol = OpfSolution {
            model: ModelKind::Relaxed,
            status: SolveStatus::NumericalFailure,
            objective: f64::NAN,
            primal_residual: f64::NAN,
            p: nan(),
            q: nan(),
            p_top: nan(),
            q_top: nan(),
            v: nan(),
            f: nan(),
            aux: None,
        };
        let mut aux = AuxValues { p_low: nan(), q_low: nan(), v_up: nan(), f_up: nan(), p_up: nan(), q_up: nan() };
        let mut any_aux = false;
        let mut seen_header = false;
        for s in kvtext::parse(text)? {
            match s.kind.as_str() {
                "solution" => {
                    s.check_keys(&["model", "status", "objective", "residual"])?;
                    seen_header = true;
                    sol.model = match s.get_str("model") {
                        Some("aropf") => ModelKind::AugmentedRelaxed,
                        Some("ropf") => ModelKind::Relaxed,
                        other => return Err(Error::Syntax { line: s.line, msg: format!("unknown model {other:?}") }),
                    };
                    sol.status = match s.get_str("status") {
                        Some("optimal") => SolveStatus::Optimal,
                        Some("infeasible") => SolveStatus::Infeasible,
                        Some("unbounded") => SolveStatus::Unbounded,
                        Some("numerical-failure") => SolveStatus::NumericalFailure,
                        other => return Err(Error::Syntax { line: s.line, msg: format!("unknown status {other:?}") }),
                    };
                    sol.objective = s.get_f64("objective")?.unwrap_or(f64::NAN);
                    sol.primal_residual = s.get_f64("residual")?.unwrap_or(f64::NAN);
                }
                "line" => {
                    let keys = ["p", "q", "P", "Q", "v", "f", "P_low", "Q_low", "v_up", "f_up", "P_up", "Q_up"];
                    s.check_keys(&keys)?;
                    let label = s.label.as_deref().unwrap_or("");
                    let l = match index.get(label) {
                        Some(&i) if i > 0 => i - 1,
                        _ => return Err(Error::Syntax { line: s.line, msg: format!("unknown line `{label}`") }),
                    };
                    sol.p[l] = s.require_f64("p")?;
                    sol.q[l] = s.require_f64("q")?;
                    sol.p_top[l] = s.require_f64("P")?;
                    sol.q_top[l] = s.require_f64("Q")?;
                    sol.v[l] = s.require_f64("v")?;
                    sol.f[l] = s.require_f64("f")?;
                    if s.get("P_low").is_some() {
                        any_aux = true;
                        aux.p_low[l] = s.require_f64("P_low")?;
                        aux.q_low[l] = s.require_f64("Q_low")?;
                        aux.v_up[l] = s.require_f64("v_up")?;
                        aux.f_up[l] = s.require_f64("f_up")?;
                        aux.p_up[l] = s.require_f64("P_up")?;
                        aux.q_up[l] = s.require_f64("Q_up")?;
                    }
                }
                other => return Err(Error::Syntax { line: s.line, msg: format!("unknown section [{other}]") }),
            }
        }
        if !seen_header {
            return Err(Error::Syntax { line: 1, msg: "missing [solution] section".into() });
        }
        if sol.f.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidInput("solution file does not cover every line".into()));
        }
        if any_aux {
            if aux.f_up.iter().any(|x| x.is_nan()) {
                return Err(Error::InvalidInput("auxiliary values missing on some lines".into()));
            }
            sol.aux = Some(aux);
        }
        Ok(sol)
    }

    pub fn read(path: impl AsRef<std::path::Path>, grid: &RadialGrid) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, grid)
    }
}
