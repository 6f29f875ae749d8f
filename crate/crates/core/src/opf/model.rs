//! Builders for the relaxed OPF (R-OPF) and the augmented relaxed OPF
//! (AR-OPF) as conic programs.

use serde::{Deserialize, Serialize};

use super::cost::CostModel;
use super::program::{ConicProgram, LinExpr};
use crate::error::{Error, Result};
use crate::grid::{InjectionSet, RadialGrid};
use crate::matrices::OperatingBounds;

pub mod tag {
    pub const FLOW_BALANCE: &str = "flow-balance";
    pub const VOLTAGE_DROP: &str = "voltage-drop";
    pub const INJECTION: &str = "injection-bounds";
    pub const POWER_FACTOR: &str = "power-factor";
    pub const FIXED_INJECTION: &str = "fixed-injection";
    pub const RELAXATION: &str = "relaxation";
    pub const VOLTAGE_MIN: &str = "voltage-min";
    pub const VOLTAGE_MAX: &str = "voltage-max";
    pub const AMPACITY_BOTTOM: &str = "ampacity-bottom";
    pub const AMPACITY_TOP: &str = "ampacity-top";
    pub const LOWER_FLOW: &str = "lower-flow";
    pub const LOWER_VOLTAGE_DROP: &str = "lower-voltage-drop";
    pub const UPPER_FLOW: &str = "upper-flow";
    pub const UPPER_CURRENT_BOTTOM: &str = "upper-current-bottom";
    pub const UPPER_CURRENT_TOP: &str = "upper-current-top";
    pub const ABS_SLACK: &str = "abs-slack";
    pub const AUX_VOLTAGE_MAX: &str = "aux-voltage-max";
    pub const AUX_AMPACITY_BOTTOM: &str = "aux-ampacity-bottom";
    pub const AUX_AMPACITY_TOP: &str = "aux-ampacity-top";
    /// Physical flows below the upper-bound flows.
    pub const AUX_TECHNICAL: &str = "aux-technical";
    /// Caps on the upper-bound flows that only serve the exactness argument.
    pub const AUX_FLOW_LIMIT: &str = "aux-flow-limit";
    pub const CURRENT_FLOOR: &str = "current-floor";
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Relaxed,
    AugmentedRelaxed,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Relaxed => "ropf",
            ModelKind::AugmentedRelaxed => "aropf",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Keep the ampacity constraints (auxiliary ones for AR-OPF).
    pub ampacity: bool,
    /// Keep the voltage constraints.
    pub voltage: bool,
    /// Replace the injection bounds by fixed absorptions.
    pub fixed_injection: Option<Vec<(f64, f64)>>,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self { ampacity: true, voltage: true, fixed_injection: None }
    }
}

/// Variable indices of the auxiliary system, one entry per line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxLayout {
    /// Lower-bound top flows (lossless linear model).
    pub p_low: Vec<usize>,
    pub q_low: Vec<usize>,
    /// Upper-bound voltages.
    pub v_up: Vec<usize>,
    /// Upper-bound series current.
    pub f_up: Vec<usize>,
    /// Upper-bound top flows.
    pub p_up: Vec<usize>,
    pub q_up: Vec<usize>,
    /// Slacks for the maxima of absolute flows at the bottom and top.
    pub abs_p_bot: Vec<usize>,
    pub abs_q_bot: Vec<usize>,
    pub abs_p_top: Vec<usize>,
    pub abs_q_top: Vec<usize>,
    pub amp_q_bot: Vec<usize>,
    pub amp_q_top: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub kind: ModelKind,
    pub p: Vec<usize>,
    pub q: Vec<usize>,
    pub p_top: Vec<usize>,
    pub q_top: Vec<usize>,
    pub v: Vec<usize>,
    pub f: Vec<usize>,
    pub aux: Option<AuxLayout>,
}

/// A built program together with the map from model quantities to
/// program variables.
#[derive(Clone, Debug)]
pub struct OpfModel {
    pub program: ConicProgram,
    pub layout: Layout,
    pub grid: RadialGrid,
}

impl OpfModel {
    /// Adds `f[line] >= floor`. Optimal points of the result are feasible,
    /// generally inexact points of the original model.
    pub fn force_current(&mut self, line: usize, floor: f64) {
        let f = self.layout.f[line];
        self.program.ge0(tag::CURRENT_FLOOR, LinExpr::var(f).offset(-floor));
    }
}

fn vars(p: &mut ConicProgram, name: &str, n: usize) -> Vec<usize> {
    (1..=n).map(|l| p.add_var(format!("{name}[{l}]"))).collect()
}

/// Sum over child lines of `x[child]`.
fn children_sum(grid: &RadialGrid, l: usize, x: &[usize]) -> LinExpr {
    grid.children(l).iter().fold(LinExpr::default(), |e, &m| e.add(1.0, x[m]))
}

/// Upstream voltage of line `l`: a variable, or the slack constant.
fn upstream(grid: &RadialGrid, l: usize, v: &[usize]) -> LinExpr {
    match grid.parent(l) {
        Some(k) => LinExpr::var(v[k]),
        None => LinExpr::constant(grid.v0),
    }
}

fn check_bounds(grid: &RadialGrid) -> Result<()> {
    for b in &grid.buses {
        if b.p_min > b.p_max || b.q_min > b.q_max {
            return Err(Error::InvalidInput(format!("bus {}: inconsistent injection bounds", b.id)));
        }
    }
    Ok(())
}

/// Injection variables with their bounds and power-factor rows.
fn injections(prog: &mut ConicProgram, grid: &RadialGrid, opts: &ModelOptions) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = grid.len();
    let p = vars(prog, "p", n);
    let q = vars(prog, "q", n);
    if let Some(fixed) = &opts.fixed_injection {
        if fixed.len() != n {
            return Err(Error::InvalidInput(format!("{} fixed injections for {n} buses", fixed.len())));
        }
        for l in 0..n {
            prog.eq0(tag::FIXED_INJECTION, LinExpr::var(p[l]).offset(-fixed[l].0));
            prog.eq0(tag::FIXED_INJECTION, LinExpr::var(q[l]).offset(-fixed[l].1));
        }
        return Ok((p, q));
    }
    for (l, bus) in grid.buses.iter().enumerate() {
        let bounds = [(p[l], bus.p_min, bus.p_max), (q[l], bus.q_min, bus.q_max)];
        for (x, lo, hi) in bounds {
            if lo == hi {
                prog.eq0(tag::INJECTION, LinExpr::var(x).offset(-lo));
            } else {
                prog.ge0(tag::INJECTION, LinExpr::var(x).offset(-lo));
                prog.ge0(tag::INJECTION, LinExpr::constant(hi).add(-1.0, x));
            }
        }
        match bus.injection_set {
            InjectionSet::Box => {}
            InjectionSet::FixedPowerFactor { lagging, .. } => {
                let k = bus.injection_set.q_ratio().unwrap();
                let sign = if lagging { 1.0 } else { -1.0 };
                prog.eq0(tag::POWER_FACTOR, LinExpr::var(q[l]).add(-sign * k, p[l]));
            }
            InjectionSet::MinPowerFactor { .. } => {
                let k = bus.injection_set.q_ratio().unwrap();
                let sign = if bus.p_max <= 0.0 {
                    -1.0
                } else if bus.p_min >= 0.0 {
                    1.0
                } else {
                    return Err(Error::InvalidInput(format!(
                        "bus {}: a minimum power factor needs a sign-definite active power range",
                        bus.id
                    )));
                };
                let limit = LinExpr::default().add(sign * k, p[l]);
                prog.ge(tag::POWER_FACTOR, &limit, &LinExpr::var(q[l]));
                prog.ge(tag::POWER_FACTOR, &limit, &LinExpr::var(q[l]).scaled(-1.0));
            }
        }
    }
    Ok((p, q))
}

/// Physical part shared by both models: flow balance, voltage drop and the
/// relaxed series-current cone.
fn physical(
    prog: &mut ConicProgram,
    grid: &RadialGrid,
    p: &[usize],
    q: &[usize],
) -> (Vec<usize>, Vec<usize>, Vec<usize>, Vec<usize>) {
    let n = grid.len();
    let pt = vars(prog, "P", n);
    let qt = vars(prog, "Q", n);
    let v = vars(prog, "v", n);
    let f = vars(prog, "f", n);
    for (l, line) in grid.lines.iter().enumerate() {
        let vu = upstream(grid, l, &v);
        let p_bal = LinExpr::var(pt[l]).add(-1.0, p[l]).plus(&children_sum(grid, l, &pt), -1.0).add(-line.r, f[l]);
        prog.eq0(tag::FLOW_BALANCE, p_bal);
        let q_bal = LinExpr::var(qt[l])
            .add(-1.0, q[l])
            .plus(&children_sum(grid, l, &qt), -1.0)
            .add(-line.x, f[l])
            .plus(&vu, line.b)
            .add(line.b, v[l]);
        prog.eq0(tag::FLOW_BALANCE, q_bal);
        let z2 = line.r * line.r + line.x * line.x;
        let drop = LinExpr::var(v[l])
            .plus(&vu, -1.0)
            .add(2.0 * line.r, pt[l])
            .add(2.0 * line.x, qt[l])
            .plus(&vu, 2.0 * line.x * line.b)
            .add(-z2, f[l]);
        prog.eq0(tag::VOLTAGE_DROP, drop);
        let q_series = LinExpr::var(qt[l]).plus(&vu, line.b);
        prog.rotated(tag::RELAXATION, LinExpr::var(f[l]), vu, vec![LinExpr::var(pt[l]), q_series]);
    }
    (pt, qt, v, f)
}

fn objective(prog: &mut ConicProgram, cost: &CostModel, p: &[usize], q: &[usize], p_top1: usize) {
    for l in 0..p.len() {
        for (x, lin, quad) in
            [(p[l], cost.p_linear[l], cost.p_quadratic[l]), (q[l], cost.q_linear[l], cost.q_quadratic[l])]
        {
            if lin != 0.0 {
                prog.objective.push((x, lin));
            }
            if quad != 0.0 {
                prog.quadratic.push((x, quad));
            }
        }
    }
    prog.objective.push((p_top1, cost.import_slope));
    prog.objective_constant = cost.constant;
}

/// Relaxed OPF: exact branch equations with the series current relaxed to a
/// cone, plus voltage and terminal-ampacity limits.
pub fn build_r_opf(grid: &RadialGrid, cost: &CostModel, opts: &ModelOptions) -> Result<OpfModel> {
    check_bounds(grid)?;
    cost.validate(grid.len())?;
    let mut prog = ConicProgram::default();
    let (p, q) = injections(&mut prog, grid, opts)?;
    let (pt, qt, v, f) = physical(&mut prog, grid, &p, &q);
    for (l, line) in grid.lines.iter().enumerate() {
        if opts.voltage {
            prog.ge0(tag::VOLTAGE_MIN, LinExpr::var(v[l]).offset(-grid.v_min));
            prog.ge0(tag::VOLTAGE_MAX, LinExpr::constant(grid.v_max).add(-1.0, v[l]));
        }
        if opts.ampacity {
            let vu = upstream(grid, l, &v);
            let p_bot = LinExpr::var(p[l]).plus(&children_sum(grid, l, &pt), 1.0);
            let q_bot = LinExpr::var(q[l]).plus(&children_sum(grid, l, &qt), 1.0);
            let imax = LinExpr::constant(line.i_max_sq);
            prog.rotated(tag::AMPACITY_BOTTOM, LinExpr::var(v[l]), imax.clone(), vec![p_bot, q_bot]);
            prog.rotated(tag::AMPACITY_TOP, vu, imax, vec![LinExpr::var(pt[l]), LinExpr::var(qt[l])]);
        }
    }
    objective(&mut prog, cost, &p, &q, pt[0]);
    let layout = Layout { kind: ModelKind::Relaxed, p, q, p_top: pt, q_top: qt, v, f, aux: None };
    Ok(OpfModel { program: prog, layout, grid: grid.clone() })
}

/// Augmented relaxed OPF: the relaxed model plus lower/upper bound systems
/// on flows, voltages and current, with the security limits moved onto the
/// bounds.
pub fn build_ar_opf(
    grid: &RadialGrid,
    bounds: &OperatingBounds,
    cost: &CostModel,
    opts: &ModelOptions,
) -> Result<OpfModel> {
    check_bounds(grid)?;
    cost.validate(grid.len())?;
    bounds.validate()?;
    let n = grid.len();
    if bounds.p_max.len() != n {
        return Err(Error::InvalidInput(format!("bounds are for {} lines, grid has {n}", bounds.p_max.len())));
    }
    let mut prog = ConicProgram::default();
    let (p, q) = injections(&mut prog, grid, opts)?;
    let (pt, qt, v, f) = physical(&mut prog, grid, &p, &q);
    let aux = AuxLayout {
        p_low: vars(&mut prog, "P_low", n),
        q_low: vars(&mut prog, "Q_low", n),
        v_up: vars(&mut prog, "v_up", n),
        f_up: vars(&mut prog, "f_up", n),
        p_up: vars(&mut prog, "P_up", n),
        q_up: vars(&mut prog, "Q_up", n),
        abs_p_bot: vars(&mut prog, "absPb", n),
        abs_q_bot: vars(&mut prog, "absQb", n),
        abs_p_top: vars(&mut prog, "absPt", n),
        abs_q_top: vars(&mut prog, "absQt", n),
        amp_q_bot: vars(&mut prog, "ampQb", n),
        amp_q_top: vars(&mut prog, "ampQt", n),
    };
    let a = &aux;
    for (l, line) in grid.lines.iter().enumerate() {
        let vu = upstream(grid, l, &v);
        let vbu = upstream(grid, l, &a.v_up);
        let (r, x, b) = (line.r, line.x, line.b);

        // lossless lower-bound flows with upper-bound voltages in the shunts
        let p_low_bot = LinExpr::var(p[l]).plus(&children_sum(grid, l, &a.p_low), 1.0);
        let q_low_bot = LinExpr::var(q[l]).plus(&children_sum(grid, l, &a.q_low), 1.0);
        prog.eq0(tag::LOWER_FLOW, LinExpr::var(a.p_low[l]).plus(&p_low_bot, -1.0));
        prog.eq0(tag::LOWER_FLOW, LinExpr::var(a.q_low[l]).plus(&q_low_bot, -1.0).plus(&vbu, b).add(b, a.v_up[l]));
        let drop = LinExpr::var(a.v_up[l])
            .plus(&vbu, -1.0)
            .add(2.0 * r, a.p_low[l])
            .add(2.0 * x, a.q_low[l])
            .plus(&vbu, 2.0 * x * b);
        prog.eq0(tag::LOWER_VOLTAGE_DROP, drop);

        // upper-bound flows carrying the upper-bound losses
        let p_up_bot = LinExpr::var(p[l]).plus(&children_sum(grid, l, &a.p_up), 1.0);
        let q_up_bot = LinExpr::var(q[l]).plus(&children_sum(grid, l, &a.q_up), 1.0);
        prog.eq0(tag::UPPER_FLOW, LinExpr::var(a.p_up[l]).plus(&p_up_bot, -1.0).add(-r, a.f_up[l]));
        prog.eq0(
            tag::UPPER_FLOW,
            LinExpr::var(a.q_up[l]).plus(&q_up_bot, -1.0).add(-x, a.f_up[l]).plus(&vu, b).add(b, v[l]),
        );

        // upper-bound current, bottom end
        prog.abs_bound(tag::ABS_SLACK, a.abs_p_bot[l], &p_low_bot);
        prog.abs_bound(tag::ABS_SLACK, a.abs_p_bot[l], &p_up_bot);
        prog.abs_bound(tag::ABS_SLACK, a.abs_q_bot[l], &q_low_bot.clone().add(-b, a.v_up[l]));
        prog.abs_bound(tag::ABS_SLACK, a.abs_q_bot[l], &q_up_bot.clone().add(-b, v[l]));
        prog.rotated(
            tag::UPPER_CURRENT_BOTTOM,
            LinExpr::var(a.f_up[l]),
            LinExpr::var(v[l]),
            vec![LinExpr::var(a.abs_p_bot[l]), LinExpr::var(a.abs_q_bot[l])],
        );

        // upper-bound current, top end
        prog.abs_bound(tag::ABS_SLACK, a.abs_p_top[l], &LinExpr::var(a.p_low[l]));
        prog.abs_bound(tag::ABS_SLACK, a.abs_p_top[l], &LinExpr::var(a.p_up[l]));
        prog.abs_bound(tag::ABS_SLACK, a.abs_q_top[l], &LinExpr::var(a.q_low[l]).plus(&vbu, b));
        prog.abs_bound(tag::ABS_SLACK, a.abs_q_top[l], &LinExpr::var(a.q_up[l]).plus(&vu, b));
        prog.rotated(
            tag::UPPER_CURRENT_TOP,
            LinExpr::var(a.f_up[l]),
            vu.clone(),
            vec![LinExpr::var(a.abs_p_top[l]), LinExpr::var(a.abs_q_top[l])],
        );

        if opts.voltage {
            prog.ge0(tag::VOLTAGE_MIN, LinExpr::var(v[l]).offset(-grid.v_min));
            prog.ge0(tag::AUX_VOLTAGE_MAX, LinExpr::constant(grid.v_max).add(-1.0, a.v_up[l]));
        }
        if opts.ampacity {
            let imax = LinExpr::constant(line.i_max_sq);
            prog.abs_bound(tag::ABS_SLACK, a.amp_q_bot[l], &q_low_bot);
            prog.abs_bound(tag::ABS_SLACK, a.amp_q_bot[l], &q_up_bot);
            prog.rotated(
                tag::AUX_AMPACITY_BOTTOM,
                LinExpr::var(v[l]),
                imax.clone(),
                vec![LinExpr::var(a.abs_p_bot[l]), LinExpr::var(a.amp_q_bot[l])],
            );
            prog.abs_bound(tag::ABS_SLACK, a.amp_q_top[l], &LinExpr::var(a.q_low[l]));
            prog.abs_bound(tag::ABS_SLACK, a.amp_q_top[l], &LinExpr::var(a.q_up[l]));
            prog.rotated(
                tag::AUX_AMPACITY_TOP,
                vu,
                imax,
                vec![LinExpr::var(a.abs_p_top[l]), LinExpr::var(a.amp_q_top[l])],
            );
        }

        prog.ge(tag::AUX_TECHNICAL, &LinExpr::var(a.p_up[l]), &LinExpr::var(pt[l]));
        prog.ge0(tag::AUX_FLOW_LIMIT, LinExpr::constant(bounds.p_max[l]).add(-1.0, a.p_up[l]));
        prog.ge(tag::AUX_TECHNICAL, &LinExpr::var(a.q_up[l]), &LinExpr::var(qt[l]));
        prog.ge0(tag::AUX_FLOW_LIMIT, LinExpr::constant(bounds.q_max[l]).add(-1.0, a.q_up[l]));
    }
    objective(&mut prog, cost, &p, &q, pt[0]);
    let layout = Layout { kind: ModelKind::AugmentedRelaxed, p, q, p_top: pt, q_top: qt, v, f, aux: Some(aux) };
    Ok(OpfModel { program: prog, layout, grid: grid.clone() })
}
