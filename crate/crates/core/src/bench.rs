//! Desk-scale experiments: the 3-bus ampacity comparison, injection sweeps
//! of the exactness conditions and the compression of the feasible set
//! caused by the auxiliary bound constraints.
//!
//! Every function returns plain data with a CSV rendering; the column
//! layouts are listed in the README and kept stable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{self, Condition, ConditionReport};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::loadflow::{solve_loadflow, terminal_currents};
use crate::matrices::{FlowLimitRule, GridMatrices, OperatingBounds};
use crate::opf::{build_ar_opf, build_r_opf, tag, CostModel, ModelOptions, OpfSolution, SolveStatus};
use crate::recovery::{lossless_bounds, recover, RecoveryOptions};

/// Relative width to which sweep and compression thresholds are localized.
pub const BISECTION_WIDTH: f64 = 1e-3;
/// A constraint counts as binding within this distance of its bound.
pub const BINDING_TOL: f64 = 1e-6;
/// Scan step of the compression search, relative to the base scale (or 1).
const COMPRESSION_STEP: f64 = 0.05;
const COMPRESSION_SCAN: usize = 400;
/// Relative width of the compression bisection.
const COMPRESSION_WIDTH: f64 = 1e-5;

// ---------------------------------------------------------------------------
// 3-bus comparison
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComparisonCase {
    /// AR-OPF, recovered to a load flow.
    AugmentedRelaxed,
    /// R-OPF optimum.
    Relaxed,
    /// AR-OPF solved on the grid stripped of its shunts.
    WithoutShunts,
}

impl ComparisonCase {
    pub const ALL: [ComparisonCase; 3] =
        [ComparisonCase::AugmentedRelaxed, ComparisonCase::Relaxed, ComparisonCase::WithoutShunts];
}

impl std::fmt::Display for ComparisonCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ComparisonCase::AugmentedRelaxed => "aropf",
            ComparisonCase::Relaxed => "ropf",
            ComparisonCase::WithoutShunts => "aropf-no-shunt",
        })
    }
}

/// Terminal currents of one case after the a-posteriori load flow on the
/// real grid, in amperes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentProfile {
    pub case: ComparisonCase,
    pub status: SolveStatus,
    /// Largest relaxation gap of the optimum before any recovery.
    pub relaxation_gap: f64,
    pub injections: Vec<(f64, f64)>,
    pub top_a: Vec<f64>,
    pub bottom_a: Vec<f64>,
    pub limit_a: Vec<f64>,
}

impl CurrentProfile {
    pub fn max_current(&self) -> f64 {
        self.top_a.iter().chain(&self.bottom_a).cloned().fold(0.0, f64::max)
    }

    /// Largest current over its line's limit, as a fraction of the limit.
    pub fn max_overload(&self) -> f64 {
        (0..self.top_a.len())
            .map(|l| self.top_a[l].max(self.bottom_a[l]) / self.limit_a[l] - 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn within_limits(&self) -> bool {
        self.max_overload() <= 0.0
    }
}

/// The 3-bus objective: import at 150, storage absorption at bus 3 at 50.
pub fn threebus_cost(grid: &RadialGrid) -> Result<CostModel> {
    CostModel::parse("[import]\nslope = 150\n[bus 3]\np = 50\n", grid)
}

/// Solves the three cases on `grid` with `cost` and evaluates each optimum
/// with the load-flow oracle on the full grid.
pub fn run_comparison(grid: &RadialGrid, cost: &CostModel) -> Result<Vec<CurrentProfile>> {
    let bounds = OperatingBounds::from_rule(grid, FlowLimitRule::LoadFlow)?;
    let opts = ModelOptions::default();
    let mut out = Vec::with_capacity(3);
    for case in ComparisonCase::ALL {
        let sol = match case {
            ComparisonCase::AugmentedRelaxed => build_ar_opf(grid, &bounds, cost, &opts)?.solve(),
            ComparisonCase::Relaxed => build_r_opf(grid, cost, &opts)?.solve(),
            ComparisonCase::WithoutShunts => {
                let bare = grid.without_shunts();
                let bare_bounds = OperatingBounds::from_rule(&bare, FlowLimitRule::LoadFlow)?;
                build_ar_opf(&bare, &bare_bounds, cost, &opts)?.solve()
            }
        };
        if !sol.is_optimal() {
            return Err(Error::Solver(format!("{case}: solver returned {}", sol.status)));
        }
        let relaxation_gap = match case {
            ComparisonCase::WithoutShunts => sol.max_gap(&grid.without_shunts()),
            _ => sol.max_gap(grid),
        };
        let injections = match case {
            ComparisonCase::AugmentedRelaxed => {
                let matrices = GridMatrices::build(grid, &bounds)?;
                let trace = recover(&sol, grid, &matrices, &RecoveryOptions::default())?;
                trace.recovered.injections()
            }
            _ => sol.injections(),
        };
        out.push(profile(grid, case, sol.status, relaxation_gap, injections)?);
    }
    Ok(out)
}

/// [`run_comparison`] on the bundled 3-bus grid.
pub fn run_threebus_comparison() -> Result<Vec<CurrentProfile>> {
    let grid = crate::data::threebus();
    run_comparison(&grid, &threebus_cost(&grid)?)
}

fn profile(
    grid: &RadialGrid,
    case: ComparisonCase,
    status: SolveStatus,
    relaxation_gap: f64,
    injections: Vec<(f64, f64)>,
) -> Result<CurrentProfile> {
    let state = solve_loadflow(grid, &injections)?;
    let ib = grid.base.i_base();
    let (top_a, bottom_a) =
        terminal_currents(&state, grid).into_iter().map(|(t, b)| (t.sqrt() * ib, b.sqrt() * ib)).unzip();
    let limit_a = grid.lines.iter().map(|l| l.i_max_sq.sqrt() * ib).collect();
    Ok(CurrentProfile { case, status, relaxation_gap, injections, top_a, bottom_a, limit_a })
}

pub const COMPARISON_CSV_HEADER: &str = "case,line,top_a,bottom_a,limit_a";

pub fn comparison_csv(grid: &RadialGrid, profiles: &[CurrentProfile]) -> String {
    let mut out = format!("{COMPARISON_CSV_HEADER}\n");
    for p in profiles {
        for l in 0..p.top_a.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.case,
                grid.label(l + 1),
                p.top_a[l],
                p.bottom_a[l],
                p.limit_a[l]
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Injection scaling
// ---------------------------------------------------------------------------

/// How the minimum absorption moves with the scale `k`:
/// `p_min(k) = p_max - k * w` with per-bus weights `w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingRule {
    /// `w` is each bus's share of the total active load, so `k` is the total
    /// production in p.u.
    LoadShare,
    /// `w` is the installed DG, so `k` multiplies the DG capacity.
    DgCapacity,
}

impl ScalingRule {
    /// DG scaling where the grid has DG, load shares otherwise.
    pub fn for_grid(grid: &RadialGrid) -> Self {
        if grid.buses.iter().any(|b| b.dg > 0.0) {
            ScalingRule::DgCapacity
        } else {
            ScalingRule::LoadShare
        }
    }

    pub fn weights(self, grid: &RadialGrid) -> Result<Vec<f64>> {
        let w: Vec<f64> = match self {
            ScalingRule::LoadShare => {
                let total: f64 = grid.buses.iter().map(|b| b.p_load).sum();
                if !(total > 0.0) {
                    return Err(Error::InvalidInput(format!("grid {} has no active load to share", grid.name)));
                }
                grid.buses.iter().map(|b| b.p_load / total).collect()
            }
            ScalingRule::DgCapacity => {
                if !grid.buses.iter().any(|b| b.dg > 0.0) {
                    return Err(Error::InvalidInput(format!("grid {} has no DG capacity", grid.name)));
                }
                grid.buses.iter().map(|b| b.dg).collect()
            }
        };
        Ok(w)
    }

    /// Minimum absorptions `(p_min, q_min)` at scale `k`.
    pub fn absorption(self, grid: &RadialGrid, k: f64) -> Result<Vec<(f64, f64)>> {
        let w = self.weights(grid)?;
        Ok(grid.buses.iter().zip(&w).map(|(b, w)| (b.p_max - k * w, b.q_min)).collect())
    }

    /// Scale of the grid file's own `p_min`: 0 for load shares, 1 for DG.
    pub fn base_scale(self) -> f64 {
        match self {
            ScalingRule::LoadShare => 0.0,
            ScalingRule::DgCapacity => 1.0,
        }
    }

    pub fn default_range(self) -> ScaleRange {
        match self {
            ScalingRule::LoadShare => ScaleRange { start: 0.0, stop: 2.0, points: 41 },
            ScalingRule::DgCapacity => ScaleRange { start: 1.0, stop: 10.0, points: 37 },
        }
    }
}

impl std::fmt::Display for ScalingRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScalingRule::LoadShare => "load-share",
            ScalingRule::DgCapacity => "dg",
        })
    }
}

impl std::str::FromStr for ScalingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "load-share" | "load" => Ok(ScalingRule::LoadShare),
            "dg" => Ok(ScalingRule::DgCapacity),
            other => Err(Error::InvalidInput(format!("unknown scaling rule `{other}` (load-share|dg)"))),
        }
    }
}

/// Evenly spaced scales `start..=stop`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl ScaleRange {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.stop > self.start) {
            return Err(Error::InvalidInput(format!(
                "scale range needs stop > start and at least two points, got {self:?}"
            )));
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.start + step * i as f64).collect())
    }
}

// ---------------------------------------------------------------------------
// Condition sweep
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scale: f64,
    /// `k * sum(w)` in MW.
    pub production_mw: f64,
    /// `-sum(p_min)` in MW: production net of the load.
    pub net_injection_mw: f64,
    /// Largest upper-bound voltage magnitude `sqrt(v_up)` at the minimum
    /// absorptions.
    pub max_voltage: f64,
    /// Largest load-flow voltage magnitude at the same injections.
    pub max_voltage_loadflow: f64,
    pub report: ConditionReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: String,
    pub rule: ScalingRule,
    /// Grid points, strictly increasing in scale.
    pub points: Vec<SweepPoint>,
    /// First failing scale after bisection, if any point fails.
    pub threshold: Option<SweepPoint>,
    pub first_violation: Option<Condition>,
}

impl SweepResult {
    pub const CSV_HEADER: &'static str =
        "scale,production_mw,net_injection_mw,max_voltage,max_voltage_loadflow,c1_norm,c2_norm,eta5,eta1,eta2,eta,holds";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for p in self.points.iter().chain(&self.threshold) {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.scale,
                p.production_mw,
                p.net_injection_mw,
                p.max_voltage,
                p.max_voltage_loadflow,
                p.report.to_csv_row()
            ));
        }
        out
    }

    pub fn summary(&self) -> String {
        match (&self.threshold, self.first_violation) {
            (Some(t), Some(c)) => format!(
                "{}: {c} fails first at scale {:.4} ({:.3} MW production, {:.3} MW net injection), \
                 max |V_up| = {:.4} p.u., max load-flow |V| = {:.4} p.u.",
                self.grid, t.scale, t.production_mw, t.net_injection_mw, t.max_voltage, t.max_voltage_loadflow
            ),
            _ => format!("{}: all conditions hold over the whole range", self.grid),
        }
    }
}

/// Condition report at scale `k`, with flow limits from `rule`.
pub fn sweep_point(grid: &RadialGrid, scaling: ScalingRule, flow: &OperatingBounds, k: f64) -> Result<SweepPoint> {
    let s = scaling.absorption(grid, k)?;
    let bounds = flow.with_min_absorption(s.iter().map(|x| x.0).collect(), s.iter().map(|x| x.1).collect())?;
    let report = conditions::evaluate(grid, &bounds)?;
    let (_, _, v_up) = lossless_bounds(grid, &s)?;
    // NaN where the load flow has no solution
    let max_voltage_loadflow =
        solve_loadflow(grid, &s).map(|st| st.v.iter().cloned().fold(grid.v0, f64::max).sqrt()).unwrap_or(f64::NAN);
    let mw = grid.base.s_base / 1e6;
    let weight_sum: f64 = scaling.weights(grid)?.iter().sum();
    Ok(SweepPoint {
        scale: k,
        production_mw: k * weight_sum * mw,
        net_injection_mw: -s.iter().map(|x| x.0).sum::<f64>() * mw,
        max_voltage: v_up.iter().cloned().fold(grid.v0, f64::max).sqrt(),
        max_voltage_loadflow,
        report,
    })
}

/// Evaluates the conditions on `range` in parallel and bisects the first
/// holding/failing pair down to [`BISECTION_WIDTH`]. Flow limits follow
/// `110 %` of the downstream load.
pub fn sweep_conditions(grid: &RadialGrid, rule: ScalingRule, range: ScaleRange) -> Result<SweepResult> {
    let flow = OperatingBounds::from_rule(grid, FlowLimitRule::Pct110)?;
    let points =
        range.values()?.into_par_iter().map(|k| sweep_point(grid, rule, &flow, k)).collect::<Result<Vec<_>>>()?;

    let first_fail = points.iter().position(|p| !p.report.holds);
    let threshold = match first_fail {
        None => None,
        Some(0) => Some(points[0].clone()),
        Some(i) => {
            let (mut lo, mut hi) = (points[i - 1].scale, points[i].clone());
            while hi.scale - lo > BISECTION_WIDTH * hi.scale.abs().max(f64::MIN_POSITIVE) {
                let mid = sweep_point(grid, rule, &flow, 0.5 * (lo + hi.scale))?;
                if mid.report.holds {
                    lo = mid.scale;
                } else {
                    hi = mid;
                }
            }
            Some(hi)
        }
    };
    let first_violation = threshold.as_ref().and_then(|t| worst_failure(&t.report));
    Ok(SweepResult { grid: grid.name.clone(), rule, points, threshold, first_violation })
}

/// Failing condition with the largest utilization.
pub fn worst_failure(report: &ConditionReport) -> Option<Condition> {
    report.failures().into_iter().max_by(|a, b| report.utilization(*a).total_cmp(&report.utilization(*b)))
}

// ---------------------------------------------------------------------------
// Compression
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompressionMode {
    /// Ampacity rows dropped; the upper-bound voltage limit binds.
    Voltage,
    /// Voltage rows dropped; an auxiliary ampacity row binds.
    Ampacity,
}

impl std::fmt::Display for CompressionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CompressionMode::Voltage => "voltage",
            CompressionMode::Ampacity => "ampacity",
        })
    }
}

impl std::str::FromStr for CompressionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "voltage" => Ok(CompressionMode::Voltage),
            "ampacity" => Ok(CompressionMode::Ampacity),
            other => Err(Error::InvalidInput(format!("unknown compression mode `{other}` (voltage|ampacity)"))),
        }
    }
}

/// Auxiliary and load-flow quantities per line (per downstream bus) at the
/// largest feasible scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionRow {
    pub voltage_aux: f64,
    pub voltage: f64,
    /// Squared currents over the squared ampacity, `|S|^2 / (v I_max^2)`,
    /// at the terminal where the auxiliary current is larger; the load-flow
    /// value is taken at the same terminal.
    pub current_aux: f64,
    pub current: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionResult {
    pub grid: String,
    pub mode: CompressionMode,
    pub rule: ScalingRule,
    /// Largest scale at which the AR-OPF is still feasible.
    pub scale: f64,
    pub production_mw: f64,
    /// Bus (voltage mode) or line (ampacity mode) index, 0-based over lines.
    pub binding: usize,
    pub binding_label: String,
    /// Auxiliary quantity at the binding entity: `|V_up|` in p.u., or the
    /// squared auxiliary current over the squared ampacity.
    pub auxiliary: f64,
    /// The load flow's value of the same quantity.
    pub original: f64,
    /// Voltage mode: `max(|V_up| - |V|)` over buses. Ampacity mode:
    /// `auxiliary - original` at the binding line.
    pub gap: f64,
    pub rows: Vec<CompressionRow>,
}

impl CompressionResult {
    pub const CSV_HEADER: &'static str = "bus,voltage_aux,voltage,current_aux,current";

    pub fn to_csv(&self, grid: &RadialGrid) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for (l, r) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                grid.label(l + 1),
                r.voltage_aux,
                r.voltage,
                r.current_aux,
                r.current
            ));
        }
        out
    }

    pub fn summary(&self) -> String {
        let what = match self.mode {
            CompressionMode::Voltage => "bus",
            CompressionMode::Ampacity => "line",
        };
        format!(
            "{} {} mode: {what} {} binds at scale {:.4} ({:.3} MW production); auxiliary {:.6}, load flow {:.6}, gap {:.6}",
            self.grid, self.mode, self.binding_label, self.scale, self.production_mw, self.auxiliary, self.original, self.gap
        )
    }
}

/// Raises the injections with `rule` and bisects on the scale for the last
/// point where the AR-OPF with fixed injections is feasible. There, one of
/// the kept limits binds; the gap between its auxiliary quantity and the
/// load flow at the same injections measures how much the auxiliary
/// constraints shrink the feasible set.
pub fn quantify_compression(grid: &RadialGrid, mode: CompressionMode, rule: ScalingRule) -> Result<CompressionResult> {
    let flow = OperatingBounds::from_rule(grid, FlowLimitRule::Pct110)?;
    let cost = CostModel::import_only(grid.len(), 1.0);
    let solve = |k: f64| -> Result<OpfSolution> {
        let s = rule.absorption(grid, k)?;
        let bounds = flow.with_min_absorption(s.iter().map(|x| x.0).collect(), s.iter().map(|x| x.1).collect())?;
        let opts = ModelOptions {
            ampacity: mode == CompressionMode::Ampacity,
            voltage: mode == CompressionMode::Voltage,
            fixed_injection: Some(s),
        };
        let mut model = build_ar_opf(grid, &bounds, &cost, &opts)?;
        // the flow caps only serve the exactness argument and must not be
        // what stops the injection increase
        model.program.drop_tags(&[tag::AUX_FLOW_LIMIT]);
        Ok(model.solve())
    };

    // The feasible scales form an interval; scan for its first point, then
    // for the first infeasible point above it.
    let base = rule.base_scale();
    let step = COMPRESSION_STEP * base.max(1.0);
    let mut lo = None;
    let mut hi = None;
    for i in 0..COMPRESSION_SCAN {
        let k = base + step * i as f64;
        let sol = solve(k)?;
        match (&lo, sol.is_optimal()) {
            (_, true) => lo = Some((k, sol)),
            (Some(_), false) => {
                hi = Some(k);
                break;
            }
            (None, false) => {}
        }
    }
    let (mut lo, mut best) =
        lo.ok_or_else(|| Error::InvalidInput(format!("{}: AR-OPF infeasible over the scan", grid.name)))?;
    let mut hi =
        hi.ok_or_else(|| Error::InvalidInput(format!("{}: no {mode} limit binds over the scan", grid.name)))?;
    while hi - lo > COMPRESSION_WIDTH * hi.abs() {
        let mid = 0.5 * (lo + hi);
        let sol = solve(mid)?;
        if sol.is_optimal() {
            lo = mid;
            best = sol;
        } else {
            hi = mid;
        }
    }
    compression_at(grid, mode, rule, lo, &best)
}

fn compression_at(
    grid: &RadialGrid,
    mode: CompressionMode,
    rule: ScalingRule,
    scale: f64,
    sol: &OpfSolution,
) -> Result<CompressionResult> {
    let aux = sol.aux.as_ref().ok_or_else(|| Error::InvalidInput("AR-OPF solution without auxiliary values".into()))?;
    let state = solve_loadflow(grid, &sol.injections())?;
    let aux_currents = sol.auxiliary_currents(grid).expect("aux values present");
    let oracle_currents = terminal_currents(&state, grid);
    let rows: Vec<CompressionRow> = (0..grid.len())
        .map(|l| {
            let imax = grid.lines[l].i_max_sq;
            let (at, ab) = aux_currents[l];
            let (ot, ob) = oracle_currents[l];
            let (ca, co) = if at >= ab { (at, ot) } else { (ab, ob) };
            CompressionRow {
                voltage_aux: aux.v_up[l].sqrt(),
                voltage: state.v[l].sqrt(),
                current_aux: ca / imax,
                current: co / imax,
            }
        })
        .collect();
    let argmax = |f: &dyn Fn(&CompressionRow) -> f64| {
        (0..rows.len()).max_by(|&a, &b| f(&rows[a]).total_cmp(&f(&rows[b]))).expect("grid has lines")
    };
    let (binding, gap) = match mode {
        CompressionMode::Voltage => {
            let b = argmax(&|r| r.voltage_aux);
            let gap = rows.iter().map(|r| r.voltage_aux - r.voltage).fold(f64::NEG_INFINITY, f64::max);
            (b, gap)
        }
        CompressionMode::Ampacity => {
            let b = argmax(&|r| r.current_aux);
            (b, rows[b].current_aux - rows[b].current)
        }
    };
    let (auxiliary, original) = match mode {
        CompressionMode::Voltage => (rows[binding].voltage_aux, rows[binding].voltage),
        CompressionMode::Ampacity => (rows[binding].current_aux, rows[binding].current),
    };
    if gap < -BINDING_TOL {
        return Err(Error::InvalidInput(format!(
            "{}: negative compression gap {gap:e}: auxiliary values fail to bound the load flow",
            grid.name
        )));
    }
    let weight_sum: f64 = rule.weights(grid)?.iter().sum();
    Ok(CompressionResult {
        grid: grid.name.clone(),
        mode,
        rule,
        scale,
        production_mw: scale * weight_sum * grid.base.s_base / 1e6,
        binding,
        binding_label: grid.label(binding + 1).to_string(),
        auxiliary,
        original,
        gap,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;

    #[test]
    fn base_scale_reproduces_grid_absorption() {
        for grid in [data::ieee34(), data::cigre_mv()] {
            let rule = ScalingRule::for_grid(&grid);
            let s = rule.absorption(&grid, rule.base_scale()).unwrap();
            for (b, (p, q)) in grid.buses.iter().zip(s) {
                assert!((p - b.p_min).abs() < 1e-12, "{}: {p} vs {}", grid.name, b.p_min);
                assert_eq!(q, b.q_min);
            }
        }
    }

    #[test]
    fn load_share_scale_is_total_production() {
        let grid = data::ieee34();
        let flow = OperatingBounds::from_rule(&grid, FlowLimitRule::Pct110).unwrap();
        let pt = sweep_point(&grid, ScalingRule::LoadShare, &flow, 0.4).unwrap();
        assert!((pt.production_mw - 2.0).abs() < 1e-9);
        let load: f64 = grid.buses.iter().map(|b| b.p_load).sum::<f64>() * 5.0;
        assert!((pt.net_injection_mw - (2.0 - load)).abs() < 1e-9);
    }

    #[test]
    fn sweep_points_increase_and_bracket_threshold() {
        let grid = data::cigre_mv();
        let r =
            sweep_conditions(&grid, ScalingRule::DgCapacity, ScaleRange { start: 1.0, stop: 8.0, points: 8 }).unwrap();
        assert!(r.points.windows(2).all(|w| w[0].scale < w[1].scale));
        assert!(r.points[0].report.holds);
        let t = r.threshold.as_ref().unwrap();
        assert!(!t.report.holds);
        let flow = OperatingBounds::from_rule(&grid, FlowLimitRule::Pct110).unwrap();
        let below =
            sweep_point(&grid, ScalingRule::DgCapacity, &flow, t.scale * (1.0 - 2.0 * BISECTION_WIDTH)).unwrap();
        assert!(below.report.holds);
        assert_eq!(r.first_violation, worst_failure(&t.report));
        assert_eq!(r.to_csv().lines().count(), 1 + r.points.len() + 1);
    }

    #[test]
    fn sweep_point_matches_standalone_check() {
        let grid = data::ieee34();
        let flow = OperatingBounds::from_rule(&grid, FlowLimitRule::Pct110).unwrap();
        let pt = sweep_point(&grid, ScalingRule::LoadShare, &flow, 0.6).unwrap();
        let s = ScalingRule::LoadShare.absorption(&grid, 0.6).unwrap();
        let bounds =
            flow.with_min_absorption(s.iter().map(|x| x.0).collect(), s.iter().map(|x| x.1).collect()).unwrap();
        assert_eq!(pt.report, conditions::evaluate(&grid, &bounds).unwrap());
    }

    #[test]
    fn bad_ranges_rejected() {
        assert!(ScaleRange { start: 1.0, stop: 1.0, points: 5 }.values().is_err());
        assert!(ScaleRange { start: 0.0, stop: 1.0, points: 1 }.values().is_err());
        assert!(ScalingRule::DgCapacity.weights(&data::ieee34()).is_err());
        assert!(ScalingRule::LoadShare.weights(&data::threebus()).is_err());
    }

    #[test]
    fn threebus_profiles() {
        let grid = data::threebus();
        let profiles = run_threebus_comparison().unwrap();
        assert_eq!(profiles.len(), 3);
        assert!(profiles[0].within_limits());
        assert!(!profiles[1].within_limits());
        assert_eq!(comparison_csv(&grid, &profiles).lines().count(), 1 + 3 * 3);
    }
}
