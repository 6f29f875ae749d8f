//! Python bindings. Grids are passed by bundled name or file path; results
//! come back as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use radial_opf::bench::{self, CompressionMode, ScaleRange, ScalingRule};
use radial_opf::opf::ModelOptions;
use radial_opf::recovery::{verify_recovery, RecoveryOptions};
use radial_opf::{
    build_ar_opf, build_r_opf, conditions, data, recover, solve_loadflow, CostModel, FlowLimitRule, GridMatrices,
    OperatingBounds, OpfSolution, RadialGrid,
};

fn py_err(e: radial_opf::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn grid(name: &str) -> PyResult<RadialGrid> {
    data::load(name).map_err(py_err)
}

fn flow_bounds(grid: &RadialGrid, rule: &str) -> PyResult<OperatingBounds> {
    let rule: FlowLimitRule = rule.parse().map_err(py_err)?;
    OperatingBounds::from_rule(grid, rule).map_err(py_err)
}

fn report_dict<'py>(py: Python<'py>, r: &radial_opf::ConditionReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("c1_norm", r.c1_norm)?;
    d.set_item("c2_norm", r.c2_norm)?;
    d.set_item("eta5", r.eta5)?;
    d.set_item("eta1", r.eta1)?;
    d.set_item("eta2", r.eta2)?;
    d.set_item("eta", r.eta)?;
    d.set_item("holds", r.holds)?;
    d.set_item("failures", r.failures().iter().map(|c| c.to_string()).collect::<Vec<_>>())?;
    Ok(d)
}

fn solution_dict<'py>(py: Python<'py>, sol: &OpfSolution, g: &RadialGrid) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("model", sol.model.to_string())?;
    d.set_item("status", sol.status.to_string())?;
    d.set_item("objective", sol.objective)?;
    d.set_item("p", &sol.p)?;
    d.set_item("q", &sol.q)?;
    d.set_item("p_top", &sol.p_top)?;
    d.set_item("q_top", &sol.q_top)?;
    d.set_item("v", &sol.v)?;
    d.set_item("f", &sol.f)?;
    if sol.is_optimal() {
        d.set_item("max_gap", sol.max_gap(g))?;
    }
    d.set_item("text", sol.to_text(g))?;
    Ok(d)
}

/// Names of the bundled grids.
#[pyfunction]
fn bundled_grids() -> Vec<&'static str> {
    vec!["threebus", "ieee34", "cigre_mv"]
}

/// C1-C5 report, optionally at an injection scale of the grid's sweep rule.
#[pyfunction]
#[pyo3(signature = (grid_name, pmax_rule = "pct110", scale = None))]
fn check_conditions<'py>(
    py: Python<'py>,
    grid_name: &str,
    pmax_rule: &str,
    scale: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let g = grid(grid_name)?;
    let flow = flow_bounds(&g, pmax_rule)?;
    let report = match scale {
        Some(k) => bench::sweep_point(&g, ScalingRule::for_grid(&g), &flow, k).map_err(py_err)?.report,
        None => conditions::evaluate(&g, &flow).map_err(py_err)?,
    };
    report_dict(py, &report)
}

/// Exact power flow for per-bus absorptions `(p, q)`; nominal loads if none.
#[pyfunction]
#[pyo3(signature = (grid_name, injections = None))]
fn load_flow<'py>(
    py: Python<'py>,
    grid_name: &str,
    injections: Option<Vec<(f64, f64)>>,
) -> PyResult<Bound<'py, PyDict>> {
    let g = grid(grid_name)?;
    let s = injections.unwrap_or_else(|| g.buses.iter().map(|b| (b.p_load, b.q_load)).collect());
    let st = solve_loadflow(&g, &s).map_err(py_err)?;
    let ib = g.base.i_base();
    let d = PyDict::new(py);
    d.set_item("p_top", &st.p_top)?;
    d.set_item("q_top", &st.q_top)?;
    d.set_item("v", &st.v)?;
    d.set_item("f", &st.f)?;
    d.set_item("iterations", st.iterations)?;
    d.set_item(
        "currents_a",
        radial_opf::loadflow::terminal_currents(&st, &g)
            .into_iter()
            .map(|(t, b)| (t.sqrt() * ib, b.sqrt() * ib))
            .collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Solves `"aropf"` or `"ropf"`. `cost` is cost-file text; import at slope 1
/// when omitted.
#[pyfunction]
#[pyo3(signature = (grid_name, model = "aropf", cost = None, pmax_rule = "pct110", no_shunt = false))]
fn solve<'py>(
    py: Python<'py>,
    grid_name: &str,
    model: &str,
    cost: Option<&str>,
    pmax_rule: &str,
    no_shunt: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let mut g = grid(grid_name)?;
    if no_shunt {
        g = g.without_shunts();
    }
    let cost = match cost {
        Some(text) => CostModel::parse(text, &g).map_err(py_err)?,
        None => CostModel::import_only(g.len(), 1.0),
    };
    let opts = ModelOptions::default();
    let m = match model {
        "aropf" => build_ar_opf(&g, &flow_bounds(&g, pmax_rule)?, &cost, &opts),
        "ropf" => build_r_opf(&g, &cost, &opts),
        other => return Err(PyValueError::new_err(format!("unknown model `{other}` (aropf|ropf)"))),
    }
    .map_err(py_err)?;
    let sol = py.detach(|| m.solve());
    solution_dict(py, &sol, &g)
}

/// Recovers a load flow from solution-file text.
#[pyfunction]
#[pyo3(signature = (solution, grid_name, pmax_rule = "pct110"))]
fn recover_solution<'py>(
    py: Python<'py>,
    solution: &str,
    grid_name: &str,
    pmax_rule: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let g = grid(grid_name)?;
    let input = OpfSolution::parse(solution, &g).map_err(py_err)?;
    let matrices = GridMatrices::build(&g, &flow_bounds(&g, pmax_rule)?).map_err(py_err)?;
    let trace = recover(&input, &g, &matrices, &RecoveryOptions::default()).map_err(py_err)?;
    let check = verify_recovery(&trace, &input, &g).map_err(py_err)?;
    let d = solution_dict(py, &trace.recovered, &g)?;
    d.set_item("converged", trace.converged)?;
    d.set_item("iterations", trace.iterations())?;
    d.set_item("delta_f_norms", &trace.delta_f_norms)?;
    d.set_item("oracle_deviation", check.oracle_deviation)?;
    d.set_item("input_import", check.input_import)?;
    d.set_item("recovered_import", check.recovered_import)?;
    Ok(d)
}

/// Terminal currents in amperes for the three cases on the 3-bus grid.
#[pyfunction]
fn bench_threebus<'py>(py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let profiles = py.detach(bench::run_threebus_comparison).map_err(py_err)?;
    profiles
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("case", p.case.to_string())?;
            d.set_item("top_a", &p.top_a)?;
            d.set_item("bottom_a", &p.bottom_a)?;
            d.set_item("limit_a", &p.limit_a)?;
            d.set_item("max_current", p.max_current())?;
            d.set_item("relaxation_gap", p.relaxation_gap)?;
            Ok(d)
        })
        .collect()
}

fn parse_rule(g: &RadialGrid, rule: Option<&str>) -> PyResult<ScalingRule> {
    rule.map_or_else(|| Ok(ScalingRule::for_grid(g)), |r| r.parse().map_err(py_err))
}

/// Condition sweep; returns the CSV, the summary and the threshold point.
#[pyfunction]
#[pyo3(signature = (grid_name, rule = None, start = None, stop = None, points = None))]
fn bench_sweep<'py>(
    py: Python<'py>,
    grid_name: &str,
    rule: Option<&str>,
    start: Option<f64>,
    stop: Option<f64>,
    points: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let g = grid(grid_name)?;
    let rule = parse_rule(&g, rule)?;
    let def = rule.default_range();
    let range = ScaleRange {
        start: start.unwrap_or(def.start),
        stop: stop.unwrap_or(def.stop),
        points: points.unwrap_or(def.points),
    };
    let res = py.detach(|| bench::sweep_conditions(&g, rule, range)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("csv", res.to_csv())?;
    d.set_item("summary", res.summary())?;
    d.set_item("first_violation", res.first_violation.map(|c| c.to_string()))?;
    if let Some(t) = &res.threshold {
        d.set_item("threshold_scale", t.scale)?;
        d.set_item("threshold_production_mw", t.production_mw)?;
        d.set_item("threshold_net_injection_mw", t.net_injection_mw)?;
        d.set_item("threshold_max_voltage", t.max_voltage)?;
    }
    Ok(d)
}

/// Feasible-set compression in `"voltage"` or `"ampacity"` mode.
#[pyfunction]
#[pyo3(signature = (grid_name, mode, rule = None))]
fn bench_compress<'py>(
    py: Python<'py>,
    grid_name: &str,
    mode: &str,
    rule: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let g = grid(grid_name)?;
    let mode: CompressionMode = mode.parse().map_err(py_err)?;
    let rule = parse_rule(&g, rule)?;
    let res = py.detach(|| bench::quantify_compression(&g, mode, rule)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("scale", res.scale)?;
    d.set_item("binding", res.binding_label.clone())?;
    d.set_item("auxiliary", res.auxiliary)?;
    d.set_item("original", res.original)?;
    d.set_item("gap", res.gap)?;
    d.set_item("csv", res.to_csv(&g))?;
    d.set_item("summary", res.summary())?;
    Ok(d)
}

#[pymodule]
fn radial_opf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bundled_grids, m)?)?;
    m.add_function(wrap_pyfunction!(check_conditions, m)?)?;
    m.add_function(wrap_pyfunction!(load_flow, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(recover_solution, m)?)?;
    m.add_function(wrap_pyfunction!(bench_threebus, m)?)?;
    m.add_function(wrap_pyfunction!(bench_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(bench_compress, m)?)?;
    Ok(())
}
