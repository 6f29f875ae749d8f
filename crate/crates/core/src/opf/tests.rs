use approx::assert_relative_eq;

use super::model::tag;
use super::*;
use crate::data;
use crate::grid::tests::grid_from_ups;
use crate::matrices::{FlowLimitRule, OperatingBounds};
use crate::RadialGrid;

fn threebus_cost(grid: &RadialGrid) -> CostModel {
    CostModel::parse("[import]\nslope = 150\n[bus 3]\np = 50\n", grid).unwrap()
}

fn threebus_aropf() -> (RadialGrid, OpfSolution) {
    let grid = data::threebus();
    let bounds = OperatingBounds::from_rule(&grid, FlowLimitRule::LoadFlow).unwrap();
    let model = build_ar_opf(&grid, &bounds, &threebus_cost(&grid), &ModelOptions::default()).unwrap();
    (grid, model.solve())
}

#[test]
fn single_line_cone_count() {
    let grid = grid_from_ups(&[0]);
    let bounds = OperatingBounds::from_rule(&grid, FlowLimitRule::Pct110).unwrap();
    let model = build_ar_opf(&grid, &bounds, &CostModel::import_only(1, 1.0), &ModelOptions::default()).unwrap();
    let prog = &model.program;
    assert_eq!(prog.cones.len(), 5);
    assert_eq!(prog.count_tag(tag::RELAXATION), 1);
    assert_eq!(prog.count_tag(tag::UPPER_CURRENT_BOTTOM) + prog.count_tag(tag::UPPER_CURRENT_TOP), 2);
    assert_eq!(prog.count_tag(tag::AUX_AMPACITY_BOTTOM) + prog.count_tag(tag::AUX_AMPACITY_TOP), 2);
    assert_eq!(prog.count_tag(tag::AUX_TECHNICAL), 2);
    assert_eq!(prog.count_tag(tag::AUX_FLOW_LIMIT), 2);

    let r = build_r_opf(&grid, &CostModel::import_only(1, 1.0), &ModelOptions::default()).unwrap();
    assert_eq!(r.program.cones.len(), 3);
}

#[test]
fn threebus_aropf_is_exact() {
    let (grid, sol) = threebus_aropf();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(sol.max_gap(&grid) <= 1e-6, "gap {}", sol.max_gap(&grid));
    assert!(sol.inexact_lines(&grid, GAP_THRESHOLD).is_empty());
    assert_eq!(&sol.p[..2], &[-0.21, -0.252]);
}

#[test]
fn threebus_ropf_is_inexact() {
    let grid = data::threebus();
    let model = build_r_opf(&grid, &threebus_cost(&grid), &ModelOptions::default()).unwrap();
    let sol = model.solve();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(!sol.inexact_lines(&grid, GAP_THRESHOLD).is_empty());
}

#[test]
fn aux_values_bracket_physical_ones() {
    let (grid, sol) = threebus_aropf();
    let a = sol.aux.as_ref().unwrap();
    let tol = 1e-8;
    for l in 0..grid.len() {
        assert!(sol.f[l] <= a.f_up[l] + tol);
        assert!(sol.v[l] <= a.v_up[l] + tol);
        assert!(a.p_low[l] <= sol.p_top[l] + tol && sol.p_top[l] <= a.p_up[l] + tol);
        assert!(a.q_low[l] <= sol.q_top[l] + tol && sol.q_top[l] <= a.q_up[l] + tol);
    }
}

#[test]
fn infeasible_voltage_band() {
    let mut grid = grid_from_ups(&[0, 1]);
    grid.v_min = 1.3;
    grid.v_max = 1.2;
    let sol = build_r_opf(&grid, &CostModel::import_only(2, 1.0), &ModelOptions::default()).unwrap().solve();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn zero_objective_is_optimal() {
    let grid = grid_from_ups(&[0, 1, 1]);
    let mut model = build_r_opf(&grid, &CostModel::import_only(3, 1.0), &ModelOptions::default()).unwrap();
    model.program.objective.clear();
    assert_eq!(model.solve().status, SolveStatus::Optimal);
}

#[test]
fn inconsistent_bounds_rejected() {
    let mut grid = grid_from_ups(&[0]);
    grid.buses[0].p_min = 1.0;
    grid.buses[0].p_max = 0.0;
    assert!(build_r_opf(&grid, &CostModel::import_only(1, 1.0), &ModelOptions::default()).is_err());
}

#[test]
fn inflated_current_shows_in_gap() {
    let (grid, mut sol) = threebus_aropf();
    let before = sol.exactness_gap(&grid);
    sol.f[1] += 0.1;
    let after = sol.exactness_gap(&grid);
    assert_relative_eq!(after[1] - before[1], 0.1, epsilon = 1e-12);
    assert_eq!(sol.inexact_lines(&grid, GAP_THRESHOLD), vec![1]);
}

#[test]
fn solution_file_round_trip() {
    let (grid, sol) = threebus_aropf();
    let back = OpfSolution::parse(&sol.to_text(&grid), &grid).unwrap();
    assert_eq!(back, sol);
}

#[test]
fn fixed_power_factor_holds() {
    let mut grid = grid_from_ups(&[0, 1]);
    grid.buses[1].p_min = 0.0;
    grid.buses[1].p_max = 0.05;
    grid.buses[1].q_min = -1.0;
    grid.buses[1].q_max = 1.0;
    grid.buses[1].injection_set = crate::InjectionSet::FixedPowerFactor { rho: 0.8, lagging: true };
    let mut cost = CostModel::import_only(2, 1.0);
    cost.p_linear[1] = -10.0;
    let sol = build_r_opf(&grid, &cost, &ModelOptions::default()).unwrap().solve();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_relative_eq!(sol.q[1], 0.75 * sol.p[1], epsilon = 1e-9);
    assert_relative_eq!(sol.p[1], 0.05, epsilon = 1e-7);
}

#[test]
fn higher_import_price_lowers_import() {
    let grid = data::threebus();
    let bounds = OperatingBounds::from_rule(&grid, FlowLimitRule::LoadFlow).unwrap();
    let mut last = f64::INFINITY;
    for slope in [60.0, 150.0, 400.0] {
        let mut cost = threebus_cost(&grid);
        cost.import_slope = slope;
        let sol = build_ar_opf(&grid, &bounds, &cost, &ModelOptions::default()).unwrap().solve();
        assert!(sol.p_top[0] <= last + 1e-9);
        last = sol.p_top[0];
    }
}
