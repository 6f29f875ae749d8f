//! Random radial grids for the property tests.

#![allow(dead_code)]

use radial_opf::grid::{to_per_unit, ValidationOptions};
use radial_opf::opf::{build_ar_opf, ModelOptions, OpfModel};
use radial_opf::{
    conditions, Bus, CostModel, FlowLimitRule, GridMatrices, InjectionSet, Line, OperatingBounds, OpfSolution,
    PerUnitBase, RadialGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_LINES: usize = 15;

/// A random grid with bounds and cost on which C1-C5 hold.
pub struct Case {
    pub seed: u64,
    pub grid: RadialGrid,
    pub bounds: OperatingBounds,
    pub matrices: GridMatrices,
    pub cost: CostModel,
    pub eta: f64,
}

impl Case {
    pub fn model(&self) -> OpfModel {
        build_ar_opf(&self.grid, &self.bounds, &self.cost, &ModelOptions::default()).unwrap()
    }

    pub fn solve(&self) -> OpfSolution {
        self.model().solve()
    }
}

/// Tree of 2..=15 lines with cable-like parameters, loads, some flexible
/// injections and a random linear cost.
pub fn random_grid(rng: &mut ChaCha8Rng) -> RadialGrid {
    let n = rng.gen_range(2..=MAX_LINES);
    let base = PerUnitBase::new(5e6, 24.9e3, 50.0).unwrap();
    let mut lines = Vec::with_capacity(n);
    let mut buses = Vec::with_capacity(n);
    for id in 1..=n {
        // a single line leaves the slack
        let up = if id == 1 { 0 } else { rng.gen_range(1..id) };
        let km = rng.gen_range(0.2..2.0);
        let (r, x, b) =
            to_per_unit(rng.gen_range(0.1..0.4), rng.gen_range(0.25..0.45), rng.gen_range(0.15..0.35), km, &base)
                .unwrap();
        lines.push(Line { id, up, r, x, b, i_max_sq: 4.0 });

        let load = rng.gen_range(0.005..0.06);
        let q_load = load * rng.gen_range(0.0..0.5);
        let mut bus = Bus::fixed(id, load, q_load);
        if rng.gen_bool(0.4) {
            bus.p_min = load - rng.gen_range(0.02..0.15);
            bus.dg = load - bus.p_min;
            if rng.gen_bool(0.3) {
                bus.q_min = q_load - rng.gen_range(0.0..0.05);
            }
            if rng.gen_bool(0.2) && bus.p_min >= 0.0 {
                bus.injection_set = InjectionSet::MinPowerFactor { rho: 0.9 };
            }
        }
        buses.push(bus);
    }
    RadialGrid::new("random", 1.0, 0.81, 1.21, buses, lines, base, ValidationOptions::default()).unwrap()
}

pub fn random_cost(rng: &mut ChaCha8Rng, n: usize) -> CostModel {
    let mut cost = CostModel::import_only(n, rng.gen_range(50.0..150.0));
    for l in 0..n {
        cost.p_linear[l] = rng.gen_range(-20.0..60.0);
        if rng.gen_bool(0.2) {
            cost.p_quadratic[l] = rng.gen_range(0.0..100.0);
        }
    }
    cost
}

/// Next case from `seed` on whose grid every condition holds.
pub fn case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let grid = random_grid(&mut rng);
        let cost = random_cost(&mut rng, grid.len());
        let Ok(bounds) = OperatingBounds::from_rule(&grid, FlowLimitRule::LoadFlow) else {
            continue;
        };
        let Ok(report) = conditions::evaluate(&grid, &bounds) else {
            continue;
        };
        if !report.holds {
            continue;
        }
        let matrices = GridMatrices::build(&grid, &bounds).unwrap();
        return Case { seed, grid, bounds, matrices, cost, eta: report.eta };
    }
}

/// Largest amount by which `lo <= x <= hi` fails, entry-wise.
pub fn sandwich_violation(lo: &[f64], x: &[f64], hi: &[f64]) -> f64 {
    lo.iter().zip(x).zip(hi).map(|((&l, &x), &h)| (l - x).max(x - h).max(0.0)).fold(0.0, f64::max)
}

/// Worst bound violation over `f <= f_up`, `v <= v_up`,
/// `P_low <= P <= P_up` and `Q_low <= Q <= Q_up`.
pub fn bound_violation(sol: &OpfSolution) -> f64 {
    let a = sol.aux.as_ref().expect("AR-OPF solution");
    let zero = vec![f64::NEG_INFINITY; sol.f.len()];
    [
        sandwich_violation(&zero, &sol.f, &a.f_up),
        sandwich_violation(&zero, &sol.v, &a.v_up),
        sandwich_violation(&a.p_low, &sol.p_top, &a.p_up),
        sandwich_violation(&a.q_low, &sol.q_top, &a.q_up),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// AR-OPF optimum with the current of a random line forced above its
/// optimal value: a feasible point with a strict relaxation gap. The push
/// is halved until the program stays feasible.
pub fn perturbed(case: &Case, exact: &OpfSolution, rng: &mut ChaCha8Rng) -> Option<(usize, OpfSolution)> {
    let line = rng.gen_range(0..case.grid.len());
    let mut push = rng.gen_range(0.2..1.0) * exact.f[line].max(1e-3);
    for _ in 0..12 {
        let mut model = case.model();
        model.force_current(line, exact.f[line] + push);
        let sol = model.solve();
        if sol.is_optimal() && !sol.inexact_lines(&case.grid, radial_opf::opf::GAP_THRESHOLD).is_empty() {
            return Some((line, sol));
        }
        push *= 0.5;
    }
    None
}
