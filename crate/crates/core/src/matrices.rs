//! Derived matrices and bound vectors used by the exactness conditions and
//! by the recovery iteration.
//!
//! Everything is dense. `C` comes from an LU solve; the Neumann series is
//! exposed only so tests can cross-check it.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{adjacency, closure, RadialGrid};
use crate::loadflow::solve_loadflow;

/// How default line flow limits `P_max`, `Q_max` are derived.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowLimitRule {
    /// 110 % of the nominal active/reactive load downstream of each line.
    Pct110,
    /// 110 % of the largest `|P|`, `|Q|` seen in two load flows, one at
    /// maximum absorption and one at maximum injection.
    LoadFlow,
}

impl std::str::FromStr for FlowLimitRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pct110" => Ok(Self::Pct110),
            "loadflow" => Ok(Self::LoadFlow),
            other => Err(Error::InvalidInput(format!("unknown flow-limit rule `{other}` (pct110|loadflow)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingBounds {
    /// Per line.
    pub p_max: Vec<f64>,
    pub q_max: Vec<f64>,
    /// Per bus, minimum absorption.
    pub p_min: Vec<f64>,
    pub q_min: Vec<f64>,
    pub v_min: f64,
    pub v_max: f64,
}

const LIMIT_MARGIN: f64 = 1.1;

impl OperatingBounds {
    pub fn new(
        p_max: Vec<f64>,
        q_max: Vec<f64>,
        p_min: Vec<f64>,
        q_min: Vec<f64>,
        v_min: f64,
        v_max: f64,
    ) -> Result<Self> {
        let b = Self { p_max, q_max, p_min, q_min, v_min, v_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.p_max.len();
        if self.q_max.len() != n || self.p_min.len() != n || self.q_min.len() != n {
            return Err(Error::InvalidInput("operating bound vectors differ in length".into()));
        }
        for (l, (&p, &q)) in self.p_max.iter().zip(&self.q_max).enumerate() {
            if !(p > 0.0 && q > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "line {}: flow limits must be positive (P_max = {p}, Q_max = {q})",
                    l + 1
                )));
            }
        }
        if !(self.v_min > 0.0) {
            return Err(Error::InvalidInput(format!("v_min must be positive, got {}", self.v_min)));
        }
        if !(self.v_min < self.v_max) {
            return Err(Error::InvalidInput(format!("v_min {} must be below v_max {}", self.v_min, self.v_max)));
        }
        Ok(())
    }

    /// Bounds from the grid's own injection limits and a flow-limit rule.
    pub fn from_rule(grid: &RadialGrid, rule: FlowLimitRule) -> Result<Self> {
        let (p_max, q_max) = match rule {
            FlowLimitRule::Pct110 => downstream_load_limits(grid),
            FlowLimitRule::LoadFlow => loadflow_limits(grid)?,
        };
        Self::new(
            p_max,
            q_max,
            grid.buses.iter().map(|b| b.p_min).collect(),
            grid.buses.iter().map(|b| b.q_min).collect(),
            grid.v_min,
            grid.v_max,
        )
    }

    /// Same flow limits, new minimum absorptions.
    pub fn with_min_absorption(&self, p_min: Vec<f64>, q_min: Vec<f64>) -> Result<Self> {
        Self::new(self.p_max.clone(), self.q_max.clone(), p_min, q_min, self.v_min, self.v_max)
    }
}

fn downstream_load_limits(grid: &RadialGrid) -> (Vec<f64>, Vec<f64>) {
    let n = grid.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for &l in grid.order().iter().rev() {
        p[l] += grid.buses[l].p_load;
        q[l] += grid.buses[l].q_load;
        if let Some(k) = grid.parent(l) {
            p[k] += p[l];
            q[k] += q[l];
        }
    }
    (p.iter().map(|x| LIMIT_MARGIN * x).collect(), q.iter().map(|x| LIMIT_MARGIN * x).collect())
}

fn loadflow_limits(grid: &RadialGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.len();
    let mut p = vec![0.0f64; n];
    let mut q = vec![0.0f64; n];
    let extremes: [Vec<(f64, f64)>; 2] = [
        grid.buses.iter().map(|b| (b.p_max, b.q_max)).collect(),
        grid.buses.iter().map(|b| (b.p_min, b.q_min)).collect(),
    ];
    for s in &extremes {
        let state = solve_loadflow(grid, s)?;
        for l in 0..n {
            p[l] = p[l].max(state.p_top[l].abs()).max(state.p_bot[l].abs());
            q[l] = q[l].max(state.q_top[l].abs()).max(state.q_bot[l].abs());
        }
    }
    Ok((p.iter().map(|x| LIMIT_MARGIN * x).collect(), q.iter().map(|x| LIMIT_MARGIN * x).collect()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridMatrices {
    /// Line resistances, reactances and per-end susceptances.
    pub r: DVector<f64>,
    pub x: DVector<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// Half the total susceptance incident to each bus.
    pub b_sum: DVector<f64>,
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub pi: DVector<f64>,
    pub rho: DVector<f64>,
    pub theta: DVector<f64>,
    /// `||H^T M||_F`.
    pub c1_norm: f64,
}

impl GridMatrices {
    /// Builds every matrix; fails with [`Error::ConditionsNotSatisfied`]
    /// when `I - G^T - M` cannot be inverted through C1.
    pub fn build(grid: &RadialGrid, bounds: &OperatingBounds) -> Result<Self> {
        if bounds.p_max.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "bounds are for {} lines, grid has {}",
                bounds.p_max.len(),
                grid.len()
            )));
        }
        bounds.validate()?;
        let g = adjacency(grid);
        let h = closure(&g)?;
        let b_sum = build_b(grid);
        let m = build_m(grid, &h, &b_sum);
        let c1_norm = (h.transpose() * &m).norm();
        let c = build_c(&m, &g, &h)?;
        let d = build_d(grid, &c, &h);
        let (pi, rho, theta) = build_bound_vectors(grid, bounds, &h, &g)?;
        let f = build_f(grid, &h, &b_sum, &d);
        let e = build_e(grid, &h, &f, &d, &pi, &rho, &theta);
        Ok(Self {
            r: DVector::from_vec(grid.r()),
            x: DVector::from_vec(grid.x()),
            b: DVector::from_vec(grid.b()),
            g,
            h,
            b_sum,
            m,
            c,
            d,
            e,
            f,
            pi,
            rho,
            theta,
            c1_norm,
        })
    }

    pub fn len(&self) -> usize {
        self.h.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.nrows() == 0
    }

    pub fn named_matrices(&self) -> Vec<(&'static str, DMatrix<f64>)> {
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        vec![
            ("G", self.g.clone()),
            ("H", self.h.clone()),
            ("B", col(&self.b_sum)),
            ("M", self.m.clone()),
            ("C", self.c.clone()),
            ("D", self.d.clone()),
            ("F", self.f.clone()),
            ("E", self.e.clone()),
            ("pi", col(&self.pi)),
            ("rho", col(&self.rho)),
            ("theta", col(&self.theta)),
        ]
    }

    /// Writes one `<name>.csv` per matrix into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, m) in self.named_matrices() {
            let path = dir.join(format!("{name}.csv"));
            std::fs::write(&path, matrix_csv(&m))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// `B_l = b_l + sum of b_m over the lines m leaving bus l`.
pub fn build_b(grid: &RadialGrid) -> DVector<f64> {
    let mut b = DVector::from_vec(grid.b());
    for (m, line) in grid.lines.iter().enumerate() {
        if let Some(k) = grid.parent(m) {
            b[k] += line.b;
        }
    }
    b
}

pub fn build_m(grid: &RadialGrid, h: &DMatrix<f64>, b_sum: &DVector<f64>) -> DMatrix<f64> {
    let x = DVector::from_vec(grid.x());
    let mut m = h.clone();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            m[(i, j)] *= 2.0 * x[i] * b_sum[j];
        }
    }
    m
}

pub fn build_c(m: &DMatrix<f64>, g: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let norm = (h.transpose() * m).norm();
    if !(norm < 1.0) {
        return Err(Error::ConditionsNotSatisfied { norm });
    }
    let n = m.nrows();
    let a = DMatrix::identity(n, n) - g.transpose() - m;
    a.lu().try_inverse().ok_or(Error::ConditionsNotSatisfied { norm })
}

/// `(I + H^T M + (H^T M)^2 + ...) H^T` truncated after `terms` powers.
pub fn neumann_c(m: &DMatrix<f64>, h: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let k = h.transpose() * m;
    let mut sum = DMatrix::identity(n, n);
    let mut power = DMatrix::identity(n, n);
    for _ in 1..terms {
        power = &power * &k;
        sum += &power;
    }
    sum * h.transpose()
}

pub fn build_d(grid: &RadialGrid, c: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = grid.len();
    let r = grid.r();
    let x = grid.x();
    let mut inner = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let strict = h[(i, j)] - if i == j { 1.0 } else { 0.0 };
            inner[(i, j)] = 2.0 * strict * (r[i] * r[j] + x[i] * x[j]);
        }
        inner[(i, i)] += r[i] * r[i] + x[i] * x[i];
    }
    c * inner
}

pub fn build_bound_vectors(
    grid: &RadialGrid,
    bounds: &OperatingBounds,
    h: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    if !(bounds.v_min > 0.0) {
        return Err(Error::InvalidInput(format!("v_min must be positive, got {}", bounds.v_min)));
    }
    let n = grid.len();
    let b = DVector::from_vec(grid.b());
    let hp = h * DVector::from_row_slice(&bounds.p_min);
    let hq = h * DVector::from_row_slice(&bounds.q_min);
    let vmax = DVector::from_element(n, bounds.v_max);
    let shunt = h * DMatrix::from_diagonal(&b) * ((DMatrix::identity(n, n) + g.transpose()) * vmax);
    let q_term = hq - shunt;
    let pi = DVector::from_fn(n, |l, _| bounds.p_max[l].max(hp[l].abs()) / bounds.v_min);
    let rho = DVector::from_fn(n, |l, _| (bounds.q_max[l] + b[l] * bounds.v_max).max(q_term[l].abs()) / bounds.v_min);
    let theta = pi.component_mul(&pi) + rho.component_mul(&rho);
    Ok((pi, rho, theta))
}

pub fn build_f(grid: &RadialGrid, h: &DMatrix<f64>, b_sum: &DVector<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let x = DVector::from_vec(grid.x());
    h * DMatrix::from_diagonal(&x) + h * DMatrix::from_diagonal(b_sum) * d
}

pub fn build_e(
    grid: &RadialGrid,
    h: &DMatrix<f64>,
    f: &DMatrix<f64>,
    d: &DMatrix<f64>,
    pi: &DVector<f64>,
    rho: &DVector<f64>,
    theta: &DVector<f64>,
) -> DMatrix<f64> {
    let r = DVector::from_vec(grid.r());
    DMatrix::from_diagonal(&(2.0 * pi)) * h * DMatrix::from_diagonal(&r)
        + DMatrix::from_diagonal(&(2.0 * rho)) * f
        + DMatrix::from_diagonal(theta) * d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::grid_from_ups;
    use approx::assert_relative_eq;

    fn loose_bounds(grid: &RadialGrid) -> OperatingBounds {
        let n = grid.len();
        OperatingBounds::new(vec![0.5; n], vec![0.5; n], vec![-0.1; n], vec![-0.05; n], grid.v_min, grid.v_max).unwrap()
    }

    fn bounded(ups: &[usize]) -> (RadialGrid, GridMatrices) {
        let g = grid_from_ups(ups);
        let m = GridMatrices::build(&g, &loose_bounds(&g)).unwrap();
        (g, m)
    }

    #[test]
    fn b_counts_incident_lines() {
        let g = grid_from_ups(&[0, 1, 2]);
        let b = build_b(&g);
        assert_eq!(b.as_slice(), &[0.002, 0.002, 0.001]);
    }

    #[test]
    fn b_satisfies_incidence_identity() {
        for ups in [&[0, 1, 2][..], &[0, 1, 1, 2, 2, 3], &[0]] {
            let g = grid_from_ups(ups);
            let a = adjacency(&g);
            let bd = DMatrix::from_diagonal(&DVector::from_vec(g.b()));
            let lhs = &a * &bd * a.transpose();
            let rhs = DMatrix::from_diagonal(&build_b(&g)) - bd;
            assert!((lhs - rhs).amax() <= 1e-14);
        }
    }

    #[test]
    fn m_matches_elementwise_formula() {
        let (g, mats) = bounded(&[0, 1, 1, 3]);
        let x = g.x();
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(mats.m[(i, j)], 2.0 * x[i] * mats.h[(i, j)] * mats.b_sum[j]);
            }
        }
    }

    #[test]
    fn single_line_closed_forms() {
        let (g, mats) = bounded(&[0]);
        let (r, x, b) = (g.lines[0].r, g.lines[0].x, g.lines[0].b);
        assert_relative_eq!(mats.m[(0, 0)], 2.0 * x * b);
        assert_relative_eq!(mats.c[(0, 0)], 1.0 / (1.0 - 2.0 * x * b), max_relative = 1e-14);
        assert_relative_eq!(mats.d[(0, 0)], (r * r + x * x) / (1.0 - 2.0 * x * b), max_relative = 1e-14);
    }

    #[test]
    fn shunt_free_limit_collapses() {
        let g = grid_from_ups(&[0, 1, 2, 2]).without_shunts();
        let mats = GridMatrices::build(&g, &loose_bounds(&g)).unwrap();
        assert_eq!(mats.m, DMatrix::zeros(4, 4));
        assert!((&mats.c - mats.h.transpose()).amax() < 1e-15);
        let x = DMatrix::from_diagonal(&DVector::from_vec(g.x()));
        assert!((&mats.f - &mats.h * x).amax() < 1e-15);
        let single = grid_from_ups(&[0]).without_shunts();
        let ms = GridMatrices::build(&single, &loose_bounds(&single)).unwrap();
        let l = &single.lines[0];
        assert_relative_eq!(ms.d[(0, 0)], l.r * l.r + l.x * l.x);
    }

    #[test]
    fn c_inverts_and_matches_neumann_series() {
        let (_, mats) = bounded(&[0, 1, 2, 1, 4]);
        let n = mats.len();
        let a = DMatrix::identity(n, n) - mats.g.transpose() - &mats.m;
        assert!((&a * &mats.c - DMatrix::identity(n, n)).amax() < 1e-12);
        let series = neumann_c(&mats.m, &mats.h, 20);
        assert!((series - &mats.c).amax() < 1e-12);
        assert!(mats.c.iter().all(|&v| v >= -1e-14));
    }

    #[test]
    fn c_refuses_when_c1_fails() {
        let mut g = grid_from_ups(&[0, 1, 2]);
        for l in &mut g.lines {
            l.x = 5.0;
            l.b = 0.5;
        }
        let bounds = loose_bounds(&g);
        assert!(matches!(GridMatrices::build(&g, &bounds), Err(Error::ConditionsNotSatisfied { norm }) if norm >= 1.0));
    }

    // Voltage response to a unit bump of f on one line, straight from the
    // linear branch equations with the bump injected as series losses.
    #[test]
    fn d_matches_perturbation_of_linear_branch_equations() {
        let (g, mats) = bounded(&[0, 1, 1, 3]);
        let n = g.len();
        // v = v0 C e1 - 2 C diag(r) H p - 2 C diag(x) H (q - b-terms) - D f: the
        // f-dependence is linear, so v(f + e_k) - v(f) = -D e_k.
        let solve_v = |fv: &DVector<f64>| -> DVector<f64> {
            // fixed point of the flow and voltage equations with given f and no injections
            let r = g.r();
            let x = g.x();
            let b = g.b();
            let mut v = DVector::from_element(n, g.v0);
            for _ in 0..200 {
                let mut p = vec![0.0; n];
                let mut q = vec![0.0; n];
                for &l in g.order().iter().rev() {
                    let vu = g.v_up(v.as_slice(), l);
                    p[l] += r[l] * fv[l];
                    q[l] += x[l] * fv[l] - (vu + v[l]) * b[l];
                    if let Some(k) = g.parent(l) {
                        p[k] += p[l];
                        q[k] += q[l];
                    }
                }
                let mut next = v.clone();
                for &l in g.order() {
                    let vu = g.v_up(next.as_slice(), l);
                    next[l] =
                        vu - 2.0 * (r[l] * p[l] + x[l] * (q[l] + vu * b[l])) + (r[l] * r[l] + x[l] * x[l]) * fv[l];
                }
                v = next;
            }
            v
        };
        let f0 = DVector::from_element(n, 0.01);
        let base = solve_v(&f0);
        for k in 0..n {
            let mut f1 = f0.clone();
            f1[k] += 1.0;
            let dv = solve_v(&f1) - &base;
            for i in 0..n {
                assert_relative_eq!(-dv[i], mats.d[(i, k)], max_relative = 1e-9, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn bound_vectors_trivial_case() {
        let g = grid_from_ups(&[0, 1]).without_shunts();
        let bounds =
            OperatingBounds::new(vec![0.4, 0.2], vec![0.3, 0.1], vec![0.0; 2], vec![0.0; 2], 0.81, 1.21).unwrap();
        let mats = GridMatrices::build(&g, &bounds).unwrap();
        assert_relative_eq!(mats.pi[0], 0.4 / 0.81);
        assert_relative_eq!(mats.rho[1], 0.1 / 0.81);
        for l in 0..2 {
            assert_eq!(mats.theta[l], mats.pi[l] * mats.pi[l] + mats.rho[l] * mats.rho[l]);
        }
    }

    #[test]
    fn derived_matrices_are_nonnegative() {
        let (_, mats) = bounded(&[0, 1, 2, 2, 1, 5, 6]);
        for m in [&mats.d, &mats.e, &mats.f] {
            assert!(m.iter().all(|&v| v >= -1e-14));
        }
    }

    #[test]
    fn doubling_lengths_increases_e() {
        let g = grid_from_ups(&[0, 1, 2, 1]);
        let bounds = loose_bounds(&g);
        let e1 = GridMatrices::build(&g, &bounds).unwrap().e;
        let e2 = GridMatrices::build(&g.with_length_scale(2.0), &bounds).unwrap().e;
        for (a, b) in e1.iter().zip(e2.iter()) {
            assert!(b >= a);
            if *a > 0.0 {
                assert!(b > a);
            }
        }
    }

    #[test]
    fn pct110_limits_sum_downstream_loads() {
        let mut g = grid_from_ups(&[0, 1, 1]);
        g.buses[0].p_load = 0.1;
        g.buses[1].p_load = 0.2;
        g.buses[2].p_load = 0.3;
        for b in &mut g.buses {
            b.q_load = b.p_load / 2.0;
        }
        let bounds = OperatingBounds::from_rule(&g, FlowLimitRule::Pct110).unwrap();
        assert_relative_eq!(bounds.p_max[0], 0.66);
        assert_relative_eq!(bounds.p_max[2], 0.33);
        assert_relative_eq!(bounds.q_max[0], 0.33);
    }

    #[test]
    fn csv_has_one_row_per_line() {
        let (_, mats) = bounded(&[0, 1]);
        let text = matrix_csv(&mats.d);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 2);
    }
}
