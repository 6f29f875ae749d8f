//! Ex-ante exactness conditions C1-C5.
//!
//! C1 and C2 are Frobenius-norm bounds. C3-C5 ask for a ratio `eta < 0.5`
//! with `lhs <= eta * rhs` entry-wise; the report stores the smallest such
//! ratio.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::matrices::{GridMatrices, OperatingBounds};

/// Upper bound (exclusive) on the ratio conditions.
pub const ETA_LIMIT: f64 = 0.5;
/// Relative size below which an rhs entry counts as a structural zero.
pub const STRUCTURAL_ZERO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl Condition {
    pub const ALL: [Condition; 5] = [Condition::C1, Condition::C2, Condition::C3, Condition::C4, Condition::C5];
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `||H^T M||_F`.
    pub c1_norm: f64,
    /// `||E||_F`; infinite when C1 fails and `E` does not exist.
    pub c2_norm: f64,
    /// Smallest ratio for `D E <= eta D`.
    pub eta5: f64,
    /// Smallest ratio for `(H diag(r) E) o H <= eta H diag(r)`.
    pub eta1: f64,
    /// Smallest ratio for `H diag(r) E E <= eta H diag(r) E`.
    pub eta2: f64,
    pub holds: bool,
    /// `max(eta1, eta2, eta5)`.
    pub eta: f64,
}

impl ConditionReport {
    pub fn passes(&self, c: Condition) -> bool {
        match c {
            Condition::C1 => self.c1_norm < 1.0,
            Condition::C2 => self.c2_norm < 1.0,
            Condition::C3 => self.eta5 < ETA_LIMIT,
            Condition::C4 => self.eta1 < ETA_LIMIT,
            Condition::C5 => self.eta2 < ETA_LIMIT,
        }
    }

    pub fn failures(&self) -> Vec<Condition> {
        Condition::ALL.into_iter().filter(|&c| !self.passes(c)).collect()
    }

    /// Left-hand side over threshold: below 1 means the condition passes.
    pub fn utilization(&self, c: Condition) -> f64 {
        match c {
            Condition::C1 => self.c1_norm,
            Condition::C2 => self.c2_norm,
            Condition::C3 => self.eta5 / ETA_LIMIT,
            Condition::C4 => self.eta1 / ETA_LIMIT,
            Condition::C5 => self.eta2 / ETA_LIMIT,
        }
    }

    fn c1_failed(c1_norm: f64) -> Self {
        Self {
            c1_norm,
            c2_norm: f64::INFINITY,
            eta5: f64::INFINITY,
            eta1: f64::INFINITY,
            eta2: f64::INFINITY,
            holds: false,
            eta: f64::INFINITY,
        }
    }

    pub fn to_text(&self) -> String {
        let mark = |c| if self.passes(c) { "pass" } else { "FAIL" };
        format!(
            "C1  ||H^T M||_F      = {:<14.6e} (< 1)    {}\n\
             C2  ||E||_F          = {:<14.6e} (< 1)    {}\n\
             C3  eta5 (D E / D)    = {:<14.6e} (< 0.5)  {}\n\
             C4  eta1              = {:<14.6e} (< 0.5)  {}\n\
             C5  eta2              = {:<14.6e} (< 0.5)  {}\n\
             eta = {:.6e}   all conditions hold: {}\n",
            self.c1_norm,
            mark(Condition::C1),
            self.c2_norm,
            mark(Condition::C2),
            self.eta5,
            mark(Condition::C3),
            self.eta1,
            mark(Condition::C4),
            self.eta2,
            mark(Condition::C5),
            self.eta,
            self.holds
        )
    }

    pub const CSV_HEADER: &'static str = "c1_norm,c2_norm,eta5,eta1,eta2,eta,holds";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{}",
            self.c1_norm, self.c2_norm, self.eta5, self.eta1, self.eta2, self.eta, self.holds
        )
    }
}

pub fn check_c1(h: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    (h.transpose() * m).norm()
}

pub fn check_c2(e: &DMatrix<f64>) -> f64 {
    e.norm()
}

/// Smallest `eta` with `lhs <= eta * rhs` entry-wise.
///
/// Entries where `rhs <= STRUCTURAL_ZERO * max|rhs|` are skipped if `lhs` is
/// also that small, and make the ratio infinite otherwise.
pub fn check_ratio_condition(lhs: &DMatrix<f64>, rhs: &DMatrix<f64>) -> f64 {
    assert_eq!(lhs.shape(), rhs.shape(), "ratio condition on mismatched shapes");
    let scale = rhs.amax();
    let tol = STRUCTURAL_ZERO * scale;
    let mut eta = 0.0f64;
    for (&a, &b) in lhs.iter().zip(rhs.iter()) {
        if b > tol {
            eta = eta.max(a / b);
        } else if a > tol {
            return f64::INFINITY;
        }
    }
    eta
}

pub fn check_all(m: &GridMatrices) -> ConditionReport {
    let c1_norm = check_c1(&m.h, &m.m);
    let c2_norm = check_c2(&m.e);
    let eta5 = check_ratio_condition(&(&m.d * &m.e), &m.d);
    let hr = &m.h * DMatrix::from_diagonal(&m.r);
    let hre = &hr * &m.e;
    let eta1 = check_ratio_condition(&hre.component_mul(&m.h), &hr);
    let eta2 = check_ratio_condition(&(&hre * &m.e), &hre);
    let eta = eta1.max(eta2).max(eta5);
    let holds = c1_norm < 1.0 && c2_norm < 1.0 && eta < ETA_LIMIT;
    ConditionReport { c1_norm, c2_norm, eta5, eta1, eta2, holds, eta }
}

/// Builds the matrices and checks every condition. A C1 failure yields a
/// report with the remaining margins infinite instead of an error.
pub fn evaluate(grid: &RadialGrid, bounds: &OperatingBounds) -> Result<ConditionReport> {
    match GridMatrices::build(grid, bounds) {
        Ok(m) => Ok(check_all(&m)),
        Err(Error::ConditionsNotSatisfied { norm }) => Ok(ConditionReport::c1_failed(norm)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::grid_from_ups;

    fn bounds(grid: &RadialGrid) -> OperatingBounds {
        let n = grid.len();
        OperatingBounds::new(vec![0.5; n], vec![0.5; n], vec![-0.1; n], vec![-0.05; n], grid.v_min, grid.v_max).unwrap()
    }

    #[test]
    fn ratio_trivial_cases() {
        let rhs = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 3.0]);
        assert_eq!(check_ratio_condition(&DMatrix::zeros(2, 2), &rhs), 0.0);
        assert_eq!(check_ratio_condition(&rhs, &rhs), 1.0);
        let mut lhs = rhs.clone() * 0.25;
        assert_eq!(check_ratio_condition(&lhs, &rhs), 0.25);
        lhs[(0, 1)] = 1e-3;
        assert_eq!(check_ratio_condition(&lhs, &rhs), f64::INFINITY);
        lhs[(0, 1)] = 1e-14;
        assert_eq!(check_ratio_condition(&lhs, &rhs), 0.25);
    }

    #[test]
    fn shunt_free_c1_is_zero() {
        let g = grid_from_ups(&[0, 1, 2]).without_shunts();
        let r = evaluate(&g, &bounds(&g)).unwrap();
        assert_eq!(r.c1_norm, 0.0);
        assert!(r.passes(Condition::C1));
    }

    #[test]
    fn c1_scales_quadratically_with_length() {
        let g = grid_from_ups(&[0, 1, 2, 1]);
        let base = evaluate(&g, &bounds(&g)).unwrap().c1_norm;
        for k in [2.0, 4.0] {
            let scaled = evaluate(&g.with_length_scale(k), &bounds(&g)).unwrap().c1_norm;
            approx::assert_relative_eq!(scaled, k * k * base, max_relative = 1e-12);
        }
    }

    #[test]
    fn tiny_grid_satisfies_everything() {
        let g = grid_from_ups(&[0, 1, 2, 1, 4]);
        let r = evaluate(&g, &bounds(&g)).unwrap();
        assert!(r.holds, "{}", r.to_text());
        assert_eq!(r.eta, r.eta1.max(r.eta2).max(r.eta5));
        let vanishing = evaluate(&g.with_length_scale(1e-6), &bounds(&g)).unwrap();
        assert!(vanishing.c2_norm < 1e-4);
    }

    #[test]
    fn norms_grow_with_length() {
        let g = grid_from_ups(&[0, 1, 2, 2]);
        let mut prev = evaluate(&g, &bounds(&g)).unwrap();
        for k in [2.0, 4.0] {
            let r = evaluate(&g.with_length_scale(k), &bounds(&g)).unwrap();
            assert!(r.c1_norm >= prev.c1_norm && r.c2_norm >= prev.c2_norm);
            prev = r;
        }
    }

    #[test]
    fn c1_failure_reports_instead_of_erroring() {
        let g = grid_from_ups(&[0, 1, 2]).with_length_scale(400.0);
        let r = evaluate(&g, &bounds(&g)).unwrap();
        assert!(r.c1_norm >= 1.0);
        assert!(!r.holds);
        assert_eq!(r.failures()[0], Condition::C1);
    }

    #[test]
    fn reports_are_deterministic() {
        let g = grid_from_ups(&[0, 1, 1, 3]);
        let a = evaluate(&g, &bounds(&g)).unwrap();
        let b = evaluate(&g, &bounds(&g)).unwrap();
        assert_eq!(a.to_csv_row(), b.to_csv_row());
    }
}
