//! Radial grid model: buses, Pi-model lines, per-unit bases and the
//! topology matrices `G` (adjacency) and `H` (path closure).
//!
//! Labeling follows the usual radial convention: bus `0` is the slack, the
//! other buses are `1..=L`, and line `l` is the one whose downstream end is
//! bus `l`. Vectors indexed by bus or line are 0-based, so slot `i` holds
//! bus/line `i + 1`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convention for the base current used to express ampacities in per-unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurrentBase {
    /// `S_base / (sqrt(3) V_base)`, line-to-line base voltage and three-phase power.
    ThreePhase,
    /// `S_base / V_base`.
    SinglePhase,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerUnitBase {
    /// Volt-amperes.
    pub s_base: f64,
    /// Volts.
    pub v_base: f64,
    /// Hertz, used for reactance and susceptance conversion.
    pub f_base: f64,
    pub current: CurrentBase,
}

impl PerUnitBase {
    pub fn new(s_base: f64, v_base: f64, f_base: f64) -> Result<Self> {
        let base = Self { s_base, v_base, f_base, current: CurrentBase::ThreePhase };
        base.validate()?;
        Ok(base)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, val) in [("s_base", self.s_base), ("v_base", self.v_base), ("f_base", self.f_base)] {
            if !(val > 0.0 && val.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {val}")));
            }
        }
        Ok(())
    }

    /// Ohms.
    pub fn z_base(&self) -> f64 {
        self.v_base * self.v_base / self.s_base
    }

    /// Amperes.
    pub fn i_base(&self) -> f64 {
        match self.current {
            CurrentBase::ThreePhase => self.s_base / (3f64.sqrt() * self.v_base),
            CurrentBase::SinglePhase => self.s_base / self.v_base,
        }
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.f_base
    }
}

impl Default for PerUnitBase {
    fn default() -> Self {
        Self { s_base: 1e6, v_base: 1e3, f_base: 50.0, current: CurrentBase::ThreePhase }
    }
}

/// Converts per-km cable data to per-unit Pi parameters.
///
/// `r_ohm_km` in ohm/km, `l_mh_km` in mH/km, `c_uf_km` in uF/km, `length_km`
/// in km. The returned `b` is the susceptance at each end of the line, i.e.
/// half of the total line charging.
pub fn to_per_unit(
    r_ohm_km: f64,
    l_mh_km: f64,
    c_uf_km: f64,
    length_km: f64,
    base: &PerUnitBase,
) -> Result<(f64, f64, f64)> {
    base.validate()?;
    for (name, val) in [("R", r_ohm_km), ("L", l_mh_km), ("C", c_uf_km), ("length", length_km)] {
        if !(val > 0.0 && val.is_finite()) {
            return Err(Error::InvalidInput(format!("{name} must be positive, got {val}")));
        }
    }
    let z_base = base.z_base();
    let w = base.omega();
    let r = r_ohm_km * length_km / z_base;
    let x = w * l_mh_km * 1e-3 * length_km / z_base;
    let b = w * c_uf_km * 1e-6 * length_km / 2.0 * z_base;
    Ok((r, x, b))
}

/// Inverse of [`to_per_unit`]: `(ohm/km, mH/km, uF/km)`.
pub fn from_per_unit(r: f64, x: f64, b: f64, length_km: f64, base: &PerUnitBase) -> (f64, f64, f64) {
    let z_base = base.z_base();
    let w = base.omega();
    (r * z_base / length_km, x * z_base / (w * 1e-3 * length_km), 2.0 * b / (z_base * w * 1e-6 * length_km))
}

/// Admissible set for a bus injection on top of the box bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InjectionSet {
    Box,
    /// `q = +/- tan(acos(rho)) * p`; `lagging` picks the sign where `q` and `p`
    /// have the same sign.
    FixedPowerFactor {
        rho: f64,
        lagging: bool,
    },
    /// `|q| <= tan(acos(rho)) * |p|`; the sign of `p` must be fixed by the box.
    MinPowerFactor {
        rho: f64,
    },
}

impl InjectionSet {
    pub fn rho(&self) -> Option<f64> {
        match *self {
            InjectionSet::Box => None,
            InjectionSet::FixedPowerFactor { rho, .. } | InjectionSet::MinPowerFactor { rho } => Some(rho),
        }
    }

    /// `tan(acos(rho))`, the reactive-to-active ratio at power factor `rho`.
    pub fn q_ratio(&self) -> Option<f64> {
        self.rho().map(|rho| (1.0 - rho * rho).sqrt() / rho)
    }
}

/// Non-slack bus. Powers are absorptions in per-unit (negative = injection).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub injection_set: InjectionSet,
    /// Nominal demand used for load shares and downstream-load flow limits.
    pub p_load: f64,
    pub q_load: f64,
    /// Installed generation capacity, the profile for DG-penetration sweeps.
    pub dg: f64,
}

impl Bus {
    pub fn fixed(id: usize, p: f64, q: f64) -> Self {
        Self {
            id,
            p_min: p,
            p_max: p,
            q_min: q,
            q_max: q,
            injection_set: InjectionSet::Box,
            p_load: p.max(0.0),
            q_load: q.max(0.0),
            dg: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: usize,
    pub up: usize,
    pub r: f64,
    pub x: f64,
    /// Susceptance at each end; the line's total charging is `2 b`.
    pub b: f64,
    /// Square of the ampacity.
    pub i_max_sq: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub allow_zero_shunt: bool,
    pub check_voltage_band: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { allow_zero_shunt: false, check_voltage_band: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub name: String,
    /// Squared slack voltage magnitude.
    pub v0: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub base: PerUnitBase,
    /// External label of bus `i` (index 0 is the slack).
    pub labels: Vec<String>,
    pub options: ValidationOptions,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
}

impl RadialGrid {
    /// Builds and validates a grid whose buses and lines are already labeled
    /// `1..=L` (in any order in the input vectors).
    pub fn new(
        name: impl Into<String>,
        v0: f64,
        v_min: f64,
        v_max: f64,
        mut buses: Vec<Bus>,
        mut lines: Vec<Line>,
        base: PerUnitBase,
        options: ValidationOptions,
    ) -> Result<Self> {
        let n = lines.len();
        if n == 0 {
            return Err(Error::Validation("grid has no lines".into()));
        }
        if buses.len() != n {
            return Err(Error::Validation(format!("{} buses for {} lines", buses.len(), n)));
        }
        lines.sort_by_key(|l| l.id);
        buses.sort_by_key(|b| b.id);
        for (i, (line, bus)) in lines.iter().zip(&buses).enumerate() {
            if line.id != i + 1 {
                return Err(Error::Validation(format!(
                    "line ids must be 1..={n} with one line per bus; found line {} at position {}",
                    line.id,
                    i + 1
                )));
            }
            if bus.id != i + 1 {
                return Err(Error::Validation(format!("bus ids must be 1..={n}; found bus {}", bus.id)));
            }
            if line.up > n || line.up == line.id {
                return Err(Error::Validation(format!("line {} has invalid upstream bus {}", line.id, line.up)));
            }
        }
        let parent: Vec<Option<usize>> = lines.iter().map(|l| if l.up == 0 { None } else { Some(l.up - 1) }).collect();
        let mut children = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Validation(format!(
                "exactly one bus must hang from the slack bus, found {}",
                roots.len()
            )));
        }
        if roots[0] != 0 {
            return Err(Error::Validation(format!(
                "the bus connected to the slack must be bus 1, found bus {}",
                roots[0] + 1
            )));
        }
        let mut order = Vec::with_capacity(n);
        order.push(0);
        let mut head = 0;
        while head < order.len() {
            let k = order[head];
            head += 1;
            order.extend(children[k].iter().copied());
        }
        if order.len() != n {
            let reached: std::collections::HashSet<usize> = order.iter().copied().collect();
            let lost = (0..n).find(|i| !reached.contains(i)).unwrap();
            return Err(Error::Validation(format!(
                "bus {} is not connected to the slack bus (cycle in upstream relation)",
                lost + 1
            )));
        }
        let labels = (0..=n).map(|i| i.to_string()).collect();
        let grid =
            Self { name: name.into(), v0, v_min, v_max, buses, lines, base, labels, options, parent, children, order };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        if !(self.v0 > 0.0) {
            return Err(Error::Validation(format!("v0 must be positive, got {}", self.v0)));
        }
        if self.options.check_voltage_band && !(0.0 < self.v_min && self.v_min < self.v0 && self.v0 < self.v_max) {
            return Err(Error::Validation(format!(
                "voltage band must satisfy 0 < v_min < v0 < v_max, got {} / {} / {}",
                self.v_min, self.v0, self.v_max
            )));
        }
        for line in &self.lines {
            let shunt_ok = if self.options.allow_zero_shunt { line.b >= 0.0 } else { line.b > 0.0 };
            if !(line.r > 0.0 && line.x > 0.0 && shunt_ok && line.i_max_sq > 0.0) {
                return Err(Error::Validation(format!(
                    "line {}: r, x, i_max_sq must be > 0 and b {} 0 (r={}, x={}, b={}, i_max_sq={})",
                    line.id,
                    if self.options.allow_zero_shunt { ">=" } else { ">" },
                    line.r,
                    line.x,
                    line.b,
                    line.i_max_sq
                )));
            }
        }
        for bus in &self.buses {
            if bus.p_min > bus.p_max || bus.q_min > bus.q_max {
                return Err(Error::Validation(format!("bus {}: inverted injection bounds", bus.id)));
            }
            if let Some(rho) = bus.injection_set.rho() {
                if !(rho > 0.0 && rho <= 1.0) {
                    return Err(Error::Validation(format!("bus {}: power factor {} outside (0, 1]", bus.id, rho)));
                }
            }
        }
        Ok(())
    }

    /// Number of lines (= number of non-slack buses).
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Upstream bus index of line `i` (0-based), `None` for the slack.
    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Buses in breadth-first order from the slack; parents precede children.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn r(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.r).collect()
    }

    pub fn x(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.x).collect()
    }

    pub fn b(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.b).collect()
    }

    /// Value of the upstream squared voltage of line `i` given bus voltages.
    pub fn v_up(&self, v: &[f64], i: usize) -> f64 {
        match self.parent[i] {
            Some(k) => v[k],
            None => self.v0,
        }
    }

    /// Indices of bus `i` and all buses below it.
    pub fn subtree(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut head = 0;
        while head < out.len() {
            let k = out[head];
            head += 1;
            out.extend(self.children[k].iter().copied());
        }
        out
    }

    /// The same grid with every line shunt removed.
    pub fn without_shunts(&self) -> Self {
        let mut g = self.clone();
        for l in &mut g.lines {
            l.b = 0.0;
        }
        g.options.allow_zero_shunt = true;
        g
    }

    /// Scales every line's `r`, `x`, `b` by `k`, i.e. all line lengths by `k`.
    pub fn with_length_scale(&self, k: f64) -> Self {
        let mut g = self.clone();
        for l in &mut g.lines {
            l.r *= k;
            l.x *= k;
            l.b *= k;
        }
        g
    }

    pub fn label(&self, bus: usize) -> &str {
        &self.labels[bus]
    }
}

/// `G[k][l] = 1` iff bus `k` is upstream of line `l`.
pub fn adjacency(grid: &RadialGrid) -> DMatrix<f64> {
    let n = grid.len();
    let mut g = DMatrix::zeros(n, n);
    for l in 0..n {
        if let Some(k) = grid.parent(l) {
            g[(k, l)] = 1.0;
        }
    }
    g
}

/// `H = I + G + G^2 + ...`, the path closure of a nilpotent adjacency matrix.
pub fn closure(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let mut h = DMatrix::identity(n, n);
    let mut power = DMatrix::identity(n, n);
    for _ in 0..n {
        power = &power * g;
        if power.iter().all(|&x| x == 0.0) {
            return Ok(h);
        }
        h += &power;
    }
    Err(Error::Validation("adjacency matrix is not nilpotent; the grid is not radial".into()))
}

/// Path closure computed by walking upstream from every bus.
pub fn closure_by_paths(grid: &RadialGrid) -> DMatrix<f64> {
    let n = grid.len();
    let mut h = DMatrix::zeros(n, n);
    for l in 0..n {
        let mut k = Some(l);
        while let Some(j) = k {
            h[(j, l)] = 1.0;
            k = grid.parent(j);
        }
    }
    h
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub fn line(id: usize, up: usize) -> Line {
        Line { id, up, r: 0.01, x: 0.02, b: 0.001, i_max_sq: 4.0 }
    }

    pub fn grid_from_ups(ups: &[usize]) -> RadialGrid {
        let lines = ups.iter().enumerate().map(|(i, &u)| line(i + 1, u)).collect();
        let buses = (1..=ups.len()).map(|i| Bus::fixed(i, 0.01, 0.005)).collect();
        RadialGrid::new("t", 1.0, 0.81, 1.21, buses, lines, PerUnitBase::default(), ValidationOptions::default())
            .unwrap()
    }

    #[test]
    fn table_one_conversion() {
        let base = PerUnitBase::new(5e6, 24.9e3, 50.0).unwrap();
        assert_relative_eq!(base.z_base(), 124.002, epsilon = 1e-9);
        let (r, x, b) = to_per_unit(0.193, 0.38, 0.24, 1.0, &base).unwrap();
        // hand arithmetic: 0.193 / 124.002, 2*pi*50*0.38e-3 / 124.002, pi*50*0.24e-6 * 124.002
        assert_relative_eq!(r, 1.556426509249851e-3, max_relative = 1e-12);
        assert_relative_eq!(x, 9.627306078644873e-4, max_relative = 1e-12);
        assert_relative_eq!(b, 4.674765266765298e-3, max_relative = 1e-12);
    }

    #[test]
    fn conversion_is_linear_in_length_and_invertible() {
        let base = PerUnitBase::new(25e6, 20e3, 50.0).unwrap();
        let one = to_per_unit(0.501, 2.279, 0.1512, 1.3, &base).unwrap();
        let two = to_per_unit(0.501, 2.279, 0.1512, 2.6, &base).unwrap();
        assert_eq!(two.0, 2.0 * one.0);
        assert_eq!(two.1, 2.0 * one.1);
        assert_eq!(two.2, 2.0 * one.2);
        let (rr, ll, cc) = from_per_unit(one.0, one.1, one.2, 1.3, &base);
        assert_relative_eq!(rr, 0.501, max_relative = 1e-12);
        assert_relative_eq!(ll, 2.279, max_relative = 1e-12);
        assert_relative_eq!(cc, 0.1512, max_relative = 1e-12);
    }

    #[test]
    fn conversion_rejects_zero_length() {
        let base = PerUnitBase::default();
        assert!(to_per_unit(0.1, 0.1, 0.1, 0.0, &base).is_err());
        assert!(to_per_unit(-0.1, 0.1, 0.1, 1.0, &base).is_err());
    }

    #[test]
    fn chain_adjacency_and_closure() {
        let g = grid_from_ups(&[0, 1, 2]);
        let a = adjacency(&g);
        let expect = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 0., 0., 1., 0., 0., 0.]);
        assert_eq!(a, expect);
        let h = closure(&a).unwrap();
        let upper = DMatrix::from_row_slice(3, 3, &[1., 1., 1., 0., 1., 1., 0., 0., 1.]);
        assert_eq!(h, upper);
        assert_eq!(h, closure_by_paths(&g));
    }

    #[test]
    fn star_adjacency_and_closure() {
        let g = grid_from_ups(&[0, 1, 1]);
        let a = adjacency(&g);
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(0, 2)], 1.0);
        assert_eq!(a.iter().filter(|&&x| x != 0.0).count(), 2);
        let h = closure(&a).unwrap();
        assert_eq!(h[(0, 1)], 1.0);
        assert_eq!(h[(0, 2)], 1.0);
        assert_eq!(h[(1, 2)], 0.0);
    }

    #[test]
    fn single_line_is_zero_adjacency() {
        let g = grid_from_ups(&[0]);
        assert_eq!(adjacency(&g), DMatrix::zeros(1, 1));
        assert_eq!(closure(&adjacency(&g)).unwrap(), DMatrix::identity(1, 1));
    }

    #[test]
    fn rejects_cycle_and_second_root() {
        let lines = vec![line(1, 0), line(2, 3), line(3, 2)];
        let buses = (1..=3).map(|i| Bus::fixed(i, 0.0, 0.0)).collect();
        let err = RadialGrid::new("c", 1.0, 0.81, 1.21, buses, lines, PerUnitBase::default(), Default::default());
        assert!(matches!(err, Err(Error::Validation(_))));

        let lines = vec![line(1, 0), line(2, 0)];
        let buses = (1..=2).map(|i| Bus::fixed(i, 0.0, 0.0)).collect();
        let err = RadialGrid::new("r", 1.0, 0.81, 1.21, buses, lines, PerUnitBase::default(), Default::default());
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn zero_shunt_needs_opt_in() {
        let mut l = line(1, 0);
        l.b = 0.0;
        let buses = vec![Bus::fixed(1, 0.0, 0.0)];
        let strict = RadialGrid::new(
            "z",
            1.0,
            0.81,
            1.21,
            buses.clone(),
            vec![l.clone()],
            PerUnitBase::default(),
            Default::default(),
        );
        assert!(strict.is_err());
        let opts = ValidationOptions { allow_zero_shunt: true, ..Default::default() };
        assert!(RadialGrid::new("z", 1.0, 0.81, 1.21, buses, vec![l], PerUnitBase::default(), opts).is_ok());
    }

    #[test]
    fn voltage_band_check_is_configurable() {
        let buses = vec![Bus::fixed(1, 0.0, 0.0)];
        let lines = vec![line(1, 0)];
        assert!(RadialGrid::new(
            "v",
            1.0,
            1.1,
            0.9,
            buses.clone(),
            lines.clone(),
            PerUnitBase::default(),
            Default::default()
        )
        .is_err());
        let opts = ValidationOptions { check_voltage_band: false, ..Default::default() };
        assert!(RadialGrid::new("v", 1.0, 1.1, 0.9, buses, lines, PerUnitBase::default(), opts).is_ok());
    }
}
