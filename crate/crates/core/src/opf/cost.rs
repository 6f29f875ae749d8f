use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::kvtext::{self, Writer};

/// Separable convex cost: per-bus affine plus diagonal quadratic terms in
/// the absorptions, and an affine import cost on the slack-line flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub p_linear: Vec<f64>,
    pub q_linear: Vec<f64>,
    pub p_quadratic: Vec<f64>,
    pub q_quadratic: Vec<f64>,
    /// Price of active power drawn from the slack; must be positive.
    pub import_slope: f64,
    pub constant: f64,
}

impl CostModel {
    /// Only the import term: minimizes the power drawn from the slack.
    pub fn import_only(n: usize, slope: f64) -> Self {
        Self {
            p_linear: vec![0.0; n],
            q_linear: vec![0.0; n],
            p_quadratic: vec![0.0; n],
            q_quadratic: vec![0.0; n],
            import_slope: slope,
            constant: 0.0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for v in [&self.p_linear, &self.q_linear, &self.p_quadratic, &self.q_quadratic] {
            if v.len() != n {
                return Err(Error::InvalidInput(format!("cost vectors must have {n} entries, got {}", v.len())));
            }
        }
        if !(self.import_slope > 0.0) {
            return Err(Error::InvalidInput(format!(
                "import cost must be strictly increasing, slope = {}",
                self.import_slope
            )));
        }
        if self.p_quadratic.iter().chain(&self.q_quadratic).any(|&c| c < 0.0) {
            return Err(Error::InvalidInput("quadratic cost coefficients must be non-negative".into()));
        }
        Ok(())
    }

    pub fn evaluate(&self, p: &[f64], q: &[f64], p_import: f64) -> f64 {
        let mut total = self.constant + self.import_slope * p_import;
        for l in 0..p.len() {
            total += self.p_linear[l] * p[l] + self.q_linear[l] * q[l];
            total += self.p_quadratic[l] * p[l] * p[l] + self.q_quadratic[l] * q[l] * q[l];
        }
        total
    }

    /// Cost file:
    ///
    /// ```text
    /// [import]
    /// slope = 150
    /// [bus 3]
    /// p = 50        # linear in active absorption
    /// q = 0
    /// p2 = 0        # quadratic
    /// q2 = 0
    /// ```
    pub fn parse(text: &str, grid: &RadialGrid) -> Result<Self> {
        let index: HashMap<&str, usize> = grid.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut cost = Self::import_only(grid.len(), f64::NAN);
        for s in kvtext::parse(text)? {
            match s.kind.as_str() {
                "import" => {
                    s.check_keys(&["slope", "constant"])?;
                    cost.import_slope = s.require_f64("slope")?;
                    cost.constant = s.get_f64("constant")?.unwrap_or(0.0);
                }
                "bus" => {
                    s.check_keys(&["p", "q", "p2", "q2"])?;
                    let label = s.label.as_deref().unwrap_or("");
                    let i = match index.get(label) {
                        Some(&i) if i > 0 => i - 1,
                        _ => return Err(Error::Syntax { line: s.line, msg: format!("unknown bus `{label}`") }),
                    };
                    cost.p_linear[i] = s.get_f64("p")?.unwrap_or(0.0);
                    cost.q_linear[i] = s.get_f64("q")?.unwrap_or(0.0);
                    cost.p_quadratic[i] = s.get_f64("p2")?.unwrap_or(0.0);
                    cost.q_quadratic[i] = s.get_f64("q2")?.unwrap_or(0.0);
                }
                other => return Err(Error::Syntax { line: s.line, msg: format!("unknown section [{other}]") }),
            }
        }
        if cost.import_slope.is_nan() {
            return Err(Error::Syntax { line: 1, msg: "missing [import] section".into() });
        }
        cost.validate(grid.len())?;
        Ok(cost)
    }

    pub fn read(path: impl AsRef<std::path::Path>, grid: &RadialGrid) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, grid)
    }

    pub fn write(&self, grid: &RadialGrid) -> String {
        let mut w = Writer::new();
        w.section("import", None).kv("slope", self.import_slope);
        if self.constant != 0.0 {
            w.kv("constant", self.constant);
        }
        for l in 0..grid.len() {
            let terms = [
                ("p", self.p_linear[l]),
                ("q", self.q_linear[l]),
                ("p2", self.p_quadratic[l]),
                ("q2", self.q_quadratic[l]),
            ];
            if terms.iter().any(|t| t.1 != 0.0) {
                w.section("bus", Some(grid.label(l + 1)));
                for (k, v) in terms.into_iter().filter(|t| t.1 != 0.0) {
                    w.kv(k, v);
                }
            }
        }
        w.finish()
    }
}
