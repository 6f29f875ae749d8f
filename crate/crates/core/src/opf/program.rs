//! Solver-independent conic program: linear equalities, linear
//! inequalities `expr >= 0`, and second-order cones, each tagged with the
//! model constraint it came from.

use serde::{Deserialize, Serialize};

/// `sum(coef * x[var]) + constant`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(i: usize) -> Self {
        Self { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn add(mut self, coef: f64, var: usize) -> Self {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
        self
    }

    pub fn plus(mut self, other: &LinExpr, scale: f64) -> Self {
        if scale != 0.0 {
            self.terms.extend(other.terms.iter().map(|&(i, c)| (i, c * scale)));
            self.constant += other.constant * scale;
        }
        self
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        LinExpr::default().plus(self, s)
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    /// `exprs[0] >= ||exprs[1..]||`.
    SecondOrder,
    /// `exprs[0] * exprs[1] >= ||exprs[2..]||^2` with both scalars `>= 0`.
    Rotated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub kind: ConeKind,
    pub exprs: Vec<LinExpr>,
    pub tag: String,
}

impl Cone {
    /// How far the point is outside the cone (0 when inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let vals: Vec<f64> = self.exprs.iter().map(|e| e.eval(x)).collect();
        match self.kind {
            ConeKind::SecondOrder => {
                let norm = vals[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                (norm - vals[0]).max(0.0)
            }
            ConeKind::Rotated => {
                let (a, b) = (vals[0], vals[1]);
                let sq: f64 = vals[2..].iter().map(|v| v * v).sum();
                let t = a + b;
                let norm = ((a - b).powi(2) + 4.0 * sq).sqrt();
                ((norm - t) / 2.0).max(0.0).max(-a).max(-b)
            }
        }
    }

    /// Dimension of the equivalent standard second-order cone.
    pub fn dim(&self) -> usize {
        self.exprs.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub expr: LinExpr,
    pub tag: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub var_names: Vec<String>,
    /// `expr = 0`.
    pub equalities: Vec<Row>,
    /// `expr >= 0`.
    pub inequalities: Vec<Row>,
    pub cones: Vec<Cone>,
    /// Linear objective coefficients, minimized.
    pub objective: Vec<(usize, f64)>,
    /// Diagonal quadratic terms `coef * x[i]^2`, `coef >= 0`.
    pub quadratic: Vec<(usize, f64)>,
    pub objective_constant: f64,
}

impl ConicProgram {
    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.var_names.push(name.into());
        self.var_names.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn eq0(&mut self, tag: &str, expr: LinExpr) {
        self.equalities.push(Row { expr, tag: tag.to_string() });
    }

    /// `expr >= 0`.
    pub fn ge0(&mut self, tag: &str, expr: LinExpr) {
        self.inequalities.push(Row { expr, tag: tag.to_string() });
    }

    /// `a >= b`.
    pub fn ge(&mut self, tag: &str, a: &LinExpr, b: &LinExpr) {
        self.ge0(tag, a.clone().plus(b, -1.0));
    }

    /// `s >= |e|` as two rows.
    pub fn abs_bound(&mut self, tag: &str, s: usize, e: &LinExpr) {
        let sv = LinExpr::var(s);
        self.ge(tag, &sv, e);
        self.ge(tag, &sv, &e.neg());
    }

    pub fn rotated(&mut self, tag: &str, a: LinExpr, b: LinExpr, z: Vec<LinExpr>) {
        let mut exprs = vec![a, b];
        exprs.extend(z);
        self.cones.push(Cone { kind: ConeKind::Rotated, exprs, tag: tag.to_string() });
    }

    pub fn soc(&mut self, tag: &str, t: LinExpr, z: Vec<LinExpr>) {
        let mut exprs = vec![t];
        exprs.extend(z);
        self.cones.push(Cone { kind: ConeKind::SecondOrder, exprs, tag: tag.to_string() });
    }

    /// Removes every row and cone whose tag is in `tags`.
    pub fn drop_tags(&mut self, tags: &[&str]) {
        self.equalities.retain(|r| !tags.contains(&r.tag.as_str()));
        self.inequalities.retain(|r| !tags.contains(&r.tag.as_str()));
        self.cones.retain(|c| !tags.contains(&c.tag.as_str()));
    }

    pub fn count_tag(&self, tag: &str) -> usize {
        self.equalities.iter().filter(|r| r.tag == tag).count()
            + self.inequalities.iter().filter(|r| r.tag == tag).count()
            + self.cones.iter().filter(|c| c.tag == tag).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
            + self.quadratic.iter().map(|&(i, c)| c * x[i] * x[i]).sum::<f64>()
            + self.objective_constant
    }

    /// Largest violation of any row or cone at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let eq = self.equalities.iter().map(|r| r.expr.eval(x).abs());
        let ineq = self.inequalities.iter().map(|r| (-r.expr.eval(x)).max(0.0));
        let cones = self.cones.iter().map(|c| c.violation(x));
        eq.chain(ineq).chain(cones).fold(0.0, f64::max)
    }

    /// Like [`primal_residual`](Self::primal_residual) but reports the tag of
    /// the worst row.
    pub fn worst_violation(&self, x: &[f64]) -> (f64, String) {
        let mut worst = (0.0, String::new());
        let mut see = |v: f64, tag: &str| {
            if v > worst.0 {
                worst = (v, tag.to_string());
            }
        };
        for r in &self.equalities {
            see(r.expr.eval(x).abs(), &r.tag);
        }
        for r in &self.inequalities {
            see(-r.expr.eval(x), &r.tag);
        }
        for c in &self.cones {
            see(c.violation(x), &c.tag);
        }
        worst
    }

    /// JSON for handing the program to an external solver.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn from_json(text: &str) -> crate::error::Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::error::Error::InvalidInput(format!("program JSON: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotated_cone_violation() {
        let mut p = ConicProgram::default();
        let a = p.add_var("a");
        let b = p.add_var("b");
        let z = p.add_var("z");
        p.rotated("t", LinExpr::var(a), LinExpr::var(b), vec![LinExpr::var(z)]);
        assert_eq!(p.primal_residual(&[2.0, 2.0, 2.0]), 0.0);
        assert!(p.primal_residual(&[1.0, 1.0, 2.0]) > 0.0);
        assert!(p.primal_residual(&[-1.0, -1.0, 0.0]) > 0.0);
    }

    #[test]
    fn drop_tags_removes_rows_and_cones() {
        let mut p = ConicProgram::default();
        let x = p.add_var("x");
        p.ge0("keep", LinExpr::var(x));
        p.ge0("gone", LinExpr::var(x).offset(1.0));
        p.soc("gone", LinExpr::var(x), vec![]);
        p.drop_tags(&["gone"]);
        assert_eq!(p.inequalities.len(), 1);
        assert!(p.cones.is_empty());
        assert_eq!(p.count_tag("keep"), 1);
    }

    #[test]
    fn json_round_trip() {
        let mut p = ConicProgram::default();
        let x = p.add_var("x");
        p.abs_bound("abs", x, &LinExpr::constant(0.5));
        p.objective.push((x, 1.0));
        let back = ConicProgram::from_json(&p.to_json()).unwrap();
        assert_eq!(p, back);
    }
}
