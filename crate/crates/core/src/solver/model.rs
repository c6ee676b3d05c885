//! Linear model description: bounded variables, range rows, binaries.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Var {
    pub name: (&'static str, u32),
    pub lb: f64,
    pub ub: f64,
    pub binary: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub name: (&'static str, u32),
    pub coeffs: Vec<(usize, f64)>,
    pub lb: f64,
    pub ub: f64,
}

/// Minimization model over bounded variables with two-sided rows
/// `lb <= a.x <= ub` (equality when the sides coincide).
#[derive(Debug, Clone, Default)]
pub struct Model {
    pub(crate) vars: Vec<Var>,
    pub(crate) rows: Vec<Row>,
    pub(crate) objective: Vec<f64>,
}

impl Model {
    pub fn new() -> Model {
        Model::default()
    }

    /// Adds a continuous variable with inclusive bounds (infinities allowed).
    pub fn add_var(&mut self, name: (&'static str, u32), lb: f64, ub: f64) -> VarId {
        debug_assert!(lb <= ub, "variable {}{} has lb > ub", name.0, name.1);
        self.vars.push(Var {
            name,
            lb,
            ub,
            binary: false,
        });
        self.objective.push(0.0);
        VarId(self.vars.len() - 1)
    }

    /// Adds a binary decision variable (relaxed to [0, 1] in the LP).
    pub fn add_binary(&mut self, name: (&'static str, u32)) -> VarId {
        let id = self.add_var(name, 0.0, 1.0);
        self.vars[id.0].binary = true;
        id
    }

    /// Fixes a variable to a constant.
    pub fn fix_var(&mut self, var: VarId, value: f64) {
        self.vars[var.0].lb = value;
        self.vars[var.0].ub = value;
    }

    pub fn bounds(&self, var: VarId) -> (f64, f64) {
        (self.vars[var.0].lb, self.vars[var.0].ub)
    }

    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var.0] = coeff;
    }

    pub fn add_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var.0] += coeff;
    }

    /// Adds a range row; use equal bounds for an equality and an
    /// infinite side for a one-sided inequality.
    pub fn add_row(&mut self, name: (&'static str, u32), coeffs: Vec<(VarId, f64)>, lb: f64, ub: f64) {
        debug_assert!(lb <= ub, "row {}{} has lb > ub", name.0, name.1);
        self.rows.push(Row {
            name,
            coeffs: coeffs.into_iter().map(|(v, c)| (v.0, c)).collect(),
            lb,
            ub,
        });
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn binaries(&self) -> Vec<VarId> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.binary)
            .map(|(i, _)| VarId(i))
            .collect()
    }

    /// Objective value of a point (no feasibility check).
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(values)
            .map(|(c, v)| c * v)
            .sum()
    }

    /// Renders the model in LP-format text for external debugging.
    pub fn to_lp_text(&self) -> String {
        let vname = |i: usize| format!("{}{}", self.vars[i].name.0, self.vars[i].name.1);
        let mut out = String::from("Minimize\n obj:");
        for (i, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(out, " {} {}", fmt_signed(*c), vname(i));
            }
        }
        out.push_str("\nSubject To\n");
        for (ri, row) in self.rows.iter().enumerate() {
            let mut terms = String::new();
            for (v, c) in &row.coeffs {
                let _ = write!(terms, " {} {}", fmt_signed(*c), vname(*v));
            }
            let rname = format!("{}{}", row.name.0, row.name.1);
            if row.lb == row.ub {
                let _ = writeln!(out, " {rname}:{terms} = {}", row.lb);
            } else {
                if row.lb.is_finite() {
                    let _ = writeln!(out, " {rname}_lo:{terms} >= {}", row.lb);
                }
                if row.ub.is_finite() {
                    let _ = writeln!(out, " {rname}_hi:{terms} <= {}", row.ub);
                }
            }
            let _ = ri;
        }
        out.push_str("Bounds\n");
        for (i, v) in self.vars.iter().enumerate() {
            let _ = writeln!(out, " {} <= {} <= {}", fmt_bound(v.lb), vname(i), fmt_bound(v.ub));
        }
        let bins: Vec<String> = self
            .binaries()
            .iter()
            .map(|b| vname(b.0))
            .collect();
        if !bins.is_empty() {
            out.push_str("Binary\n ");
            out.push_str(&bins.join(" "));
            out.push('\n');
        }
        out.push_str("End\n");
        out
    }
}

fn fmt_signed(c: f64) -> String {
    if c >= 0.0 {
        format!("+ {c}")
    } else {
        format!("- {}", -c)
    }
}

fn fmt_bound(b: f64) -> String {
    if b == f64::NEG_INFINITY {
        "-inf".into()
    } else if b == f64::INFINITY {
        "+inf".into()
    } else {
        format!("{b}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_text_mentions_binaries_and_rows() {
        let mut m = Model::new();
        let x = m.add_var(("x", 0), 0.0, 10.0);
        let z = m.add_binary(("z", 0));
        m.set_objective(x, 1.0);
        m.add_row(("r", 0), vec![(x, 1.0), (z, -5.0)], f64::NEG_INFINITY, 3.0);
        let text = m.to_lp_text();
        assert!(text.contains("Binary"));
        assert!(text.contains("z0"));
        assert!(text.contains("r0_hi"));
    }
}
