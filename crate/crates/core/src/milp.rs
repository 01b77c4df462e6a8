//! Backend-neutral mixed-integer linear program.
//!
//! [`MilpProblem`] is the only object handed to solver backends. It is a
//! plain minimisation problem: bounded variables with an integrality mark,
//! linear rows with a sense and right-hand side, and a linear objective
//! with a constant offset.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a variable inside one [`MilpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Short label naming the row family, e.g. `"23"` or `"risk.excess"`.
    pub label: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// A linear expression `Σ c·x + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn add_term(&mut self, var: VarId, coef: f64) {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>()
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for (v, c) in self.terms {
            match out.last_mut() {
                Some((last, acc)) if *last == v => *acc += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(v, c)| (v, c * factor)).collect(),
            constant: self.constant * factor,
        }
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        Self {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }
}

impl Mul<f64> for VarId {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        LinExpr {
            terms: vec![(self, rhs)],
            constant: 0.0,
        }
    }
}

impl AddAssign<LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl Add<LinExpr> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self += rhs;
        self
    }
}

impl Sub<LinExpr> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self += rhs.scaled(-1.0);
        self
    }
}

/// A minimisation MILP.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpProblem {
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Dense objective coefficients, one per variable.
    pub objective: Vec<f64>,
    pub objective_constant: f64,
}

impl MilpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_integral(&self) -> usize {
        self.vars.iter().filter(|v| v.kind.is_integral()).count()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
        });
        self.objective.push(0.0);
        VarId(self.vars.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    /// Adds `expr (sense) rhs`; the expression constant is moved to the right-hand side.
    pub fn add_constraint(&mut self, label: impl Into<String>, expr: LinExpr, sense: Sense, rhs: f64) -> usize {
        let expr = expr.compact();
        self.constraints.push(Constraint {
            label: label.into(),
            terms: expr.terms,
            sense,
            rhs: rhs - expr.constant,
        });
        self.constraints.len() - 1
    }

    pub fn add_objective(&mut self, expr: &LinExpr) {
        for &(v, c) in &expr.terms {
            self.objective[v.0] += c;
        }
        self.objective_constant += expr.constant;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest bound, integrality or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (var, &v) in self.vars.iter().zip(x) {
            worst = worst.max(var.lower - v).max(v - var.upper);
            if var.kind.is_integral() {
                worst = worst.max((v - v.round()).abs());
            }
        }
        for row in &self.constraints {
            worst = worst.max(row.violation(x));
        }
        worst
    }

    /// Copy with every integrality mark dropped.
    pub fn lp_relaxation(&self) -> MilpProblem {
        let mut relaxed = self.clone();
        for v in &mut relaxed.vars {
            v.kind = VarKind::Continuous;
        }
        relaxed
    }

    /// Checks that rows reference declared variables and that integer
    /// variables carry finite bounds.
    pub fn check(&self) -> Result<()> {
        if self.objective.len() != self.vars.len() {
            return Err(Error::Validation("objective length differs from variable count".into()));
        }
        for (i, v) in self.vars.iter().enumerate() {
            if v.lower > v.upper {
                return Err(Error::Validation(format!(
                    "variable {} ({}) has lower bound above upper bound",
                    i, v.name
                )));
            }
            if v.kind.is_integral() && !(v.lower.is_finite() && v.upper.is_finite()) {
                return Err(Error::Validation(format!(
                    "integer variable {} ({}) is unbounded",
                    i, v.name
                )));
            }
        }
        for (r, row) in self.constraints.iter().enumerate() {
            if let Some(&(v, _)) = row.terms.iter().find(|(v, _)| v.0 >= self.vars.len()) {
                return Err(Error::Validation(format!(
                    "constraint {r} ({}) references undeclared variable {}",
                    row.label, v.0
                )));
            }
            if !row.rhs.is_finite() {
                return Err(Error::Validation(format!(
                    "constraint {r} ({}) has non-finite rhs",
                    row.label
                )));
            }
        }
        Ok(())
    }

    /// Renders the problem in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        fn name(p: &MilpProblem, v: VarId) -> String {
            sanitize(&p.vars[v.0].name, v.0)
        }
        fn push_terms(out: &mut String, p: &MilpProblem, terms: &[(VarId, f64)]) {
            if terms.is_empty() {
                out.push_str(" 0 ");
                out.push_str(&name(p, VarId(0)));
                return;
            }
            for &(v, c) in terms {
                let sign = if c < 0.0 { '-' } else { '+' };
                let _ = write!(out, " {sign} {} {}", fmt_num(c.abs()), name(p, v));
            }
        }
        let mut out = String::new();
        out.push_str("\\ generated by ehplan\nMinimize\n obj:");
        let obj: Vec<(VarId, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (VarId(i), *c))
            .collect();
        push_terms(&mut out, self, &obj);
        if self.objective_constant != 0.0 {
            let sign = if self.objective_constant < 0.0 { '-' } else { '+' };
            let _ = write!(out, " {sign} {}", fmt_num(self.objective_constant.abs()));
        }
        out.push_str("\nSubject To\n");
        for (r, row) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{r}_{}:", sanitize(&row.label, r));
            push_terms(&mut out, self, &row.terms);
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", fmt_num(row.rhs));
        }
        out.push_str("Bounds\n");
        for (i, v) in self.vars.iter().enumerate() {
            let n = name(self, VarId(i));
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => {
                    let _ = writeln!(out, " {} <= {n} <= {}", fmt_num(v.lower), fmt_num(v.upper));
                }
                (true, false) => {
                    let _ = writeln!(out, " {n} >= {}", fmt_num(v.lower));
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {n} <= {}", fmt_num(v.upper));
                }
                (false, false) => {
                    let _ = writeln!(out, " {n} free");
                }
            }
        }
        let ints: Vec<String> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind.is_integral())
            .map(|(i, _)| name(self, VarId(i)))
            .collect();
        if !ints.is_empty() {
            out.push_str("General\n");
            for chunk in ints.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

fn sanitize(name: &str, idx: usize) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() || cleaned.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        format!("x{idx}_{cleaned}")
    } else {
        format!("{cleaned}_{idx}")
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x:.12}")
        .trim_end_matches('0')
        .trim_end_matches('.')
        .to_string()
}
