//! Problem representation shared by the LP and MILP solvers.
//!
//! Problems are always minimizations. Every constraint is a linear row with
//! lower and/or upper bounds and carries a short provenance tag naming the
//! constraint family it was generated from, so a solved model can be audited
//! row by row.

use std::collections::HashMap;
use std::fmt;

use crate::error::ProblemError;

/// Index of a variable inside a [`MilpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Index of a constraint inside a [`MilpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    /// Integer restricted to `{0, 1}`.
    Binary,
    /// General integer within its bounds.
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
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

/// Comparator and right-hand side of a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowBounds {
    Le(f64),
    Ge(f64),
    Eq(f64),
    Range { lower: f64, upper: f64 },
}

impl RowBounds {
    pub fn lower(&self) -> f64 {
        match *self {
            RowBounds::Le(_) => f64::NEG_INFINITY,
            RowBounds::Ge(v) | RowBounds::Eq(v) => v,
            RowBounds::Range { lower, .. } => lower,
        }
    }

    pub fn upper(&self) -> f64 {
        match *self {
            RowBounds::Ge(_) => f64::INFINITY,
            RowBounds::Le(v) | RowBounds::Eq(v) => v,
            RowBounds::Range { upper, .. } => upper,
        }
    }

    /// Builds the tightest comparator form for a `[lower, upper]` interval.
    pub fn from_interval(lower: f64, upper: f64) -> RowBounds {
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) if lower == upper => RowBounds::Eq(lower),
            (true, true) => RowBounds::Range { lower, upper },
            (true, false) => RowBounds::Ge(lower),
            (false, true) => RowBounds::Le(upper),
            (false, false) => RowBounds::Range { lower, upper },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Constraint family this row belongs to (e.g. `transformation`).
    pub tag: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub bounds: RowBounds,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum()
    }
}

/// A mixed-integer linear minimization problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpProblem {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
}

impl MilpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        MilpProblem {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
        objective: f64,
    ) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.variables.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
            objective,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper, objective)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, objective)
    }

    /// Adds a row. Duplicate variable entries are merged and zero
    /// coefficients dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        tag: impl Into<String>,
        coeffs: impl IntoIterator<Item = (VarId, f64)>,
        bounds: RowBounds,
    ) -> RowId {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in coeffs {
            if let Some(slot) = merged.iter_mut().find(|(w, _)| *w == v) {
                slot.1 += a;
            } else {
                merged.push((v, a));
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.constraints.push(Constraint {
            name: name.into(),
            tag: tag.into(),
            coeffs: merged,
            bounds,
        });
        RowId(self.constraints.len() - 1)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var_mut(&mut self, id: VarId) -> &mut Variable {
        &mut self.variables[id.0]
    }

    pub fn constraint(&self, id: RowId) -> &Constraint {
        &self.constraints[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_integer(&self) -> usize {
        self.variables.iter().filter(|v| v.kind.is_integral()).count()
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[id.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.variables.iter().zip(x).map(|(v, &xv)| v.objective * xv).sum()
    }

    /// Largest violation of any variable bound or row bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xv) in self.variables.iter().zip(x) {
            worst = worst.max(v.lower - xv).max(xv - v.upper);
        }
        for c in &self.constraints {
            let act = c.activity(x);
            worst = worst.max(c.bounds.lower() - act).max(act - c.bounds.upper());
        }
        worst
    }

    /// Largest distance of an integer variable from the nearest integer.
    pub fn max_fractionality(&self, x: &[f64]) -> f64 {
        self.variables
            .iter()
            .zip(x)
            .filter(|(v, _)| v.kind.is_integral())
            .map(|(_, &xv)| (xv - xv.round()).abs())
            .fold(0.0, f64::max)
    }

    /// Copy with every integer variable relaxed to a continuous one.
    pub fn relaxed(&self) -> MilpProblem {
        let mut p = self.clone();
        for v in &mut p.variables {
            v.kind = VarKind::Continuous;
        }
        p
    }

    pub fn var_index_by_name(&self) -> HashMap<&str, VarId> {
        self.variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), VarId(i)))
            .collect()
    }

    /// Checks structural well-formedness: unique names, finite coefficients,
    /// references to existing variables.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let mut seen = HashMap::new();
        for (i, v) in self.variables.iter().enumerate() {
            if v.name.is_empty() || v.name.chars().any(char::is_whitespace) {
                return Err(ProblemError::BadName(v.name.clone()));
            }
            if seen.insert(v.name.as_str(), i).is_some() {
                return Err(ProblemError::DuplicateName(v.name.clone()));
            }
            if !v.objective.is_finite() || v.lower.is_nan() || v.upper.is_nan() {
                return Err(ProblemError::NonFinite(v.name.clone()));
            }
        }
        let mut rows = HashMap::new();
        for c in &self.constraints {
            if c.name.is_empty() || c.name.chars().any(char::is_whitespace) {
                return Err(ProblemError::BadName(c.name.clone()));
            }
            if rows.insert(c.name.as_str(), ()).is_some() {
                return Err(ProblemError::DuplicateName(c.name.clone()));
            }
            if c.tag.is_empty() {
                return Err(ProblemError::MissingTag(c.name.clone()));
            }
            for &(v, a) in &c.coeffs {
                if v.0 >= self.variables.len() {
                    return Err(ProblemError::UnknownVariable(c.name.clone()));
                }
                if !a.is_finite() {
                    return Err(ProblemError::NonFinite(c.name.clone()));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for MilpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} variables ({} integer), {} constraints",
            self.name,
            self.num_vars(),
            self.num_integer(),
            self.num_constraints()
        )
    }
}
