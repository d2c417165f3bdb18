//! Model representation: variables, linear rows and a linear objective.
//!
//! Every variable and row carries a [`Tag`] so that assembled models can be
//! audited back to the physical quantity or constraint family it encodes.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::MipError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// Where in the network a variable or row lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Global,
    Bus(usize),
    Edge(usize),
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Global => Ok(()),
            Site::Bus(b) => write!(f, "bus:{b}"),
            Site::Edge(e) => write!(f, "edge:{e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tag {
    pub label: Cow<'static, str>,
    pub t: Option<usize>,
    pub site: Site,
}

impl Tag {
    pub fn new(label: impl Into<Cow<'static, str>>) -> Self {
        Tag {
            label: label.into(),
            t: None,
            site: Site::Global,
        }
    }

    pub fn at(mut self, t: usize) -> Self {
        self.t = Some(t);
        self
    }

    pub fn bus(mut self, bus: usize) -> Self {
        self.site = Site::Bus(bus);
        self
    }

    pub fn edge(mut self, edge: usize) -> Self {
        self.site = Site::Edge(edge);
        self
    }

    /// Same site and instance, different label.
    pub fn relabel(&self, label: impl Into<Cow<'static, str>>) -> Self {
        Tag {
            label: label.into(),
            t: self.t,
            site: self.site,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)?;
        if self.site != Site::Global {
            write!(f, " {}", self.site)?;
        }
        if let Some(t) = self.t {
            write!(f, " t={t}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub role: Tag,
    /// Larger values are branched on first.
    pub branch_priority: i32,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        self.kind == VarKind::Binary
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Sense::Le => lhs <= rhs + tol,
            Sense::Ge => lhs >= rhs - tol,
            Sense::Eq => (lhs - rhs).abs() <= tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    /// Sorted by variable, no duplicates, no zero coefficients.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub role: Tag,
    /// Lazy rows may be withheld from the LP until violated. They are still
    /// part of the model.
    pub lazy: bool,
}

impl LinearConstraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violates this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Outer approximation `ell >= coeff * w^2` built from tangent cuts.
#[derive(Clone, Debug, PartialEq)]
pub struct Epigraph {
    pub ell: VarId,
    pub w: VarId,
    pub coeff: f64,
    pub half_width: f64,
    pub tangents: usize,
}

impl Epigraph {
    /// Worst-case gap `coeff*w^2 - ell` at the LP optimum of a minimization.
    pub fn error_bound(&self) -> f64 {
        let spacing = 2.0 * self.half_width / (self.tangents as f64 - 1.0);
        self.coeff * spacing * spacing / 4.0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MipModel {
    pub vars: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    /// Minimization objective, merged per variable.
    pub objective: BTreeMap<VarId, f64>,
    pub epigraphs: Vec<Epigraph>,
}

pub(crate) fn merge_terms(terms: impl IntoIterator<Item = (VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
    for (v, c) in terms {
        *merged.entry(v).or_insert(0.0) += c;
    }
    merged.into_iter().filter(|&(_, c)| c != 0.0).collect()
}

impl MipModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn add_var(
        &mut self,
        kind: VarKind,
        lower: f64,
        upper: f64,
        role: Tag,
    ) -> Result<VarId, MipError> {
        let id = VarId(self.vars.len());
        check_bounds(id, kind, lower, upper)?;
        self.vars.push(Variable {
            kind,
            lower,
            upper,
            role,
            branch_priority: 0,
        });
        Ok(id)
    }

    pub fn add_continuous(&mut self, lower: f64, upper: f64, role: Tag) -> Result<VarId, MipError> {
        self.add_var(VarKind::Continuous, lower, upper, role)
    }

    pub fn add_binary(&mut self, role: Tag) -> Result<VarId, MipError> {
        self.add_var(VarKind::Binary, 0.0, 1.0, role)
    }

    /// Fixed continuous variable, used for known constants that still take
    /// part in products (e.g. the substation voltage).
    pub fn add_fixed(&mut self, value: f64, role: Tag) -> Result<VarId, MipError> {
        self.add_var(VarKind::Continuous, value, value, role)
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) -> Result<(), MipError> {
        let var = self.vars.get_mut(id.0).ok_or(MipError::UnknownVar(id))?;
        check_bounds(id, var.kind, lower, upper)?;
        var.lower = lower;
        var.upper = upper;
        Ok(())
    }

    pub fn set_priority(&mut self, id: VarId, priority: i32) {
        self.vars[id.0].branch_priority = priority;
    }

    pub fn add_constraint(
        &mut self,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
        role: Tag,
    ) -> Result<ConId, MipError> {
        self.push_constraint(terms, sense, rhs, role, false)
    }

    pub fn add_lazy_constraint(
        &mut self,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
        role: Tag,
    ) -> Result<ConId, MipError> {
        self.push_constraint(terms, sense, rhs, role, true)
    }

    fn push_constraint(
        &mut self,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
        role: Tag,
        lazy: bool,
    ) -> Result<ConId, MipError> {
        let index = self.constraints.len();
        let terms = merge_terms(terms);
        for &(v, c) in &terms {
            if v.0 >= self.vars.len() {
                return Err(MipError::UnknownVar(v));
            }
            if !c.is_finite() {
                return Err(MipError::NonFinite { index });
            }
        }
        if !rhs.is_finite() {
            return Err(MipError::NonFinite { index });
        }
        self.constraints.push(LinearConstraint {
            terms,
            sense,
            rhs,
            role,
            lazy,
        });
        Ok(ConId(index))
    }

    pub fn add_objective_term(&mut self, var: VarId, coeff: f64) -> Result<(), MipError> {
        if var.0 >= self.vars.len() {
            return Err(MipError::UnknownVar(var));
        }
        let entry = self.objective.entry(var).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.objective.remove(&var);
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|(v, c)| c * values[v.0]).sum()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_binary())
            .map(|(i, _)| VarId(i))
    }

    /// Sum of the tangent-approximation error bounds of all epigraphs.
    pub fn epigraph_error_bound(&self) -> f64 {
        self.epigraphs.iter().map(Epigraph::error_bound).sum()
    }

    /// Checks the structural invariants: known variables, valid bounds, finite
    /// data and merged rows.
    pub fn validate(&self) -> Result<(), MipError> {
        for (i, v) in self.vars.iter().enumerate() {
            check_bounds(VarId(i), v.kind, v.lower, v.upper)?;
        }
        for (index, row) in self.constraints.iter().enumerate() {
            let mut last: Option<VarId> = None;
            for &(v, c) in &row.terms {
                if v.0 >= self.vars.len() {
                    return Err(MipError::UnknownVar(v));
                }
                if !c.is_finite() || last.is_some_and(|l| l >= v) {
                    return Err(MipError::NonFinite { index });
                }
                last = Some(v);
            }
            if !row.rhs.is_finite() {
                return Err(MipError::NonFinite { index });
            }
        }
        for &v in self.objective.keys() {
            if v.0 >= self.vars.len() {
                return Err(MipError::UnknownVar(v));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound by `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// True when both models have the same variables, rows and objective,
    /// ignoring role tags.
    pub fn same_structure(&self, other: &MipModel) -> bool {
        self.vars.len() == other.vars.len()
            && self.constraints.len() == other.constraints.len()
            && self.objective == other.objective
            && self.vars.iter().zip(&other.vars).all(|(a, b)| {
                a.kind == b.kind && a.lower == b.lower && a.upper == b.upper
            })
            && self
                .constraints
                .iter()
                .zip(&other.constraints)
                .all(|(a, b)| a.terms == b.terms && a.sense == b.sense && a.rhs == b.rhs)
    }
}

fn check_bounds(id: VarId, kind: VarKind, lower: f64, upper: f64) -> Result<(), MipError> {
    if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
        return Err(MipError::InvalidBounds { var: id, lower, upper });
    }
    if kind == VarKind::Binary {
        let ok = |b: f64| b == 0.0 || b == 1.0;
        if !ok(lower) || !ok(upper) {
            return Err(MipError::BinaryBounds(id));
        }
    }
    Ok(())
}
