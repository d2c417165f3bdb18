//! LP relaxation of a [`MipModel`] on top of `microlp`'s bounded-variable
//! revised simplex.
//!
//! Binaries are relaxed to their bound interval. Lazy rows are withheld and
//! separated after every solve until none is violated, so an optimal
//! [`LpSolution`] is optimal for the full relaxation.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::SolveError;
use crate::model::{MipModel, Sense, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless the status is optimal.
    pub values: Vec<f64>,
    pub objective: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct LpOptions {
    pub feas_tol: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { feas_tol: 1e-7 }
    }
}

/// Replaces the bounds of one variable for a single solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundOverride {
    pub var: VarId,
    pub lower: f64,
    pub upper: f64,
}

/// Solves the LP relaxation of `model` (binaries relaxed to `[0, 1]`).
pub fn solve_lp(
    model: &MipModel,
    overrides: &[BoundOverride],
    options: &LpOptions,
) -> Result<LpSolution, SolveError> {
    model.validate()?;
    let relaxation = Relaxation::new(model, overrides, options.feas_tol)?;
    Ok(match relaxation.root()? {
        Outcome::Solved(state) => {
            let values = relaxation.values(&state);
            LpSolution {
                status: LpStatus::Optimal,
                objective: model.objective_value(&values),
                values,
            }
        }
        Outcome::Infeasible => LpSolution {
            status: LpStatus::Infeasible,
            values: Vec::new(),
            objective: f64::INFINITY,
        },
        Outcome::Unbounded => LpSolution {
            status: LpStatus::Unbounded,
            values: Vec::new(),
            objective: f64::NEG_INFINITY,
        },
    })
}

/// Solver state of one relaxation: the simplex tableau plus which lazy rows
/// have been added to it.
#[derive(Clone)]
pub(crate) struct LpState {
    solution: microlp::Solution,
    active_lazy: Vec<bool>,
}

pub(crate) enum Outcome {
    Solved(LpState),
    Infeasible,
    Unbounded,
}

pub(crate) struct Relaxation<'m> {
    model: &'m MipModel,
    lower: Vec<f64>,
    upper: Vec<f64>,
    problem: Option<Problem>,
    columns: Vec<microlp::Variable>,
    /// Lazy row indices grouped by shared variable set; at most one row per
    /// group is added per separation round.
    lazy_groups: Vec<Vec<usize>>,
    lazy_slot: Vec<usize>,
    num_lazy: usize,
    tol: f64,
}

fn cmp_op(sense: Sense) -> ComparisonOp {
    match sense {
        Sense::Le => ComparisonOp::Le,
        Sense::Ge => ComparisonOp::Ge,
        Sense::Eq => ComparisonOp::Eq,
    }
}

/// Row scaled so its largest coefficient magnitude is 1.
fn equilibrated(row: &crate::model::LinearConstraint, columns: &[microlp::Variable]) -> (Vec<(microlp::Variable, f64)>, f64) {
    let scale = row.terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let expr = row.terms.iter().map(|&(v, c)| (columns[v.0], c / scale)).collect();
    (expr, row.rhs / scale)
}

fn build_problem(
    model: &MipModel,
    lower: &[f64],
    upper: &[f64],
) -> (Option<Problem>, Vec<microlp::Variable>) {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let mut columns = Vec::with_capacity(model.num_vars());
    let mut consistent = true;
    for j in 0..model.num_vars() {
        let obj = model.objective.get(&VarId(j)).copied().unwrap_or(0.0);
        consistent &= lower[j] <= upper[j];
        columns.push(problem.add_var(obj, (lower[j], upper[j].max(lower[j]))));
    }
    for row in model.constraints.iter().filter(|r| !r.lazy) {
        let (expr, rhs) = equilibrated(row, &columns);
        problem.add_constraint(expr.as_slice(), cmp_op(row.sense), rhs);
    }
    (consistent.then_some(problem), columns)
}

fn engine_error(e: microlp::Error) -> Result<Outcome, SolveError> {
    match e {
        microlp::Error::Infeasible => Ok(Outcome::Infeasible),
        microlp::Error::Unbounded => Ok(Outcome::Unbounded),
        other => Err(SolveError::Numerical(other.to_string())),
    }
}

impl<'m> Relaxation<'m> {
    pub(crate) fn new(model: &'m MipModel, overrides: &[BoundOverride], tol: f64) -> Result<Self, SolveError> {
        let mut lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
        for o in overrides {
            if o.var.0 >= model.num_vars() {
                return Err(crate::error::MipError::UnknownVar(o.var).into());
            }
            lower[o.var.0] = o.lower;
            upper[o.var.0] = o.upper;
        }
        let mut lazy_groups: Vec<Vec<usize>> = Vec::new();
        let mut lazy_slot = vec![usize::MAX; model.num_constraints()];
        let mut num_lazy = 0;
        let mut last_vars: Option<Vec<VarId>> = None;
        for (i, row) in model.constraints.iter().enumerate() {
            if !row.lazy {
                last_vars = None;
                continue;
            }
            lazy_slot[i] = num_lazy;
            num_lazy += 1;
            let vars: Vec<VarId> = row.terms.iter().map(|t| t.0).collect();
            if last_vars.as_ref() == Some(&vars) {
                lazy_groups.last_mut().unwrap().push(i);
            } else {
                lazy_groups.push(vec![i]);
                last_vars = Some(vars);
            }
        }
        let (problem, columns) = build_problem(model, &lower, &upper);
        Ok(Relaxation {
            model,
            lower,
            upper,
            problem,
            columns,
            lazy_groups,
            lazy_slot,
            num_lazy,
            tol,
        })
    }

    /// Builds and solves the relaxation without any branching fixings.
    pub(crate) fn root(&self) -> Result<Outcome, SolveError> {
        let Some(problem) = &self.problem else {
            return Ok(Outcome::Infeasible);
        };
        let solution = match problem.solve() {
            Ok(outcome) => match outcome.into_solution() {
                Ok(s) => s,
                Err(_) => return Err(SolveError::Numerical("LP solve interrupted".into())),
            },
            Err(e) => return engine_error(e),
        };
        let state = LpState {
            solution,
            active_lazy: vec![false; self.num_lazy],
        };
        self.separate(state)
    }

    /// Rebuilds the relaxation from scratch with `fixings` applied as bounds.
    /// Used when a warm re-solve fails numerically, so violated lazy rows are
    /// built into a fresh problem each round instead of being added to a
    /// warm tableau.
    pub(crate) fn cold(&self, fixings: &[(VarId, f64)]) -> Result<Outcome, SolveError> {
        let (mut lower, mut upper) = (self.lower.clone(), self.upper.clone());
        for &(v, x) in fixings {
            lower[v.0] = x;
            upper[v.0] = x;
        }
        let mut active_lazy = vec![false; self.num_lazy];
        loop {
            let (problem, columns) = build_problem(self.model, &lower, &upper);
            debug_assert!(columns == self.columns);
            let Some(mut problem) = problem else {
                return Ok(Outcome::Infeasible);
            };
            for (i, row) in self.model.constraints.iter().enumerate() {
                if row.lazy && active_lazy[self.lazy_slot[i]] {
                    let (expr, rhs) = equilibrated(row, &columns);
                    problem.add_constraint(expr.as_slice(), cmp_op(row.sense), rhs);
                }
            }
            let solution = match problem.solve() {
                Ok(outcome) => match outcome.into_solution() {
                    Ok(s) => s,
                    Err(_) => return Err(SolveError::Numerical("LP solve interrupted".into())),
                },
                Err(e) => return engine_error(e),
            };
            let state = LpState { solution, active_lazy };
            let cuts = self.violated(&state);
            if cuts.is_empty() {
                return Ok(Outcome::Solved(state));
            }
            active_lazy = state.active_lazy;
            for i in cuts {
                active_lazy[self.lazy_slot[i]] = true;
            }
        }
    }

    /// Fixes a variable in `state` and re-solves from its basis.
    pub(crate) fn fix(&self, state: LpState, var: VarId, value: f64) -> Result<Outcome, SolveError> {
        let LpState { solution, active_lazy } = state;
        let column = self.columns[var.0];
        match solution.fix_var(column, value) {
            Ok(outcome) => match outcome.into_solution() {
                Ok(solution) => self.separate(LpState { solution, active_lazy }),
                Err(_) => Err(SolveError::Numerical("LP re-solve interrupted".into())),
            },
            Err(e) => engine_error(e),
        }
    }

    /// Most violated inactive lazy row of every group.
    fn violated(&self, state: &LpState) -> Vec<usize> {
        let values = self.values(state);
        let mut cuts = Vec::new();
        for group in &self.lazy_groups {
            let mut best: Option<(usize, f64)> = None;
            for &i in group {
                if state.active_lazy[self.lazy_slot[i]] {
                    continue;
                }
                let row = &self.model.constraints[i];
                let scale = row.terms.iter().map(|t| t.1.abs()).fold(1.0, f64::max);
                let viol = row.violation(&values) / scale;
                if viol > self.tol * 0.1 && best.is_none_or(|(_, b)| viol > b) {
                    best = Some((i, viol));
                }
            }
            if let Some((i, _)) = best {
                cuts.push(i);
            }
        }
        cuts
    }

    fn separate(&self, mut state: LpState) -> Result<Outcome, SolveError> {
        loop {
            let cuts = self.violated(&state);
            if cuts.is_empty() {
                return Ok(Outcome::Solved(state));
            }
            for i in cuts {
                let row = &self.model.constraints[i];
                let (expr, rhs) = equilibrated(row, &self.columns);
                state.active_lazy[self.lazy_slot[i]] = true;
                let LpState { solution, active_lazy } = state;
                state = match solution.add_constraint(expr.as_slice(), cmp_op(row.sense), rhs) {
                    Ok(outcome) => match outcome.into_solution() {
                        Ok(solution) => LpState { solution, active_lazy },
                        Err(_) => return Err(SolveError::Numerical("LP re-solve interrupted".into())),
                    },
                    Err(e) => return engine_error(e),
                };
            }
        }
    }

    pub(crate) fn values(&self, state: &LpState) -> Vec<f64> {
        self.columns
            .iter()
            .map(|&c| state.solution.var_value_raw(c))
            .collect()
    }
}
