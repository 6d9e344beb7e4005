//! Generic linear / mixed-binary problem representation.

use serde::{Deserialize, Serialize};

use crate::error::SolveError;

/// Index of a variable inside a [`LinearProblem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimisation problem over bounded continuous and binary variables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProblem {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(VarId, f64)>,
    /// Constant added to the objective value.
    #[serde(default)]
    pub objective_offset: f64,
}

impl LinearProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
        });
        id
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// Adds `coef * var` to the objective.
    pub fn add_objective_term(&mut self, var: VarId, coef: f64) {
        if coef != 0.0 {
            self.objective.push((var, coef));
        }
    }

    /// Dense objective vector with repeated terms summed.
    pub fn objective_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(v, coef) in &self.objective {
            c[v.0] += coef;
        }
        c
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
    }

    /// Checks structural invariants: finite data, valid references, binary bounds in [0,1].
    pub fn validate(&self) -> Result<(), SolveError> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(SolveError::NonFinite(format!("bounds of {}", v.name)));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(SolveError::InvalidProblem(format!(
                    "binary variable {} has bounds [{}, {}] outside [0, 1]",
                    v.name, v.lower, v.upper
                )));
            }
        }
        for &(var, coef) in &self.objective {
            if var.0 >= n {
                return Err(SolveError::InvalidProblem(format!("objective references unknown variable {}", var.0)));
            }
            if !coef.is_finite() {
                return Err(SolveError::NonFinite(format!("objective coefficient of {}", self.variables[var.0].name)));
            }
        }
        if !self.objective_offset.is_finite() {
            return Err(SolveError::NonFinite("objective offset".into()));
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(SolveError::NonFinite(format!("rhs of {}", c.name)));
            }
            for &(var, coef) in &c.terms {
                if var.0 >= n {
                    return Err(SolveError::InvalidProblem(format!(
                        "constraint {} references unknown variable {}",
                        c.name, var.0
                    )));
                }
                if !coef.is_finite() {
                    return Err(SolveError::NonFinite(format!("coefficient in {}", c.name)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSelection {
    /// Dive depth-first until an incumbent exists, then always expand the open node with the lowest bound.
    BestBound,
    DepthFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchRule {
    MostFractional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative optimality gap at which branch-and-bound stops.
    pub rel_gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    pub node_selection: NodeSelection,
    pub branch_rule: BranchRule,
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_gap: 1e-5,
            time_limit: 1000.0,
            node_selection: NodeSelection::BestBound,
            branch_rule: BranchRule::MostFractional,
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            stall_threshold: 50,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.rel_gap >= 0.0) {
            return Err(SolveError::InvalidOptions("rel_gap must be >= 0".into()));
        }
        if !(self.time_limit > 0.0) {
            return Err(SolveError::InvalidOptions("time_limit must be > 0".into()));
        }
        if !(self.feas_tol > 0.0) || !(self.opt_tol > 0.0) {
            return Err(SolveError::InvalidOptions("tolerances must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Proven optimal (tree exhausted, or LP optimal).
    Optimal,
    /// Stopped because the relative gap fell below `rel_gap`.
    FeasibleGap,
    /// Time limit reached with an incumbent.
    TimeLimit,
    /// Time limit reached before any feasible point was found.
    TimeLimitNoIncumbent,
    Infeasible,
    Unbounded,
}

impl Status {
    pub fn has_incumbent(self) -> bool {
        matches!(self, Status::Optimal | Status::FeasibleGap | Status::TimeLimit)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::FeasibleGap => "feasible_gap",
            Status::TimeLimit => "time_limit",
            Status::TimeLimitNoIncumbent => "time_limit_no_incumbent",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    pub values: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes_explored: usize,
    pub simplex_iterations: usize,
    pub wall_time: f64,
    pub options: SolverOptions,
}

impl Solution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}

/// Relative gap between an incumbent objective and a lower bound.
pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() || !bound.is_finite() {
        return f64::INFINITY;
    }
    let diff = (objective - bound).max(0.0);
    if diff == 0.0 {
        return 0.0;
    }
    diff / objective.abs().max(1e-10)
}
