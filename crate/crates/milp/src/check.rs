use serde::{Deserialize, Serialize};

use crate::problem::{LinearProblem, Solution, VarKind};

/// Residuals of a candidate solution against a problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_constraint_violation: f64,
    /// Name of the constraint attaining `max_constraint_violation`, if any is violated.
    pub worst_constraint: Option<String>,
    pub max_bound_violation: f64,
    pub max_fractionality: f64,
    pub objective: f64,
    pub clean: bool,
}

pub fn check_values(problem: &LinearProblem, values: &[f64], tol: f64) -> ResidualReport {
    let mut max_c = 0.0f64;
    let mut worst = None;
    for c in &problem.constraints {
        let v = c.violation(values);
        if v > max_c {
            max_c = v;
            worst = Some(c.name.clone());
        }
    }
    let mut max_b = 0.0f64;
    let mut max_f = 0.0f64;
    for (var, &x) in problem.variables.iter().zip(values) {
        max_b = max_b.max(var.lower - x).max(x - var.upper);
        if var.kind == VarKind::Binary {
            max_f = max_f.max((x - x.round()).abs());
        }
    }
    let objective = problem.objective_value(values);
    ResidualReport {
        max_constraint_violation: max_c,
        worst_constraint: worst,
        max_bound_violation: max_b,
        max_fractionality: max_f,
        objective,
        clean: max_c <= tol && max_b <= tol && max_f <= tol,
    }
}

/// Recomputes residuals and the objective of `solution` from scratch.
pub fn check_solution(problem: &LinearProblem, solution: &Solution, tol: f64) -> ResidualReport {
    if solution.values.len() != problem.num_vars() {
        return ResidualReport {
            max_constraint_violation: f64::INFINITY,
            worst_constraint: None,
            max_bound_violation: f64::INFINITY,
            max_fractionality: f64::INFINITY,
            objective: f64::NAN,
            clean: false,
        };
    }
    check_values(problem, &solution.values, tol)
}
