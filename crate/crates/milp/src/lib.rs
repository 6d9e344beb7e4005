//! Linear and mixed-binary programming for production-cost models.
//!
//! [`solve_lp`] runs a bounded-variable revised simplex (dual simplex from the
//! slack basis whenever it is dual feasible, otherwise a two-phase primal
//! simplex) on a sparse LU factorisation with eta updates. Bland's rule takes
//! over after `stall_threshold` consecutive degenerate pivots. [`solve_milp`]
//! wraps it in LP-based branch-and-bound on the binary variables
//! (most-fractional branching, warm-started dual simplex at every node) and
//! stops on relative gap, exhausted tree, or time limit.
//!
//! Callers that want a different engine implement [`MilpBackend`]; the rest of
//! the workspace only talks to solvers through that trait.

mod branch;
mod check;
mod error;
pub mod lp_format;
mod lu;
mod problem;
mod simplex;
mod standard;

use std::time::Instant;

pub use branch::INT_TOL;
pub use check::{check_solution, check_values, ResidualReport};
pub use error::SolveError;
pub use problem::{
    relative_gap, BranchRule, Constraint, LinearProblem, NodeSelection, Sense, Solution, SolverOptions, Status,
    VarId, VarKind, Variable,
};

use simplex::{LpStatus, Simplex};
use standard::StandardForm;

/// Solves the continuous relaxation of `problem` (binaries treated as `[0, 1]`).
pub fn solve_lp(problem: &LinearProblem, options: &SolverOptions) -> Result<Solution, SolveError> {
    problem.validate()?;
    options.validate()?;
    let start = Instant::now();
    let sf = StandardForm::new(problem, options.feas_tol);
    let mut spx = Simplex::new(&sf, branch::tolerances(options));
    spx.deadline = Some(branch::deadline(start, options));
    let mut status = spx.solve();
    if status == LpStatus::Failed {
        log::warn!("simplex reported numerical trouble; retrying from the slack basis");
        status = spx.solve_cold();
    }
    let iterations = spx.iterations;
    let (status, values, objective) = match status {
        LpStatus::Optimal => {
            let values = spx.x[..sf.n].to_vec();
            let obj = spx.objective() + problem.objective_offset;
            (Status::Optimal, values, obj)
        }
        LpStatus::Infeasible => (Status::Infeasible, Vec::new(), f64::INFINITY),
        LpStatus::Unbounded => (Status::Unbounded, Vec::new(), f64::NEG_INFINITY),
        LpStatus::TimeLimit => (Status::TimeLimitNoIncumbent, Vec::new(), f64::INFINITY),
        LpStatus::Failed => return Err(SolveError::Numerical("simplex failed after cold restart".into())),
    };
    let best_bound = if status == Status::Optimal { objective } else { f64::NEG_INFINITY };
    Ok(Solution {
        status,
        values,
        objective,
        best_bound,
        gap: if status == Status::Optimal { 0.0 } else { f64::INFINITY },
        nodes_explored: 1,
        simplex_iterations: iterations,
        wall_time: start.elapsed().as_secs_f64(),
        options: options.clone(),
    })
}

/// Solves `problem` with branch-and-bound on its binary variables.
pub fn solve_milp(problem: &LinearProblem, options: &SolverOptions) -> Result<Solution, SolveError> {
    problem.validate()?;
    options.validate()?;
    if problem.binaries().next().is_none() {
        return solve_lp(problem, options);
    }
    branch::branch_and_bound(problem, options)
}

/// Solver seam used by model builders and simulation drivers.
pub trait MilpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve_lp(&self, problem: &LinearProblem, options: &SolverOptions) -> Result<Solution, SolveError>;
    fn solve_milp(&self, problem: &LinearProblem, options: &SolverOptions) -> Result<Solution, SolveError>;
}

/// The in-crate simplex / branch-and-bound engine.
#[derive(Clone, Copy, Debug, Default)]
pub struct BuiltinSolver;

impl MilpBackend for BuiltinSolver {
    fn name(&self) -> &str {
        "builtin"
    }

    fn solve_lp(&self, problem: &LinearProblem, options: &SolverOptions) -> Result<Solution, SolveError> {
        solve_lp(problem, options)
    }

    fn solve_milp(&self, problem: &LinearProblem, options: &SolverOptions) -> Result<Solution, SolveError> {
        solve_milp(problem, options)
    }
}
