//! Conversion of a [`LinearProblem`] into the computational form used by the simplex code:
//! `A x - r = 0` with bounds on structural columns `x` and on row activities `r`.

use crate::problem::{LinearProblem, Sense};

#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub n: usize,
    pub m: usize,
    pub col_start: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub col_val: Vec<f64>,
    pub row_start: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub row_val: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
    /// Set when an empty constraint cannot be satisfied.
    pub trivially_infeasible: bool,
}

impl StandardForm {
    /// Builds the standard form. Rows without any nonzero coefficient are dropped
    /// (recording infeasibility if their right-hand side cannot hold at zero).
    pub fn new(problem: &LinearProblem, feas_tol: f64) -> Self {
        let n = problem.num_vars();
        let mut trivially_infeasible = false;
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(problem.num_constraints());
        let mut row_lo = Vec::new();
        let mut row_hi = Vec::new();
        let mut acc = vec![0.0f64; n];
        let mut touched: Vec<usize> = Vec::new();
        for c in &problem.constraints {
            for &(v, coef) in &c.terms {
                touched.push(v.0);
                acc[v.0] += coef;
            }
            touched.sort_unstable();
            touched.dedup();
            let mut row = Vec::with_capacity(touched.len());
            for &j in &touched {
                if acc[j] != 0.0 {
                    row.push((j, acc[j]));
                }
                acc[j] = 0.0;
            }
            touched.clear();
            let (lo, hi) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            if row.is_empty() {
                if lo > feas_tol || hi < -feas_tol {
                    trivially_infeasible = true;
                }
                continue;
            }
            rows.push(row);
            row_lo.push(lo);
            row_hi.push(hi);
        }
        let m = rows.len();

        let mut row_start = Vec::with_capacity(m + 1);
        let mut row_idx = Vec::new();
        let mut row_val = Vec::new();
        row_start.push(0);
        let mut col_count = vec![0usize; n];
        for row in &rows {
            for &(j, v) in row {
                row_idx.push(j);
                row_val.push(v);
                col_count[j] += 1;
            }
            row_start.push(row_idx.len());
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + col_count[j];
        }
        let nnz = row_idx.len();
        let mut col_idx = vec![0usize; nnz];
        let mut col_val = vec![0.0f64; nnz];
        let mut fill = col_start.clone();
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                col_idx[fill[j]] = i;
                col_val[fill[j]] = v;
                fill[j] += 1;
            }
        }

        StandardForm {
            n,
            m,
            col_start,
            col_idx,
            col_val,
            row_start,
            row_idx,
            row_val,
            cost: problem.objective_vector(),
            lower: problem.variables.iter().map(|v| v.lower).collect(),
            upper: problem.variables.iter().map(|v| v.upper).collect(),
            row_lo,
            row_hi,
            trivially_infeasible,
        }
    }
}
