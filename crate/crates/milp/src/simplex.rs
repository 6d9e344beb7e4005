//! Bounded-variable revised simplex (primal and dual) over a [`StandardForm`].
//!
//! Variables are indexed `0..n` (structural), `n..n+m` (row activities, column `-e_i`)
//! and `n+m..` (phase-one artificials, column `sign * e_row`). The dual simplex is
//! the workhorse: it starts from any dual-feasible basis, which is what
//! branch-and-bound produces after a bound change. The primal simplex is used
//! when the slack basis is not dual feasible and for final clean-up.

use std::time::Instant;

use crate::lu::LuFactor;
use crate::standard::StandardForm;

const NONE: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_INTERVAL: usize = 100;
const DEGENERATE_STEP: f64 = 1e-12;
/// Relative size of the cost perturbation applied while running the dual simplex.
const COST_PERTURBATION: f64 = 1e-6;

/// Deterministic value in [0, 1) per index.
fn jitter(j: usize) -> f64 {
    let mut z = (j as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    /// Numerical trouble the caller should recover from with a cold start.
    Failed,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Tolerances {
    pub feas: f64,
    pub opt: f64,
    pub stall_threshold: usize,
}

/// Saved basis used to warm-start a node.
#[derive(Clone, Debug)]
pub(crate) struct BasisSnapshot {
    state: Vec<VarState>,
}

impl BasisSnapshot {
    pub fn bytes(&self) -> usize {
        self.state.len() * std::mem::size_of::<VarState>()
    }
}

pub(crate) struct Simplex<'a> {
    sf: &'a StandardForm,
    tol: Tolerances,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    cost: Vec<f64>,
    /// Unperturbed costs while a dual-simplex cost perturbation is active.
    base_cost: Option<Vec<f64>>,
    art_row: Vec<usize>,
    art_sign: Vec<f64>,
    pub x: Vec<f64>,
    d: Vec<f64>,
    pub state: Vec<VarState>,
    pub basis: Vec<usize>,
    pos_of: Vec<usize>,
    lu: LuFactor,
    dual_w: Vec<f64>,
    pub iterations: usize,
    pub deadline: Option<Instant>,
    col_buf: Vec<f64>,
    row_buf: Vec<f64>,
    alpha_row: Vec<f64>,
    touched: Vec<usize>,
    in_touched: Vec<bool>,
}

impl<'a> Simplex<'a> {
    pub fn new(sf: &'a StandardForm, tol: Tolerances) -> Self {
        let (n, m) = (sf.n, sf.m);
        let total = n + m;
        let mut lb = Vec::with_capacity(total);
        let mut ub = Vec::with_capacity(total);
        lb.extend_from_slice(&sf.lower);
        ub.extend_from_slice(&sf.upper);
        lb.extend_from_slice(&sf.row_lo);
        ub.extend_from_slice(&sf.row_hi);
        let mut cost = sf.cost.clone();
        cost.resize(total, 0.0);
        let mut s = Simplex {
            sf,
            tol,
            lb,
            ub,
            cost,
            base_cost: None,
            art_row: Vec::new(),
            art_sign: Vec::new(),
            x: vec![0.0; total],
            d: vec![0.0; total],
            state: vec![VarState::Lower; total],
            basis: (n..n + m).collect(),
            pos_of: vec![NONE; total],
            lu: LuFactor::default(),
            dual_w: vec![1.0; m],
            iterations: 0,
            deadline: None,
            col_buf: vec![0.0; m],
            row_buf: vec![0.0; m],
            alpha_row: vec![0.0; total],
            touched: Vec::new(),
            in_touched: vec![false; total],
        };
        s.slack_basis();
        s
    }

    fn total(&self) -> usize {
        self.lb.len()
    }

    /// Resets to the all-logical basis with structurals at the bound favoured by their cost.
    pub fn slack_basis(&mut self) {
        let (n, m) = (self.sf.n, self.sf.m);
        let total = self.total();
        self.basis = (n..n + m).collect();
        for p in self.pos_of.iter_mut() {
            *p = NONE;
        }
        for (pos, &v) in self.basis.iter().enumerate() {
            self.pos_of[v] = pos;
        }
        for j in 0..total {
            if self.pos_of[j] != NONE {
                self.state[j] = VarState::Basic;
                continue;
            }
            self.state[j] = self.preferred_state(j);
            self.x[j] = self.nonbasic_value(j);
        }
        self.dual_w.iter_mut().for_each(|w| *w = 1.0);
        self.lu = LuFactor::default();
    }

    fn preferred_state(&self, j: usize) -> VarState {
        let (l, u) = (self.lb[j], self.ub[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if self.cost[j] >= 0.0 {
                    VarState::Lower
                } else {
                    VarState::Upper
                }
            }
            (true, false) => VarState::Lower,
            (false, true) => VarState::Upper,
            (false, false) => VarState::Free,
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Lower => self.lb[j],
            VarState::Upper => self.ub[j],
            VarState::Free => 0.0,
            VarState::Basic => self.x[j],
        }
    }

    pub fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot { state: self.state.clone() }
    }

    /// Installs a saved basis; nonbasic variables are moved to their (possibly changed) bounds.
    pub fn restore(&mut self, snap: &BasisSnapshot) -> bool {
        if snap.state.len() != self.total() {
            return false;
        }
        let basis: Vec<usize> = (0..snap.state.len()).filter(|&j| snap.state[j] == VarState::Basic).collect();
        if basis.len() != self.sf.m {
            return false;
        }
        self.basis = basis;
        self.state.clone_from(&snap.state);
        for p in self.pos_of.iter_mut() {
            *p = NONE;
        }
        for (pos, &v) in self.basis.iter().enumerate() {
            self.pos_of[v] = pos;
        }
        for j in 0..self.total() {
            if self.state[j] == VarState::Basic {
                continue;
            }
            self.fix_nonbasic_state(j);
            self.x[j] = self.nonbasic_value(j);
        }
        true
    }

    fn fix_nonbasic_state(&mut self, j: usize) {
        let (l, u) = (self.lb[j], self.ub[j]);
        let st = self.state[j];
        let ok = match st {
            VarState::Lower => l.is_finite(),
            VarState::Upper => u.is_finite(),
            VarState::Free => !l.is_finite() && !u.is_finite(),
            VarState::Basic => true,
        };
        if !ok {
            self.state[j] = if l.is_finite() {
                VarState::Lower
            } else if u.is_finite() {
                VarState::Upper
            } else {
                VarState::Free
            };
        }
    }

    pub fn set_bounds(&mut self, j: usize, l: f64, u: f64) {
        self.lb[j] = l;
        self.ub[j] = u;
        if self.state[j] != VarState::Basic {
            self.fix_nonbasic_state(j);
            self.x[j] = self.nonbasic_value(j);
        }
    }

    /// Adds `coef * e_row` column.
    fn add_artificial(&mut self, row: usize, sign: f64) -> usize {
        let j = self.total();
        self.art_row.push(row);
        self.art_sign.push(sign);
        self.lb.push(0.0);
        self.ub.push(f64::INFINITY);
        self.cost.push(0.0);
        self.x.push(0.0);
        self.d.push(0.0);
        self.state.push(VarState::Lower);
        self.pos_of.push(NONE);
        self.alpha_row.push(0.0);
        self.in_touched.push(false);
        j
    }

    // ----- column access ---------------------------------------------------

    fn scatter_col(&self, j: usize, out: &mut [f64], scale: f64) {
        let (n, m) = (self.sf.n, self.sf.m);
        if j < n {
            for p in self.sf.col_start[j]..self.sf.col_start[j + 1] {
                out[self.sf.col_idx[p]] += scale * self.sf.col_val[p];
            }
        } else if j < n + m {
            out[j - n] -= scale;
        } else {
            let a = j - n - m;
            out[self.art_row[a]] += scale * self.art_sign[a];
        }
    }

    fn dot_col(&self, j: usize, y: &[f64]) -> f64 {
        let (n, m) = (self.sf.n, self.sf.m);
        if j < n {
            let mut s = 0.0;
            for p in self.sf.col_start[j]..self.sf.col_start[j + 1] {
                s += y[self.sf.col_idx[p]] * self.sf.col_val[p];
            }
            s
        } else if j < n + m {
            -y[j - n]
        } else {
            let a = j - n - m;
            self.art_sign[a] * y[self.art_row[a]]
        }
    }

    // ----- factorisation ---------------------------------------------------

    fn factor(&mut self) {
        let m = self.sf.m;
        for attempt in 0..3 {
            let mut start = Vec::with_capacity(m + 1);
            let mut idx = Vec::new();
            let mut val = Vec::new();
            start.push(0);
            let mut dense = vec![0.0; m];
            for pos in 0..m {
                let j = self.basis[pos];
                self.scatter_col(j, &mut dense, 1.0);
                self.collect_nonzeros(j, &mut dense, &mut idx, &mut val);
                start.push(idx.len());
            }
            match LuFactor::factorize(m, &start, &idx, &val) {
                Ok(lu) => {
                    self.lu = lu;
                    return;
                }
                Err(sing) => {
                    log::debug!(
                        "singular basis (attempt {attempt}): replacing {} columns",
                        sing.positions.len()
                    );
                    let n = self.sf.n;
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let old = self.basis[pos];
                        let logical = n + row;
                        self.pos_of[old] = NONE;
                        self.state[old] = VarState::Lower;
                        self.fix_nonbasic_state(old);
                        self.state[old] = self.nearest_state(old);
                        self.x[old] = self.nonbasic_value(old);
                        // the logical might be nonbasic elsewhere; make it basic here
                        self.basis[pos] = logical;
                        self.pos_of[logical] = pos;
                        self.state[logical] = VarState::Basic;
                    }
                }
            }
        }
        panic!("basis repair failed to produce a nonsingular basis");
    }

    fn collect_nonzeros(&self, j: usize, dense: &mut [f64], idx: &mut Vec<usize>, val: &mut Vec<f64>) {
        let (n, m) = (self.sf.n, self.sf.m);
        let mut take = |i: usize, dense: &mut [f64]| {
            if dense[i] != 0.0 {
                idx.push(i);
                val.push(dense[i]);
                dense[i] = 0.0;
            }
        };
        if j < n {
            for p in self.sf.col_start[j]..self.sf.col_start[j + 1] {
                take(self.sf.col_idx[p], dense);
            }
        } else if j < n + m {
            take(j - n, dense);
        } else {
            take(self.art_row[j - n - m], dense);
        }
    }

    /// Nonbasic state closest to the current value.
    fn nearest_state(&self, j: usize) -> VarState {
        let (l, u, v) = (self.lb[j], self.ub[j], self.x[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if (v - l).abs() <= (u - v).abs() {
                    VarState::Lower
                } else {
                    VarState::Upper
                }
            }
            (true, false) => VarState::Lower,
            (false, true) => VarState::Upper,
            (false, false) => VarState::Free,
        }
    }

    pub fn refactor(&mut self) {
        self.factor();
        self.compute_primal();
        self.compute_dual();
    }

    fn compute_primal(&mut self) {
        let m = self.sf.m;
        let mut rhs = std::mem::take(&mut self.col_buf);
        rhs.clear();
        rhs.resize(m, 0.0);
        for j in 0..self.total() {
            if self.state[j] != VarState::Basic {
                let v = self.x[j];
                if v != 0.0 {
                    self.scatter_col(j, &mut rhs, -v);
                }
            }
        }
        self.lu.ftran(&mut rhs);
        for pos in 0..m {
            self.x[self.basis[pos]] = rhs[pos];
        }
        self.col_buf = rhs;
    }

    fn compute_dual(&mut self) {
        let m = self.sf.m;
        let mut y = std::mem::take(&mut self.row_buf);
        y.clear();
        y.resize(m, 0.0);
        for pos in 0..m {
            y[pos] = self.cost[self.basis[pos]];
        }
        self.lu.btran(&mut y);
        for j in 0..self.total() {
            self.d[j] = if self.state[j] == VarState::Basic {
                0.0
            } else {
                self.cost[j] - self.dot_col(j, &y)
            };
        }
        self.row_buf = y;
    }

    /// Computes row `r` of `B^-1 A` for nonbasic columns into `alpha_row` (sparse via `touched`).
    fn compute_pivot_row(&mut self, r: usize) {
        let m = self.sf.m;
        let (n, total) = (self.sf.n, self.total());
        for &j in &self.touched {
            self.alpha_row[j] = 0.0;
            self.in_touched[j] = false;
        }
        self.touched.clear();
        let mut rho = std::mem::take(&mut self.row_buf);
        rho.clear();
        rho.resize(m, 0.0);
        rho[r] = 1.0;
        self.lu.btran(&mut rho);
        for i in 0..m {
            let ri = rho[i];
            if ri.abs() < 1e-13 {
                continue;
            }
            for p in self.sf.row_start[i]..self.sf.row_start[i + 1] {
                let j = self.sf.row_idx[p];
                if !self.in_touched[j] {
                    self.in_touched[j] = true;
                    self.touched.push(j);
                }
                self.alpha_row[j] += ri * self.sf.row_val[p];
            }
            let lj = n + i;
            if !self.in_touched[lj] {
                self.in_touched[lj] = true;
                self.touched.push(lj);
            }
            self.alpha_row[lj] -= ri;
        }
        for a in 0..self.art_row.len() {
            let j = n + m + a;
            let v = self.art_sign[a] * rho[self.art_row[a]];
            if v != 0.0 {
                if !self.in_touched[j] {
                    self.in_touched[j] = true;
                    self.touched.push(j);
                }
                self.alpha_row[j] += v;
            }
        }
        debug_assert!(self.touched.iter().all(|&j| j < total));
        self.row_buf = rho;
    }

    fn compute_column(&mut self, q: usize) -> Vec<f64> {
        let m = self.sf.m;
        let mut col = std::mem::take(&mut self.col_buf);
        col.clear();
        col.resize(m, 0.0);
        self.scatter_col(q, &mut col, 1.0);
        self.lu.ftran(&mut col);
        col
    }

    fn time_up(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lb[j] == self.ub[j]
    }

    fn basic_infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lb[j] - self.tol.feas {
            self.lb[j] - v
        } else if v > self.ub[j] + self.tol.feas {
            v - self.ub[j]
        } else {
            0.0
        }
    }

    pub fn primal_infeasibility(&self) -> f64 {
        self.basis.iter().map(|&j| self.basic_infeasibility(j)).fold(0.0, f64::max)
    }

    /// Largest violation of the dual sign conditions among nonbasic variables.
    fn dual_infeasibility(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.total() {
            if self.is_fixed(j) {
                continue;
            }
            let dj = self.d[j];
            let v = match self.state[j] {
                VarState::Basic => 0.0,
                VarState::Lower => (-dj).max(0.0),
                VarState::Upper => dj.max(0.0),
                VarState::Free => dj.abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Flips boxed nonbasics whose reduced cost has the wrong sign; returns false if an unboxed one remains.
    fn repair_dual_by_flips(&mut self) -> bool {
        let mut flipped = false;
        let mut ok = true;
        for j in 0..self.total() {
            if self.is_fixed(j) {
                continue;
            }
            let dj = self.d[j];
            match self.state[j] {
                VarState::Lower if dj < -self.tol.opt => {
                    if self.ub[j].is_finite() {
                        self.state[j] = VarState::Upper;
                        self.x[j] = self.ub[j];
                        flipped = true;
                    } else {
                        ok = false;
                    }
                }
                VarState::Upper if dj > self.tol.opt => {
                    if self.lb[j].is_finite() {
                        self.state[j] = VarState::Lower;
                        self.x[j] = self.lb[j];
                        flipped = true;
                    } else {
                        ok = false;
                    }
                }
                VarState::Free if dj.abs() > self.tol.opt => ok = false,
                _ => {}
            }
        }
        if flipped {
            self.compute_primal();
        }
        ok
    }

    pub fn objective(&self) -> f64 {
        (0..self.sf.n).map(|j| self.sf.cost[j] * self.x[j]).sum()
    }

    // ----- drivers ---------------------------------------------------------

    /// Solves from the current basis (cold or warm).
    pub fn solve(&mut self) -> LpStatus {
        if self.sf.trivially_infeasible {
            return LpStatus::Infeasible;
        }
        self.refactor();
        self.solve_loaded()
    }

    /// Warm re-solve after bound changes on basic variables of an optimal basis:
    /// the factorisation and reduced costs are still valid, so go straight to the dual simplex.
    pub fn resolve_after_bound_change(&mut self) -> LpStatus {
        if self.lu.dim() != self.sf.m {
            return self.solve();
        }
        match self.dual_with_cleanup() {
            LpStatus::Failed => self.solve(),
            other => other,
        }
    }

    /// Moves the reduced cost of every nonbasic, non-fixed variable further into its
    /// feasible direction by a small deterministic amount. Dual feasibility is kept
    /// because only nonbasic costs change.
    fn perturb_costs(&mut self) {
        if self.base_cost.is_some() {
            return;
        }
        let limit = self.sf.n + self.sf.m;
        self.base_cost = Some(self.cost.clone());
        for j in 0..limit {
            if self.is_fixed(j) {
                continue;
            }
            let delta = COST_PERTURBATION * (1.0 + self.cost[j].abs()) * (1.0 + jitter(j));
            let signed = match self.state[j] {
                VarState::Lower => delta,
                VarState::Upper => -delta,
                _ => continue,
            };
            self.cost[j] += signed;
            self.d[j] += signed;
        }
    }

    fn remove_perturbation(&mut self) {
        if let Some(base) = self.base_cost.take() {
            let total = self.total();
            self.cost = base;
            self.cost.resize(total, 0.0);
            self.compute_dual();
        }
    }

    /// Dual simplex under cost perturbation, then primal clean-up on the true costs.
    fn dual_with_cleanup(&mut self) -> LpStatus {
        self.perturb_costs();
        let st = self.dual_loop();
        self.remove_perturbation();
        if st != LpStatus::Optimal {
            return st;
        }
        if self.dual_infeasibility() > self.tol.opt {
            log::trace!("primal clean-up after perturbed dual simplex");
            return self.primal_loop();
        }
        LpStatus::Optimal
    }

    /// Runs the full verify-and-polish cycle starting from freshly computed primal and dual values.
    fn solve_loaded(&mut self) -> LpStatus {
        for _round in 0..4 {
            log::trace!(
                "solve round {_round}: iters {} primal inf {:e} dual inf {:e}",
                self.iterations,
                self.primal_infeasibility(),
                self.dual_infeasibility()
            );
            if self.dual_infeasibility() > self.tol.opt && !self.repair_dual_by_flips() {
                // Not dual feasible: primal route.
                let st = if self.primal_infeasibility() > 0.0 {
                    self.phase_one()
                } else {
                    LpStatus::Optimal
                };
                if st != LpStatus::Optimal {
                    return st;
                }
                let st = self.primal_loop();
                if st != LpStatus::Optimal {
                    return st;
                }
            } else {
                let st = self.dual_with_cleanup();
                if st != LpStatus::Optimal {
                    return st;
                }
            }
            self.refactor();
            if self.primal_infeasibility() == 0.0 && self.dual_infeasibility() <= self.tol.opt {
                return LpStatus::Optimal;
            }
            if self.primal_infeasibility() == 0.0 {
                let st = self.primal_loop();
                if st != LpStatus::Optimal {
                    return st;
                }
                self.refactor();
                if self.primal_infeasibility() == 0.0 {
                    return LpStatus::Optimal;
                }
            }
        }
        LpStatus::Failed
    }

    /// Cold start from the slack basis.
    pub fn solve_cold(&mut self) -> LpStatus {
        self.slack_basis();
        self.solve()
    }

    /// Phase one with artificial variables on the infeasible rows of the current basis.
    fn phase_one(&mut self) -> LpStatus {
        let n = self.sf.n;
        let m = self.sf.m;
        // Rows whose basic variable is infeasible get an artificial that takes over the basis slot.
        let real_cost = std::mem::take(&mut self.cost);
        self.cost = vec![0.0; real_cost.len()];
        let mut added = Vec::new();
        for pos in 0..m {
            let j = self.basis[pos];
            let inf = self.basic_infeasibility(j);
            if inf == 0.0 {
                continue;
            }
            // Only logicals can be swapped out without a column solve: the row slot is e_row.
            if j < n || j >= n + m {
                continue;
            }
            let row = j - n;
            let target = if self.x[j] < self.lb[j] { self.lb[j] } else { self.ub[j] };
            // A x - r + s a = 0 with r at target: s a = target - A x = target - current r.
            let diff = target - self.x[j];
            let sign = if diff >= 0.0 { 1.0 } else { -1.0 };
            let a = self.add_artificial(row, sign);
            self.state[j] = if self.x[j] < self.lb[j] { VarState::Lower } else { VarState::Upper };
            self.x[j] = target;
            self.pos_of[j] = NONE;
            self.basis[pos] = a;
            self.pos_of[a] = pos;
            self.state[a] = VarState::Basic;
            self.x[a] = diff.abs();
            added.push(a);
        }
        let structural_infeasible = self.primal_infeasibility() > 0.0;
        if structural_infeasible {
            // Infeasible basic structurals: add artificials for every row and restart from them.
            return self.phase_one_full(real_cost);
        }
        for &a in &added {
            self.cost[a] = 1.0;
        }
        for j in 0..self.art_row.len() {
            self.cost[n + m + j] = if self.ub[n + m + j] > 0.0 { 1.0 } else { 0.0 };
        }
        self.cost.truncate(self.total());
        self.refactor();
        let st = self.primal_loop();
        let infeas: f64 = (0..self.art_row.len()).map(|a| self.x[n + m + a].max(0.0)).sum();
        self.cost = real_cost;
        self.cost.resize(self.total(), 0.0);
        for a in 0..self.art_row.len() {
            let j = n + m + a;
            self.ub[j] = 0.0;
            if self.state[j] != VarState::Basic {
                self.state[j] = VarState::Lower;
                self.x[j] = 0.0;
            }
        }
        match st {
            LpStatus::Optimal => {}
            LpStatus::Unbounded => return LpStatus::Failed,
            other => return other,
        }
        if infeas > self.tol.feas * (1.0 + self.art_row.len() as f64).sqrt() * 10.0 {
            return LpStatus::Infeasible;
        }
        self.refactor();
        if self.primal_infeasibility() > 0.0 {
            // Drift after fixing artificials: polish with the dual simplex if possible.
            if self.dual_infeasibility() <= self.tol.opt || self.repair_dual_by_flips() {
                return self.dual_with_cleanup();
            }
        }
        LpStatus::Optimal
    }

    fn phase_one_full(&mut self, real_cost: Vec<f64>) -> LpStatus {
        // Reset to slack basis (all logicals basic) and retry; only logicals are basic there.
        self.cost = real_cost;
        self.cost.resize(self.total(), 0.0);
        let n_art = self.art_row.len();
        let (n, m) = (self.sf.n, self.sf.m);
        for a in 0..n_art {
            let j = n + m + a;
            self.ub[j] = 0.0;
            self.state[j] = VarState::Lower;
            self.x[j] = 0.0;
        }
        self.basis = (n..n + m).collect();
        for p in self.pos_of.iter_mut() {
            *p = NONE;
        }
        for (pos, &v) in self.basis.iter().enumerate() {
            self.pos_of[v] = pos;
        }
        for j in 0..self.total() {
            if self.pos_of[j] != NONE {
                self.state[j] = VarState::Basic;
            } else if j < n + m {
                self.state[j] = self.preferred_state(j);
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.refactor();
        if self.basis.iter().any(|&j| j < n) {
            return LpStatus::Failed;
        }
        self.phase_one()
    }

    /// Primal simplex with the current cost vector from a primal feasible basis.
    fn primal_loop(&mut self) -> LpStatus {
        let total = self.total();
        let mut degenerate_run = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations % 64 == 0 && self.time_up() {
                return LpStatus::TimeLimit;
            }
            if since_refactor >= REFACTOR_INTERVAL {
                self.refactor();
                since_refactor = 0;
            }
            let bland = degenerate_run >= self.tol.stall_threshold;
            // pricing
            let mut q = NONE;
            let mut best = 0.0;
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let dj = self.d[j];
                let score = match st {
                    VarState::Lower if dj < -self.tol.opt => -dj,
                    VarState::Upper if dj > self.tol.opt => dj,
                    VarState::Free if dj.abs() > self.tol.opt => dj.abs(),
                    _ => continue,
                };
                if bland {
                    q = j;
                    break;
                }
                if score > best {
                    best = score;
                    q = j;
                }
            }
            if q == NONE {
                return LpStatus::Optimal;
            }
            let dir = if self.d[q] < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.compute_column(q);
            let m = self.sf.m;

            // ratio test (Harris two-pass, or textbook under Bland)
            let mut tmax = f64::INFINITY;
            if !bland {
                for pos in 0..m {
                    let a = alpha[pos];
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let j = self.basis[pos];
                    let rate = -dir * a;
                    let lim = if rate < 0.0 {
                        if self.lb[j].is_finite() {
                            (self.x[j] - self.lb[j] + self.tol.feas) / -rate
                        } else {
                            continue;
                        }
                    } else if self.ub[j].is_finite() {
                        (self.ub[j] - self.x[j] + self.tol.feas) / rate
                    } else {
                        continue;
                    };
                    if lim < tmax {
                        tmax = lim;
                    }
                }
            }
            let mut leave = NONE;
            let mut step = f64::INFINITY;
            let mut best_piv = 0.0;
            for pos in 0..m {
                let a = alpha[pos];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[pos];
                let rate = -dir * a;
                let ratio = if rate < 0.0 {
                    if !self.lb[j].is_finite() {
                        continue;
                    }
                    (self.x[j] - self.lb[j]) / -rate
                } else {
                    if !self.ub[j].is_finite() {
                        continue;
                    }
                    (self.ub[j] - self.x[j]) / rate
                };
                if bland {
                    let better = ratio < step - 1e-12
                        || (ratio <= step + 1e-12 && leave != NONE && j < self.basis[leave]);
                    if leave == NONE || better {
                        step = ratio;
                        leave = pos;
                    }
                } else if ratio <= tmax && a.abs() > best_piv {
                    best_piv = a.abs();
                    leave = pos;
                    step = ratio;
                }
            }
            step = step.max(0.0);
            let range = self.ub[q] - self.lb[q];
            let flip = range.is_finite() && range <= step;
            if leave == NONE && !flip {
                self.col_buf = alpha;
                return LpStatus::Unbounded;
            }
            let step = if flip { range } else { step };
            self.iterations += 1;
            if step < DEGENERATE_STEP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            if step != 0.0 {
                for pos in 0..m {
                    let a = alpha[pos];
                    if a != 0.0 {
                        self.x[self.basis[pos]] -= dir * step * a;
                    }
                }
                self.x[q] += dir * step;
            }
            if flip {
                self.state[q] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                self.x[q] = self.nonbasic_value(q);
                self.col_buf = alpha;
                continue;
            }
            let lv = self.basis[leave];
            let a_rq = alpha[leave];
            self.compute_pivot_row(leave);
            let theta_d = self.d[q] / a_rq;
            for idx in 0..self.touched.len() {
                let j = self.touched[idx];
                if self.state[j] != VarState::Basic {
                    self.d[j] -= theta_d * self.alpha_row[j];
                }
            }
            let rate = -dir * a_rq;
            let to_lower = rate < 0.0;
            self.state[lv] = if to_lower { VarState::Lower } else { VarState::Upper };
            if self.is_fixed(lv) {
                self.state[lv] = VarState::Lower;
            }
            self.x[lv] = if to_lower { self.lb[lv] } else { self.ub[lv] };
            self.d[lv] = -theta_d;
            self.pos_of[lv] = NONE;
            self.d[q] = 0.0;
            self.state[q] = VarState::Basic;
            self.basis[leave] = q;
            self.pos_of[q] = leave;
            self.lu.update(leave, &alpha);
            self.col_buf = alpha;
            since_refactor += 1;
        }
    }

    fn shift_cost_to_sign(&mut self, j: usize) {
        let dj = self.d[j];
        let wrong = match self.state[j] {
            VarState::Lower => dj < 0.0,
            VarState::Upper => dj > 0.0,
            VarState::Free => dj != 0.0,
            VarState::Basic => false,
        };
        if wrong && !self.is_fixed(j) && self.base_cost.is_some() {
            self.cost[j] -= dj;
            self.d[j] = 0.0;
        }
    }

    /// After a refactorisation: flips boxed variables with clearly wrong-signed reduced
    /// costs and shifts the costs of any small leftovers.
    fn restore_dual_feasibility(&mut self) -> bool {
        if self.dual_infeasibility() <= self.tol.opt {
            return true;
        }
        let shift_limit = 1e3 * self.tol.opt;
        for j in 0..self.total() {
            if self.state[j] == VarState::Basic || self.is_fixed(j) {
                continue;
            }
            let dj = self.d[j];
            let bad = match self.state[j] {
                VarState::Lower => -dj,
                VarState::Upper => dj,
                _ => dj.abs(),
            };
            if bad > 0.0 && bad <= shift_limit {
                self.shift_cost_to_sign(j);
            }
        }
        self.dual_infeasibility() <= self.tol.opt || self.repair_dual_by_flips()
    }

    /// Dual simplex from a dual feasible basis.
    pub fn dual_loop(&mut self) -> LpStatus {
        let m = self.sf.m;
        let mut degenerate_run = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations % 64 == 0 && self.time_up() {
                return LpStatus::TimeLimit;
            }
            if since_refactor >= REFACTOR_INTERVAL {
                self.refactor();
                since_refactor = 0;
                if !self.restore_dual_feasibility() {
                    log::trace!("dual loop lost dual feasibility at iteration {}", self.iterations);
                    return LpStatus::Failed;
                }
                if self.iterations % 1000 < REFACTOR_INTERVAL {
                    let sum: f64 = self.basis.iter().map(|&j| self.basic_infeasibility(j)).sum();
                    log::trace!("dual iter {} degenerate_run {} sum inf {:e} obj {}", self.iterations, degenerate_run, sum, self.objective());
                }
            }
            let bland = degenerate_run >= self.tol.stall_threshold;
            // leaving row
            let mut r = NONE;
            let mut best = 0.0;
            for pos in 0..m {
                let j = self.basis[pos];
                let inf = self.basic_infeasibility(j);
                if inf == 0.0 {
                    continue;
                }
                if bland {
                    if r == NONE || j < self.basis[r] {
                        r = pos;
                    }
                    continue;
                }
                let score = inf * inf / self.dual_w[pos];
                if score > best {
                    best = score;
                    r = pos;
                }
            }
            if r == NONE {
                return LpStatus::Optimal;
            }
            let p = self.basis[r];
            let to_lower = self.x[p] < self.lb[p];
            let s = if to_lower { 1.0 } else { -1.0 };
            self.compute_pivot_row(r);

            // ratio test
            let mut tmax = f64::INFINITY;
            if !bland {
                for &j in &self.touched {
                    let st = self.state[j];
                    if st == VarState::Basic || self.is_fixed(j) {
                        continue;
                    }
                    let a = s * self.alpha_row[j];
                    let dj = self.d[j];
                    let lim = match st {
                        VarState::Lower if a < -PIVOT_TOL => (dj + self.tol.opt) / -a,
                        VarState::Upper if a > PIVOT_TOL => (dj - self.tol.opt) / -a,
                        VarState::Free if a.abs() > PIVOT_TOL => self.tol.opt / a.abs(),
                        _ => continue,
                    };
                    if lim < tmax {
                        tmax = lim;
                    }
                }
            }
            let mut q = NONE;
            let mut tq = f64::INFINITY;
            let mut best_piv = 0.0;
            for &j in &self.touched {
                let st = self.state[j];
                if st == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let a = s * self.alpha_row[j];
                let dj = self.d[j];
                let ratio = match st {
                    VarState::Lower if a < -PIVOT_TOL => dj / -a,
                    VarState::Upper if a > PIVOT_TOL => dj / -a,
                    VarState::Free if a.abs() > PIVOT_TOL => 0.0,
                    _ => continue,
                };
                if bland {
                    if q == NONE || ratio < tq - 1e-12 || (ratio <= tq + 1e-12 && j < q) {
                        q = j;
                        tq = ratio;
                    }
                } else if ratio <= tmax && a.abs() > best_piv {
                    best_piv = a.abs();
                    q = j;
                    tq = ratio;
                }
            }
            if q == NONE {
                return LpStatus::Infeasible;
            }
            let t = tq.max(0.0);
            let alpha = self.compute_column(q);
            let a_rq = alpha[r];
            if a_rq.abs() < PIVOT_TOL {
                // Row and column disagree numerically: refresh the factorisation.
                self.col_buf = alpha;
                self.refactor();
                since_refactor = 0;
                if !self.restore_dual_feasibility() {
                    return LpStatus::Failed;
                }
                degenerate_run += 1;
                continue;
            }
            self.iterations += 1;
            if t < DEGENERATE_STEP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            // primal update
            let target = if to_lower { self.lb[p] } else { self.ub[p] };
            let theta_p = (self.x[p] - target) / a_rq;
            for pos in 0..m {
                let a = alpha[pos];
                if a != 0.0 {
                    self.x[self.basis[pos]] -= theta_p * a;
                }
            }
            self.x[q] += theta_p;
            self.x[p] = target;
            // dual update; Harris steps may leave tiny wrong-signed reduced costs, which
            // are absorbed into the (already perturbed) costs
            if t != 0.0 {
                for idx in 0..self.touched.len() {
                    let j = self.touched[idx];
                    if self.state[j] != VarState::Basic {
                        self.d[j] += t * s * self.alpha_row[j];
                        self.shift_cost_to_sign(j);
                    }
                }
            }
            self.d[q] = 0.0;
            self.d[p] = s * t;
            self.state[p] = if to_lower { VarState::Lower } else { VarState::Upper };
            if self.is_fixed(p) {
                self.state[p] = VarState::Lower;
            }
            self.pos_of[p] = NONE;
            self.state[q] = VarState::Basic;
            self.basis[r] = q;
            self.pos_of[q] = r;
            // dual devex weights
            let wr = self.dual_w[r];
            for pos in 0..m {
                if pos == r {
                    continue;
                }
                let a = alpha[pos];
                if a != 0.0 {
                    let ratio = a / a_rq;
                    let cand = ratio * ratio * wr;
                    if cand > self.dual_w[pos] {
                        self.dual_w[pos] = cand;
                    }
                }
            }
            self.dual_w[r] = (wr / (a_rq * a_rq)).max(1.0);
            self.lu.update(r, &alpha);
            self.col_buf = alpha;
            since_refactor += 1;
        }
    }

    /// Reduced costs of all variables (valid after an optimal solve).
    #[allow(dead_code)]
    pub fn reduced_costs(&self) -> &[f64] {
        &self.d
    }
}
