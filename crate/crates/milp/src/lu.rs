//! Sparse LU factorisation of simplex bases with product-form (eta) updates.
//!
//! The basis `B` is factorised by right-looking Gaussian elimination with a
//! Markowitz pivot search under threshold partial pivoting. Elimination step
//! `k` pivots on row `prow[k]` and basis position `pcol[k]`; the multipliers
//! of that step form the k-th column of `L`, the remaining pivot row the k-th
//! row of `U`. Basis changes are appended as eta columns until the caller
//! refactorises.

const NONE: usize = usize::MAX;
const PIVOT_THRESHOLD: f64 = 0.1;
const ABS_PIVOT_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;
const MAX_SEARCH: usize = 4;

/// Positions whose columns could not be pivoted and the rows left without a pivot.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactor {
    m: usize,
    prow: Vec<usize>,
    pcol: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    eta_pos: Vec<usize>,
    eta_piv: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
    work: Vec<f64>,
}

/// Intrusive doubly-linked lists of lines (rows or columns) bucketed by nonzero count.
struct Buckets {
    head: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    at: Vec<usize>,
}

impl Buckets {
    fn new(lines: usize, max_count: usize) -> Self {
        Self {
            head: vec![NONE; max_count + 2],
            next: vec![NONE; lines],
            prev: vec![NONE; lines],
            at: vec![NONE; lines],
        }
    }

    fn insert(&mut self, line: usize, count: usize) {
        let count = count.min(self.head.len() - 1);
        let h = self.head[count];
        self.next[line] = h;
        self.prev[line] = NONE;
        if h != NONE {
            self.prev[h] = line;
        }
        self.head[count] = line;
        self.at[line] = count;
    }

    fn remove(&mut self, line: usize) {
        let count = self.at[line];
        if count == NONE {
            return;
        }
        let (p, n) = (self.prev[line], self.next[line]);
        if p != NONE {
            self.next[p] = n;
        } else {
            self.head[count] = n;
        }
        if n != NONE {
            self.prev[n] = p;
        }
        self.at[line] = NONE;
    }

    fn update(&mut self, line: usize, count: usize) {
        self.remove(line);
        self.insert(line, count);
    }
}

fn lookup(col: &[(usize, f64)], row: usize) -> Option<f64> {
    col.iter().find(|e| e.0 == row).map(|e| e.1)
}

fn col_max(col: &[(usize, f64)]) -> f64 {
    col.iter().fold(0.0, |acc, e| acc.max(e.1.abs()))
}

impl LuFactor {
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Factorises the `m x m` matrix given in compressed-column form.
    pub fn factorize(
        m: usize,
        col_start: &[usize],
        row_idx: &[usize],
        vals: &[f64],
    ) -> Result<LuFactor, Singular> {
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for j in 0..m {
            let mut col = Vec::with_capacity(col_start[j + 1] - col_start[j]);
            for p in col_start[j]..col_start[j + 1] {
                if vals[p].abs() > DROP_TOL {
                    col.push((row_idx[p], vals[p]));
                    rows[row_idx[p]].push(j);
                }
            }
            cols.push(col);
        }
        let mut cbuck = Buckets::new(m, m);
        let mut rbuck = Buckets::new(m, m);
        for j in 0..m {
            cbuck.insert(j, cols[j].len());
        }
        for i in 0..m {
            rbuck.insert(i, rows[i].len());
        }

        let mut f = LuFactor {
            m,
            l_start: vec![0],
            u_start: vec![0],
            eta_start: vec![0],
            work: vec![0.0; m],
            ..Default::default()
        };
        let mut mark = vec![NONE; m];
        let mut col_done = vec![false; m];
        let mut row_done = vec![false; m];
        let mut urow: Vec<(usize, f64)> = Vec::new();
        let mut lcol: Vec<(usize, f64)> = Vec::new();

        for _step in 0..m {
            let Some((r, c, piv)) = find_pivot(&cols, &rows, &cbuck, &rbuck, m) else {
                break;
            };
            urow.clear();
            lcol.clear();
            for &j in &rows[r] {
                if j == c {
                    continue;
                }
                let colj = &mut cols[j];
                if let Some(pos) = colj.iter().position(|e| e.0 == r) {
                    urow.push((j, colj[pos].1));
                    colj.swap_remove(pos);
                }
            }
            for &(i, v) in &cols[c] {
                if i == r {
                    continue;
                }
                lcol.push((i, v / piv));
                let rowi = &mut rows[i];
                if let Some(pos) = rowi.iter().position(|&j| j == c) {
                    rowi.swap_remove(pos);
                }
            }
            cbuck.remove(c);
            rbuck.remove(r);
            cols[c].clear();
            rows[r].clear();
            col_done[c] = true;
            row_done[r] = true;

            for &(j, urj) in &urow {
                let colj = &mut cols[j];
                for (idx, e) in colj.iter().enumerate() {
                    mark[e.0] = idx;
                }
                for &(i, l) in &lcol {
                    let idx = mark[i];
                    if idx != NONE {
                        colj[idx].1 -= l * urj;
                    } else {
                        mark[i] = colj.len();
                        colj.push((i, -l * urj));
                        rows[i].push(j);
                    }
                }
                for e in colj.iter() {
                    mark[e.0] = NONE;
                }
                let mut p = 0;
                while p < colj.len() {
                    if colj[p].1.abs() <= DROP_TOL {
                        let i = colj[p].0;
                        colj.swap_remove(p);
                        let rowi = &mut rows[i];
                        if let Some(q) = rowi.iter().position(|&jj| jj == j) {
                            rowi.swap_remove(q);
                        }
                    } else {
                        p += 1;
                    }
                }
                cbuck.update(j, colj.len());
            }
            for &(i, _) in &lcol {
                rbuck.update(i, rows[i].len());
            }

            f.prow.push(r);
            f.pcol.push(c);
            f.u_diag.push(piv);
            for &(j, v) in &urow {
                f.u_idx.push(j);
                f.u_val.push(v);
            }
            f.u_start.push(f.u_idx.len());
            for &(i, l) in &lcol {
                if l != 0.0 {
                    f.l_idx.push(i);
                    f.l_val.push(l);
                }
            }
            f.l_start.push(f.l_idx.len());
        }

        if f.prow.len() < m {
            return Err(Singular {
                positions: (0..m).filter(|&j| !col_done[j]).collect(),
                rows: (0..m).filter(|&i| !row_done[i]).collect(),
            });
        }
        Ok(f)
    }

    /// Solves `B x = rhs` in place; on input `rhs` is indexed by row, on output by basis position.
    pub fn ftran(&mut self, rhs: &mut Vec<f64>) {
        let m = self.m;
        for k in 0..m {
            let w = rhs[self.prow[k]];
            if w != 0.0 {
                for p in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_idx[p]] -= self.l_val[p] * w;
                }
            }
        }
        let out = &mut self.work;
        for k in (0..m).rev() {
            let mut s = rhs[self.prow[k]];
            for p in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[p] * out[self.u_idx[p]];
            }
            out[self.pcol[k]] = s / self.u_diag[k];
        }
        std::mem::swap(rhs, &mut self.work);
        for e in 0..self.eta_pos.len() {
            let p = self.eta_pos[e];
            let xp = rhs[p] / self.eta_piv[e];
            rhs[p] = xp;
            if xp != 0.0 {
                for q in self.eta_start[e]..self.eta_start[e + 1] {
                    rhs[self.eta_idx[q]] -= self.eta_val[q] * xp;
                }
            }
        }
    }

    /// Solves `B^T y = rhs` in place; on input `rhs` is indexed by basis position, on output by row.
    pub fn btran(&mut self, rhs: &mut Vec<f64>) {
        let m = self.m;
        for e in (0..self.eta_pos.len()).rev() {
            let p = self.eta_pos[e];
            let mut s = rhs[p];
            for q in self.eta_start[e]..self.eta_start[e + 1] {
                s -= self.eta_val[q] * rhs[self.eta_idx[q]];
            }
            rhs[p] = s / self.eta_piv[e];
        }
        let z = &mut self.work;
        for k in 0..m {
            let zr = rhs[self.pcol[k]] / self.u_diag[k];
            z[self.prow[k]] = zr;
            if zr != 0.0 {
                for p in self.u_start[k]..self.u_start[k + 1] {
                    rhs[self.u_idx[p]] -= self.u_val[p] * zr;
                }
            }
        }
        for k in (0..m).rev() {
            let r = self.prow[k];
            let mut s = z[r];
            for p in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[p] * z[self.l_idx[p]];
            }
            z[r] = s;
        }
        std::mem::swap(rhs, &mut self.work);
    }

    /// Records the replacement of the column at `pos` by a column whose
    /// representation in the current basis is `alpha` (indexed by position).
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        self.eta_pos.push(pos);
        self.eta_piv.push(alpha[pos]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > 1e-13 {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }
}

fn find_pivot(
    cols: &[Vec<(usize, f64)>],
    rows: &[Vec<usize>],
    cbuck: &Buckets,
    rbuck: &Buckets,
    m: usize,
) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    let mut best_cost = usize::MAX;
    let mut searched = 0usize;
    let max_count = cbuck.head.len() - 1;
    for cnt in 1..=max_count.min(m) {
        let mut j = cbuck.head[cnt];
        while j != NONE {
            let col = &cols[j];
            let cmax = col_max(col);
            for &(i, v) in col {
                let a = v.abs();
                if a >= PIVOT_THRESHOLD * cmax && a > ABS_PIVOT_TOL {
                    let cost = (rows[i].len() - 1) * (cnt - 1);
                    if cost < best_cost || (cost == best_cost && a > best.map_or(0.0, |b| b.2.abs())) {
                        best_cost = cost;
                        best = Some((i, j, v));
                    }
                }
            }
            if best.is_some() {
                searched += 1;
                if best_cost == 0 || searched >= MAX_SEARCH {
                    return best;
                }
            }
            j = cbuck.next[j];
        }
        let mut i = rbuck.head[cnt];
        while i != NONE {
            for &j in &rows[i] {
                let col = &cols[j];
                let Some(v) = lookup(col, i) else { continue };
                let a = v.abs();
                if a >= PIVOT_THRESHOLD * col_max(col) && a > ABS_PIVOT_TOL {
                    let cost = (cnt - 1) * (col.len() - 1);
                    if cost < best_cost || (cost == best_cost && a > best.map_or(0.0, |b| b.2.abs())) {
                        best_cost = cost;
                        best = Some((i, j, v));
                    }
                }
            }
            if best.is_some() {
                searched += 1;
                if best_cost == 0 || searched >= MAX_SEARCH {
                    return best;
                }
            }
            i = rbuck.next[i];
        }
        if best.is_some() && best_cost <= cnt * cnt {
            return best;
        }
    }
    best
}
