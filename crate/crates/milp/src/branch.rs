//! LP-based branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::problem::{relative_gap, LinearProblem, NodeSelection, Solution, SolverOptions, Status, VarKind};
use crate::simplex::{BasisSnapshot, LpStatus, Simplex, Tolerances};
use crate::standard::StandardForm;
use crate::SolveError;

/// Integrality tolerance for binaries.
pub const INT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
struct BoundChange {
    var: usize,
    lower: f64,
    upper: f64,
}

struct OpenNode {
    bound: f64,
    seq: u64,
    changes: Vec<BoundChange>,
    basis: Option<Rc<BasisSnapshot>>,
    /// Branch that created this node: (variable, up, distance moved).
    branch: Option<(usize, bool, f64)>,
    depth_first: bool,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    // BinaryHeap pops the greatest element.
    fn cmp(&self, other: &Self) -> Ordering {
        if self.depth_first {
            self.seq.cmp(&other.seq)
        } else {
            other
                .bound
                .total_cmp(&self.bound)
                .then_with(|| self.seq.cmp(&other.seq))
        }
    }
}

pub(crate) fn tolerances(options: &SolverOptions) -> Tolerances {
    Tolerances {
        feas: options.feas_tol,
        opt: options.opt_tol,
        stall_threshold: options.stall_threshold,
    }
}

pub(crate) fn deadline(start: Instant, options: &SolverOptions) -> Instant {
    start + Duration::from_secs_f64(options.time_limit.min(1e9))
}

fn fractionality(v: f64) -> f64 {
    (v - v.floor()).min(v.ceil() - v)
}

/// Per-variable average objective change per unit of branching distance.
struct Pseudocosts {
    sum: [Vec<f64>; 2],
    count: [Vec<u32>; 2],
}

impl Pseudocosts {
    fn new(n: usize) -> Self {
        Self { sum: [vec![0.0; n], vec![0.0; n]], count: [vec![0; n], vec![0; n]] }
    }

    fn record(&mut self, var: usize, up: bool, dist: f64, gain: f64) {
        if dist > INT_TOL && gain.is_finite() {
            let k = usize::from(up);
            self.sum[k][var] += gain.max(0.0) / dist;
            self.count[k][var] += 1;
        }
    }

    fn mean(&self, k: usize) -> f64 {
        let (s, c) = self.sum[k]
            .iter()
            .zip(&self.count[k])
            .filter(|(_, &c)| c > 0)
            .fold((0.0, 0u32), |(s, n), (v, &c)| (s + v / f64::from(c), n + 1));
        if c == 0 {
            1.0
        } else {
            s / f64::from(c)
        }
    }

    fn estimate(&self, var: usize, k: usize, fallback: f64) -> f64 {
        let c = self.count[k][var];
        if c == 0 {
            fallback
        } else {
            self.sum[k][var] / f64::from(c)
        }
    }

    /// Product-score choice among the fractional binaries.
    fn choose(&self, values: &[f64], binaries: &[usize]) -> Option<usize> {
        let fallback = [self.mean(0), self.mean(1)];
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for &j in binaries {
            let v = values[j];
            if fractionality(v) <= INT_TOL {
                continue;
            }
            let f = v - v.floor();
            let down = (self.estimate(j, 0, fallback[0]) * f).max(1e-6);
            let up = (self.estimate(j, 1, fallback[1]) * (1.0 - f)).max(1e-6);
            let score = down * up;
            if score > best_score {
                best_score = score;
                best = Some(j);
            }
        }
        best
    }
}

struct Incumbent {
    objective: f64,
    values: Vec<f64>,
}

/// Bytes of saved bases kept for open nodes; beyond this, nodes warm-start from whatever basis is loaded.
const SNAPSHOT_BUDGET: usize = 256 << 20;

/// Rounds the root relaxation by repeatedly fixing the least fractional binaries and re-solving.
/// Leaves `spx` with modified bounds; the caller restores them.
fn dive(spx: &mut Simplex<'_>, binaries: &[usize], n: usize) -> Option<Incumbent> {
    let mut fixed = vec![false; spx.lb.len()];
    for _ in 0..binaries.len() + 1 {
        let mut frac: Vec<(f64, usize)> = binaries
            .iter()
            .filter(|&&j| !fixed[j])
            .map(|&j| (fractionality(spx.x[j]), j))
            .collect();
        if frac.iter().all(|&(f, _)| f <= INT_TOL) {
            return Some(Incumbent { objective: spx.objective(), values: spx.x[..n].to_vec() });
        }
        // Integral binaries are pinned too, so later steps cannot undo them.
        let integral: Vec<usize> = frac.iter().filter(|&&(f, _)| f <= INT_TOL).map(|&(_, j)| j).collect();
        frac.retain(|&(f, _)| f > INT_TOL);
        frac.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let batch = (frac.len() / 8).max(1);
        let mut attempt: Vec<(usize, f64)> = integral.iter().map(|&j| (j, spx.x[j].round())).collect();
        attempt.extend(frac.iter().take(batch).map(|&(_, j)| (j, spx.x[j].round())));
        let saved: Vec<(usize, f64, f64)> = attempt.iter().map(|&(j, _)| (j, spx.lb[j], spx.ub[j])).collect();
        for &(j, v) in &attempt {
            spx.set_bounds(j, v, v);
        }
        let mut st = spx.resolve_after_bound_change();
        if st != LpStatus::Optimal {
            // retry with a single variable, then with its other value
            for &(j, l, u) in &saved {
                spx.set_bounds(j, l, u);
            }
            let (j, v) = attempt[integral.len()];
            let mut ok = false;
            for target in [v, 1.0 - v] {
                for &k in &integral {
                    spx.set_bounds(k, spx.x[k].round(), spx.x[k].round());
                }
                spx.set_bounds(j, target, target);
                st = spx.resolve_after_bound_change();
                if st == LpStatus::Optimal {
                    ok = true;
                    break;
                }
                spx.set_bounds(j, saved[integral.len()].1, saved[integral.len()].2);
            }
            if !ok {
                return None;
            }
            fixed[j] = true;
            for &k in &integral {
                fixed[k] = true;
            }
            continue;
        }
        for &(j, _) in &attempt {
            fixed[j] = true;
        }
    }
    None
}

pub(crate) fn branch_and_bound(problem: &LinearProblem, options: &SolverOptions) -> Result<Solution, SolveError> {
    let start = Instant::now();
    let sf = StandardForm::new(problem, options.feas_tol);
    let n = sf.n;
    let binaries: Vec<usize> = problem
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    let offset = problem.objective_offset;
    let root_lb: Vec<f64> = sf.lower.clone();
    let root_ub: Vec<f64> = sf.upper.clone();

    let mut spx = Simplex::new(&sf, tolerances(options));
    spx.deadline = Some(deadline(start, options));

    let finish = |status: Status,
                  inc: Option<Incumbent>,
                  bound: f64,
                  nodes: usize,
                  iters: usize| {
        let (objective, values) = match inc {
            Some(i) => (i.objective + offset, i.values),
            None => (f64::INFINITY, Vec::new()),
        };
        let best_bound = bound + offset;
        let gap = if status.has_incumbent() {
            relative_gap(objective, best_bound.min(objective))
        } else {
            f64::INFINITY
        };
        Solution {
            status,
            values,
            objective,
            best_bound: best_bound.min(objective),
            gap,
            nodes_explored: nodes,
            simplex_iterations: iters,
            wall_time: start.elapsed().as_secs_f64(),
            options: options.clone(),
        }
    };

    let root = spx.solve();
    match root {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(finish(Status::Infeasible, None, f64::INFINITY, 1, spx.iterations)),
        LpStatus::Unbounded => {
            return Ok(finish(Status::Unbounded, None, f64::NEG_INFINITY, 1, spx.iterations))
        }
        LpStatus::TimeLimit => {
            return Ok(finish(Status::TimeLimitNoIncumbent, None, f64::NEG_INFINITY, 1, spx.iterations))
        }
        LpStatus::Failed => return Err(SolveError::Numerical("root relaxation failed".into())),
    }
    let root_bound = spx.objective();
    let depth_first = options.node_selection == NodeSelection::DepthFirst;

    let mut incumbent: Option<Incumbent> = None;
    let root_has_fraction = binaries.iter().any(|&j| fractionality(spx.x[j]) > INT_TOL);
    if root_has_fraction && !depth_first {
        let root_snap = spx.snapshot();
        if let Some(found) = dive(&mut spx, &binaries, n) {
            log::debug!("dive found {} (root bound {root_bound})", found.objective);
            incumbent = Some(found);
        }
        for j in 0..n {
            spx.set_bounds(j, root_lb[j], root_ub[j]);
        }
        let st = if spx.restore(&root_snap) { spx.solve() } else { spx.solve_cold() };
        if st != LpStatus::Optimal {
            return Err(SolveError::Numerical("root relaxation failed after heuristic".into()));
        }
    }

    let mut heap: BinaryHeap<OpenNode> = BinaryHeap::new();
    let mut seq: u64 = 0;
    let mut nodes = 0usize;
    let mut pseudo = Pseudocosts::new(n);
    let mut snapshot_bytes = 0usize;
    // The node whose LP is currently loaded in `spx`, if it should be processed next.
    let mut current: Option<(Vec<BoundChange>, f64, Option<(usize, bool, f64)>)> = Some((Vec::new(), root_bound, None));
    let mut loaded_solved = true;
    let mut global_bound = root_bound;
    let mut timed_out = false;

    let prune_level = |inc: &Option<Incumbent>| -> f64 {
        match inc {
            Some(i) => i.objective - (options.rel_gap * i.objective.abs()).max(1e-9),
            None => f64::INFINITY,
        }
    };
    let open_min = |heap: &BinaryHeap<OpenNode>| -> f64 {
        if depth_first {
            heap.iter().map(|nd| nd.bound).fold(f64::INFINITY, f64::min)
        } else {
            heap.peek().map_or(f64::INFINITY, |nd| nd.bound)
        }
    };

    loop {
        let (changes, parent_bound, branch, solved_status) = match current.take() {
            Some((changes, pb, br)) => {
                let st = if loaded_solved {
                    LpStatus::Optimal
                } else {
                    spx.resolve_after_bound_change()
                };
                (changes, pb, br, st)
            }
            None => {
                let Some(node) = heap.pop() else { break };
                if let Some(b) = &node.basis {
                    if Rc::strong_count(b) == 1 {
                        snapshot_bytes -= b.bytes();
                    }
                }
                if node.bound >= prune_level(&incumbent) {
                    if depth_first {
                        continue;
                    }
                    // best-first: every remaining node is at least as bad
                    heap.clear();
                    break;
                }
                for j in 0..n {
                    spx.set_bounds(j, root_lb[j], root_ub[j]);
                }
                for c in &node.changes {
                    spx.set_bounds(c.var, c.lower, c.upper);
                }
                let st = match &node.basis {
                    Some(b) if spx.restore(b) => spx.solve(),
                    Some(_) => spx.solve_cold(),
                    None => spx.solve(),
                };
                (node.changes, node.bound, node.branch, st)
            }
        };
        loaded_solved = false;
        nodes += 1;
        let status = match solved_status {
            LpStatus::Failed => {
                log::warn!("node LP failed numerically; retrying from slack basis");
                spx.solve_cold()
            }
            s => s,
        };
        match status {
            LpStatus::TimeLimit => {
                timed_out = true;
                break;
            }
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded | LpStatus::Failed => {
                log::warn!("discarding node with status {status:?}");
                continue;
            }
            LpStatus::Optimal => {}
        }
        let obj = spx.objective();
        if let Some((var, up, dist)) = branch {
            pseudo.record(var, up, dist, obj - parent_bound);
        }
        let node_bound = obj.max(parent_bound);
        if node_bound >= prune_level(&incumbent) {
            continue;
        }
        match pseudo.choose(&spx.x, &binaries) {
            None => {
                let values: Vec<f64> = spx.x[..n].to_vec();
                log::debug!("incumbent {obj} at node {nodes}");
                incumbent = Some(Incumbent { objective: obj, values });
            }
            Some(j) => {
                let v = spx.x[j];
                let f = v - v.floor();
                let down = BoundChange { var: j, lower: spx.lb[j], upper: v.floor() };
                let up = BoundChange { var: j, lower: v.ceil(), upper: spx.ub[j] };
                let (first, second, first_up) = if f >= 0.5 { (up, down, true) } else { (down, up, false) };
                let dist = |is_up: bool| if is_up { 1.0 - f } else { f };
                // Keep plunging while the node stays close to the best open bound.
                let best_open = open_min(&heap).min(node_bound);
                let plunge = depth_first
                    || match &incumbent {
                        None => true,
                        Some(inc) => node_bound <= best_open + 0.25 * (inc.objective - best_open),
                    };
                let snap = if snapshot_bytes < SNAPSHOT_BUDGET {
                    let s = Rc::new(spx.snapshot());
                    snapshot_bytes += s.bytes();
                    Some(s)
                } else {
                    None
                };
                let mut other = changes.clone();
                other.push(second);
                seq += 1;
                heap.push(OpenNode {
                    bound: node_bound,
                    seq,
                    changes: other,
                    basis: snap.clone(),
                    branch: Some((j, !first_up, dist(!first_up))),
                    depth_first,
                });
                let mut mine = changes;
                mine.push(first);
                if plunge {
                    spx.set_bounds(first.var, first.lower, first.upper);
                    current = Some((mine, node_bound, Some((j, first_up, dist(first_up)))));
                } else {
                    seq += 1;
                    heap.push(OpenNode {
                        bound: node_bound,
                        seq,
                        changes: mine,
                        basis: snap,
                        branch: Some((j, first_up, dist(first_up))),
                        depth_first,
                    });
                }
            }
        }
        // gap-based termination
        if let Some(inc) = &incumbent {
            if !depth_first || nodes % 64 == 0 || heap.is_empty() {
                let open = open_min(&heap).min(current.as_ref().map_or(f64::INFINITY, |c| c.1));
                global_bound = open.min(inc.objective);
                if relative_gap(inc.objective, global_bound) <= options.rel_gap {
                    break;
                }
            }
        }
        if nodes % 500 == 0 {
            log::debug!(
                "nodes {nodes} open {} incumbent {:?} bound {global_bound}",
                heap.len(),
                incumbent.as_ref().map(|i| i.objective)
            );
        }
        if nodes % 16 == 0 && spx.deadline.is_some_and(|d| Instant::now() >= d) {
            timed_out = true;
            break;
        }
    }

    let open_bound = heap
        .iter()
        .map(|nd| nd.bound)
        .fold(f64::INFINITY, f64::min)
        .min(current.as_ref().map_or(f64::INFINITY, |c| c.1));
    let iters = spx.iterations;
    drop(spx);
    let Some(inc) = incumbent else {
        let status = if timed_out { Status::TimeLimitNoIncumbent } else { Status::Infeasible };
        return Ok(finish(status, None, open_bound.min(global_bound), nodes, iters));
    };
    let bound = open_bound.min(inc.objective);
    let status = if timed_out {
        Status::TimeLimit
    } else if relative_gap(inc.objective, bound) <= 1e-12 {
        Status::Optimal
    } else {
        Status::FeasibleGap
    };
    let inc = polish(problem, &sf, inc, &binaries, options);
    Ok(finish(status, Some(inc), bound, nodes, iters))
}

/// Fixes binaries at their rounded incumbent values and re-solves the continuous part,
/// removing the drift that accumulates in warm-started node solves.
fn polish(
    problem: &LinearProblem,
    sf: &StandardForm,
    inc: Incumbent,
    binaries: &[usize],
    options: &SolverOptions,
) -> Incumbent {
    let mut spx = Simplex::new(sf, tolerances(options));
    for &j in binaries {
        let r = inc.values[j].round();
        spx.set_bounds(j, r, r);
    }
    if spx.solve_cold() != LpStatus::Optimal {
        let mut values = inc.values;
        for &j in binaries {
            values[j] = values[j].round();
        }
        return Incumbent { objective: inc.objective, values };
    }
    let mut values = spx.x[..sf.n].to_vec();
    for &j in binaries {
        values[j] = values[j].round();
    }
    let objective = problem.objective_value(&values) - problem.objective_offset;
    Incumbent { objective, values }
}
