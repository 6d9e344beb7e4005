use ldes_milp::{
    check_solution, solve_lp, solve_milp, LinearProblem, NodeSelection, Sense, SolverOptions, Status, VarKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn lp_single_lower_bound_row() {
    let mut p = LinearProblem::new();
    let x = p.add_continuous("x", 0.0, 10.0);
    p.add_objective_term(x, 1.0);
    p.add_constraint("c", vec![(x, 1.0)], Sense::Ge, 3.0);
    let s = solve_lp(&p, &opts()).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.objective - 3.0).abs() < 1e-9);
    assert!((s.values[0] - 3.0).abs() < 1e-9);
}

#[test]
fn lp_simplex_corner() {
    // Vertices of {x + y <= 1, 0 <= x, y <= 1}: (0,0), (1,0), (0,1); -x-y is -1 at the latter two.
    let mut p = LinearProblem::new();
    let x = p.add_continuous("x", 0.0, 1.0);
    let y = p.add_continuous("y", 0.0, 1.0);
    p.add_objective_term(x, -1.0);
    p.add_objective_term(y, -1.0);
    p.add_constraint("c", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
    let s = solve_lp(&p, &opts()).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.objective + 1.0).abs() < 1e-9);
    assert!(check_solution(&p, &s, 1e-9).clean);
}

#[test]
fn lp_empty_feasible_set() {
    let mut p = LinearProblem::new();
    let x = p.add_continuous("x", 0.0, f64::INFINITY);
    p.add_objective_term(x, 1.0);
    p.add_constraint("c", vec![(x, 1.0)], Sense::Le, -1.0);
    assert_eq!(solve_lp(&p, &opts()).unwrap().status, Status::Infeasible);
}

#[test]
fn lp_unbounded_direction() {
    let mut p = LinearProblem::new();
    let x = p.add_continuous("x", 0.0, f64::INFINITY);
    let y = p.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY);
    p.add_objective_term(x, -1.0);
    p.add_constraint("c", vec![(x, 1.0), (y, -1.0)], Sense::Le, 2.0);
    assert_eq!(solve_lp(&p, &opts()).unwrap().status, Status::Unbounded);
}

#[test]
fn lp_free_variables_and_equalities() {
    // min x + 2y s.t. x + y = 4, x - y >= -2, y free, x in [0, 3]
    // optimum: y as small as possible: x <= 3 -> y = 1, x = 3 -> 5
    let mut p = LinearProblem::new();
    let x = p.add_continuous("x", 0.0, 3.0);
    let y = p.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY);
    p.add_objective_term(x, 1.0);
    p.add_objective_term(y, 2.0);
    p.add_constraint("e", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 4.0);
    p.add_constraint("g", vec![(x, 1.0), (y, -1.0)], Sense::Ge, -2.0);
    let s = solve_lp(&p, &opts()).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.objective - 5.0).abs() < 1e-9, "{}", s.objective);
}

#[test]
fn lp_beale_cycling_fixture_terminates() {
    // Beale's classic cycling example (Dantzig's rule with naive tie-breaking cycles):
    // min -3/4 x4 + 20 x5 - 1/2 x6 + 6 x7
    // s.t. 1/4 x4 - 8 x5 - x6 + 9 x7 <= 0
    //      1/2 x4 - 12 x5 - 1/2 x6 + 3 x7 <= 0
    //      x6 <= 1, x >= 0. Optimum -5/4 at x4 = 1, x6 = 1.
    let mut p = LinearProblem::new();
    let x4 = p.add_continuous("x4", 0.0, f64::INFINITY);
    let x5 = p.add_continuous("x5", 0.0, f64::INFINITY);
    let x6 = p.add_continuous("x6", 0.0, f64::INFINITY);
    let x7 = p.add_continuous("x7", 0.0, f64::INFINITY);
    for (v, c) in [(x4, -0.75), (x5, 20.0), (x6, -0.5), (x7, 6.0)] {
        p.add_objective_term(v, c);
    }
    p.add_constraint("r1", vec![(x4, 0.25), (x5, -8.0), (x6, -1.0), (x7, 9.0)], Sense::Le, 0.0);
    p.add_constraint("r2", vec![(x4, 0.5), (x5, -12.0), (x6, -0.5), (x7, 3.0)], Sense::Le, 0.0);
    p.add_constraint("r3", vec![(x6, 1.0)], Sense::Le, 1.0);
    for threshold in [0, 1, 50] {
        let o = SolverOptions { stall_threshold: threshold, ..opts() };
        let s = solve_lp(&p, &o).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective + 1.25).abs() < 1e-9, "threshold {threshold}: {}", s.objective);
    }
}

#[test]
fn milp_binary_knapsack_matches_enumeration() {
    // maximise 3a + 4b s.t. 2a + 3b <= 4: the four assignments give 0, 3, 4, infeasible.
    let mut p = LinearProblem::new();
    let a = p.add_binary("a");
    let b = p.add_binary("b");
    p.add_objective_term(a, -3.0);
    p.add_objective_term(b, -4.0);
    p.add_constraint("w", vec![(a, 2.0), (b, 3.0)], Sense::Le, 4.0);
    let s = solve_milp(&p, &opts()).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.objective + 4.0).abs() < 1e-9);
    assert_eq!(s.values, vec![0.0, 1.0]);
    assert!(check_solution(&p, &s, 1e-6).clean);
}

#[test]
fn milp_all_continuous_equals_lp() {
    let mut p = LinearProblem::new();
    let x = p.add_continuous("x", 0.0, 4.0);
    let y = p.add_continuous("y", 0.0, 4.0);
    p.add_objective_term(x, -1.0);
    p.add_objective_term(y, -2.0);
    p.add_constraint("c", vec![(x, 1.0), (y, 3.0)], Sense::Le, 6.0);
    let lp = solve_lp(&p, &opts()).unwrap();
    let mip = solve_milp(&p, &opts()).unwrap();
    assert!((lp.objective - mip.objective).abs() <= 1e-7);
}

#[test]
fn milp_echoes_requested_gap() {
    let mut p = LinearProblem::new();
    let a = p.add_binary("a");
    p.add_objective_term(a, 1.0);
    let o = SolverOptions { rel_gap: 0.00001, ..opts() };
    let s = solve_milp(&p, &o).unwrap();
    assert_eq!(s.options.rel_gap, 1e-5);
}

#[test]
fn milp_infeasible_integer_problem() {
    // a + b = 1.5 has LP solutions but no binary ones.
    let mut p = LinearProblem::new();
    let a = p.add_binary("a");
    let b = p.add_binary("b");
    p.add_constraint("c", vec![(a, 1.0), (b, 1.0)], Sense::Eq, 1.5);
    assert_eq!(solve_lp(&p, &opts()).unwrap().status, Status::Optimal);
    assert_eq!(solve_milp(&p, &opts()).unwrap().status, Status::Infeasible);
}

#[test]
fn check_solution_reports_violations() {
    let mut p = LinearProblem::new();
    let x = p.add_continuous("x", 0.0, 1.0);
    let y = p.add_continuous("y", 0.0, 1.0);
    p.add_binary("b");
    p.add_constraint("sum", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
    let mut sol = solve_lp(&p, &opts()).unwrap();
    sol.values = vec![0.75, 0.75, 0.3];
    let r = check_solution(&p, &sol, 1e-6);
    assert!((r.max_constraint_violation - 0.5).abs() < 1e-12);
    assert_eq!(r.worst_constraint.as_deref(), Some("sum"));
    assert!((r.max_fractionality - 0.3).abs() < 1e-12);
    assert!(!r.clean);
}

#[test]
fn depth_first_and_best_bound_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let p = random_milp(&mut rng, 8, 4);
        let a = solve_milp(&p, &opts()).unwrap();
        let b = solve_milp(&p, &SolverOptions { node_selection: NodeSelection::DepthFirst, ..opts() }).unwrap();
        assert_eq!(a.status, b.status);
        if a.status.has_incumbent() {
            assert!((a.objective - b.objective).abs() <= 1e-6 * (1.0 + a.objective.abs()));
        }
    }
}

/// Random bounded MILP with integer data. Roughly half the rows are built around a
/// random point so that most instances are feasible.
pub fn random_milp(rng: &mut ChaCha8Rng, max_bin: usize, max_cont: usize) -> LinearProblem {
    let nb = rng.random_range(1..=max_bin);
    let nc = rng.random_range(0..=max_cont);
    let mut p = LinearProblem::new();
    let mut point = Vec::new();
    for i in 0..nb {
        p.add_binary(format!("b{i}"));
        point.push(rng.random_range(0..=1) as f64);
    }
    for i in 0..nc {
        let lo = rng.random_range(-5..=0) as f64;
        let hi = lo + rng.random_range(1..=10) as f64;
        p.add_continuous(format!("c{i}"), lo, hi);
        point.push(rng.random_range(lo..=hi));
    }
    let n = nb + nc;
    for j in 0..n {
        let c = rng.random_range(-10..=10) as f64;
        p.add_objective_term(ldes_milp::VarId(j), c);
    }
    let rows = rng.random_range(1..=(n + 2));
    for r in 0..rows {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.5) {
                terms.push((ldes_milp::VarId(j), rng.random_range(-5..=5) as f64));
            }
        }
        let act: f64 = terms.iter().map(|&(v, c)| c * point[v.0]).sum();
        let sense = match rng.random_range(0..10) {
            0 => Sense::Eq,
            1..=5 => Sense::Le,
            _ => Sense::Ge,
        };
        let slack = if rng.random_bool(0.8) { rng.random_range(0.0..3.0) } else { -rng.random_range(0.0..3.0) };
        let rhs = match sense {
            Sense::Le => (act + slack).round(),
            Sense::Ge => (act - slack).round(),
            Sense::Eq => act,
        };
        p.add_constraint(format!("r{r}"), terms, sense, rhs);
    }
    p
}

/// Enumerates every binary assignment and solves the remaining LP.
pub fn brute_force(p: &LinearProblem) -> Option<f64> {
    let bins: Vec<usize> = p
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1u32 << bins.len()) {
        let mut q = p.clone();
        for (k, &j) in bins.iter().enumerate() {
            let v = ((mask >> k) & 1) as f64;
            q.variables[j].lower = v;
            q.variables[j].upper = v;
            q.variables[j].kind = VarKind::Continuous;
        }
        let s = solve_lp(&q, &opts()).unwrap();
        if s.status == Status::Optimal {
            best = Some(best.map_or(s.objective, |b: f64| b.min(s.objective)));
        }
    }
    best
}

/// Vertex enumeration oracle for tiny LPs: every vertex of the box-and-row polytope
/// solves some `n x n` subsystem of active constraints.
fn vertex_oracle(p: &LinearProblem) -> Option<f64> {
    let n = p.num_vars();
    // rows as (coeffs, rhs, sense)
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &p.constraints {
        let mut a = vec![0.0; n];
        for &(v, k) in &c.terms {
            a[v.0] += k;
        }
        planes.push((a, c.rhs));
    }
    for (j, v) in p.variables.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), v.lower));
        planes.push((e, v.upper));
    }
    let obj = p.objective_vector();
    let mut best: Option<f64> = None;
    let k = planes.len();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        // solve the n x n system by Gaussian elimination
        let mut mat: Vec<Vec<f64>> = idx.iter().map(|&i| {
            let mut row = planes[i].0.clone();
            row.push(planes[i].1);
            row
        }).collect();
        let mut ok = true;
        for col in 0..n {
            let piv = (col..n).max_by(|&a, &b| mat[a][col].abs().total_cmp(&mat[b][col].abs())).unwrap();
            if mat[piv][col].abs() < 1e-10 {
                ok = false;
                break;
            }
            mat.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = mat[r][col] / mat[col][col];
                    for c2 in col..=n {
                        mat[r][c2] -= f * mat[col][c2];
                    }
                }
            }
        }
        if ok {
            let x: Vec<f64> = (0..n).map(|r| mat[r][n] / mat[r][r]).collect();
            let feasible = p.constraints.iter().all(|c| c.violation(&x) <= 1e-7)
                && p.variables.iter().zip(&x).all(|(v, &xi)| xi >= v.lower - 1e-7 && xi <= v.upper + 1e-7);
            if feasible {
                let val: f64 = obj.iter().zip(&x).map(|(a, b)| a * b).sum();
                best = Some(best.map_or(val, |b: f64| b.min(val)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] != i + k - n {
                break;
            }
            if i == 0 && idx[0] == k - n {
                return best;
            }
        }
        idx[i] += 1;
        for j in i + 1..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[test]
fn random_milps_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let p = random_milp(&mut rng, 12, 8);
        let s = solve_milp(&p, &opts()).unwrap();
        let oracle = brute_force(&p);
        match oracle {
            None => assert_eq!(s.status, Status::Infeasible, "case {case}"),
            Some(v) => {
                assert!(s.status.has_incumbent(), "case {case}: {:?}", s.status);
                assert!((s.objective - v).abs() <= 1e-6, "case {case}: {} vs {}", s.objective, v);
                assert!(check_solution(&p, &s, 1e-6).clean, "case {case}");
                assert!(s.best_bound <= s.objective + 1e-7);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_matches_vertex_enumeration(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = random_milp(&mut rng, 1, 3);
        for v in p.variables.iter_mut() {
            v.kind = VarKind::Continuous;
        }
        let s = solve_lp(&p, &opts()).unwrap();
        match vertex_oracle(&p) {
            None => prop_assert_eq!(s.status, Status::Infeasible),
            Some(v) => {
                prop_assert_eq!(s.status, Status::Optimal);
                prop_assert!((s.objective - v).abs() <= 1e-7 * (1.0 + v.abs()), "{} vs {}", s.objective, v);
            }
        }
    }

    #[test]
    fn objective_scaling_preserves_argmin(seed in 0u64..10_000, scale in 0.5f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_milp(&mut rng, 5, 3);
        let mut q = p.clone();
        for t in q.objective.iter_mut() {
            t.1 *= scale;
        }
        let a = solve_milp(&p, &opts()).unwrap();
        let b = solve_milp(&q, &opts()).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.status.has_incumbent() {
            prop_assert!((a.objective * scale - b.objective).abs() <= 1e-6 * (1.0 + b.objective.abs()));
        }
    }

    #[test]
    fn root_bound_never_exceeds_integral_objective(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_milp(&mut rng, 6, 3);
        let lp = solve_lp(&p, &opts()).unwrap();
        let mip = solve_milp(&p, &opts()).unwrap();
        if mip.status.has_incumbent() {
            prop_assert_eq!(lp.status, Status::Optimal);
            prop_assert!(lp.objective <= mip.objective + 1e-7);
        }
    }
}
