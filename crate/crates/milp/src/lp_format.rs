//! Writer for the CPLEX-style LP text format, for cross-checking models with external solvers.
//!
//! Grammar of the emitted file (one item per line, terms separated by single spaces):
//!
//! ```text
//! file        := "\ " comment NL
//!                "Minimize" NL " obj: " expr [" + " offset] NL
//!                "Subject To" NL { " " name ": " expr " " sense " " number NL }
//!                "Bounds" NL { " " bound NL }
//!                ["Binaries" NL { " " name NL }]
//!                "End" NL
//! expr        := term { (" + " | " - ") term }     (empty expression is written as "0 x0")
//! term        := number " " name
//! sense       := "<=" | "=" | ">="
//! bound       := number " <= " name " <= " number
//!              | name " >= " number | name " <= " number | name " free"
//!              | name " = " number
//! ```
//!
//! Names are sanitised: `[` and `]` become `(` and `)`, and any character outside
//! `[A-Za-z0-9_().]` becomes `_`. Numbers use Rust's shortest round-trip formatting.

use std::fmt::Write as _;

use crate::problem::{LinearProblem, Sense, VarKind};

pub fn sanitize_name(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            '[' => '(',
            ']' => ')',
            c if c.is_ascii_alphanumeric() || matches!(c, '_' | '(' | ')' | '.') => c,
            _ => '_',
        })
        .collect()
}

fn write_expr(out: &mut String, terms: &[(f64, String)]) {
    if terms.is_empty() {
        out.push_str("0 x0");
        return;
    }
    for (k, (coef, name)) in terms.iter().enumerate() {
        if k == 0 {
            if *coef < 0.0 {
                let _ = write!(out, "- {} {}", -coef, name);
            } else {
                let _ = write!(out, "{} {}", coef, name);
            }
        } else if *coef < 0.0 {
            let _ = write!(out, " - {} {}", -coef, name);
        } else {
            let _ = write!(out, " + {} {}", coef, name);
        }
    }
}

/// Renders `problem` as LP text.
pub fn to_lp_string(problem: &LinearProblem, comment: &str) -> String {
    let names: Vec<String> = problem.variables.iter().map(|v| sanitize_name(&v.name)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", comment.replace('\n', " "));
    out.push_str("Minimize\n obj: ");
    let obj = problem.objective_vector();
    let terms: Vec<(f64, String)> = obj
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, &c)| (c, names[j].clone()))
        .collect();
    write_expr(&mut out, &terms);
    if problem.objective_offset != 0.0 {
        let _ = write!(out, " + {}", problem.objective_offset);
    }
    out.push_str("\nSubject To\n");
    for (i, c) in problem.constraints.iter().enumerate() {
        let name = if c.name.is_empty() { format!("c{i}") } else { sanitize_name(&c.name) };
        let terms: Vec<(f64, String)> = c.terms.iter().map(|&(v, coef)| (coef, names[v.0].clone())).collect();
        let _ = write!(out, " {name}: ");
        write_expr(&mut out, &terms);
        let sense = match c.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {sense} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, name) in problem.variables.iter().zip(&names) {
        let (l, u) = (v.lower, v.upper);
        match (l.is_finite(), u.is_finite()) {
            (true, true) if l == u => {
                let _ = writeln!(out, " {name} = {l}");
            }
            (true, true) => {
                let _ = writeln!(out, " {l} <= {name} <= {u}");
            }
            (true, false) => {
                let _ = writeln!(out, " {name} >= {l}");
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {u}");
            }
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
        }
    }
    let bins: Vec<&String> = problem
        .variables
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for b in bins {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}
