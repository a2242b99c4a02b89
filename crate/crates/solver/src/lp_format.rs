//! CPLEX-style LP text output, meant for reading models by eye.

use std::fmt::Write as _;

use crate::problem::{MilpProblem, RowBounds, VarKind};

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    let sign = if coef < 0.0 { "-" } else if first { "" } else { "+" };
    let mag = coef.abs();
    let sep = if first && sign.is_empty() { "" } else { " " };
    if mag == 1.0 {
        let _ = write!(out, " {sign}{sep}{name}");
    } else {
        let _ = write!(out, " {sign}{sep}{mag:?} {name}");
    }
}

pub fn lp_string(problem: &MilpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", problem.name);
    out.push_str("Minimize\n obj:");
    let mut first = true;
    for v in problem.variables() {
        if v.objective != 0.0 {
            term(&mut out, first, v.objective, &v.name);
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for c in problem.constraints() {
        let _ = write!(out, " {}:", c.name);
        let lead = match c.bounds {
            RowBounds::Range { lower, upper } if lower.is_finite() && upper.is_finite() => {
                let _ = write!(out, " {lower:?} <=");
                Some(upper)
            }
            _ => None,
        };
        let mut first = true;
        for &(v, a) in &c.coeffs {
            term(&mut out, first, a, &problem.var(v).name);
            first = false;
        }
        if first {
            out.push_str(" 0");
        }
        match (lead, c.bounds) {
            (Some(upper), _) => {
                let _ = write!(out, " <= {upper:?}");
            }
            (None, RowBounds::Eq(v)) => {
                let _ = write!(out, " = {v:?}");
            }
            (None, RowBounds::Le(v)) => {
                let _ = write!(out, " <= {v:?}");
            }
            (None, RowBounds::Ge(v)) => {
                let _ = write!(out, " >= {v:?}");
            }
            (None, RowBounds::Range { lower, upper }) => {
                if lower.is_finite() {
                    let _ = write!(out, " >= {lower:?}");
                } else if upper.is_finite() {
                    let _ = write!(out, " <= {upper:?}");
                } else {
                    out.push_str(" >= -inf");
                }
            }
        }
        out.push('\n');
    }
    out.push_str("Bounds\n");
    for v in problem.variables() {
        if v.kind == VarKind::Binary {
            continue;
        }
        match (v.lower, v.upper) {
            (l, u) if l == f64::NEG_INFINITY && u == f64::INFINITY => {
                let _ = writeln!(out, " {} free", v.name);
            }
            (l, u) if l == u => {
                let _ = writeln!(out, " {} = {l:?}", v.name);
            }
            (l, u) if l == 0.0 && u == f64::INFINITY => {}
            (l, u) => {
                let lo = if l == f64::NEG_INFINITY { "-inf".to_string() } else { format!("{l:?}") };
                let hi = if u == f64::INFINITY { "+inf".to_string() } else { format!("{u:?}") };
                let _ = writeln!(out, " {lo} <= {} <= {hi}", v.name);
            }
        }
    }
    let bins: Vec<&str> = problem
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for b in bins {
            let _ = writeln!(out, " {b}");
        }
    }
    let ints: Vec<&str> = problem
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Integer)
        .map(|v| v.name.as_str())
        .collect();
    if !ints.is_empty() {
        out.push_str("Generals\n");
        for g in ints {
            let _ = writeln!(out, " {g}");
        }
    }
    out.push_str("End\n");
    out
}
