//! MPS reader and writer.
//!
//! The writer lays fields out in the classic fixed columns where names fit,
//! but long names simply push the following fields right, so the reader
//! splits on whitespace. Names never contain whitespace.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use crate::error::MpsError;
use crate::problem::{MilpProblem, RowBounds, VarId, VarKind};

const OBJ: &str = "OBJ";

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "1e+30".to_string()
    } else if v == f64::NEG_INFINITY {
        "-1e+30".to_string()
    } else {
        format!("{v:?}")
    }
}

fn field_line(out: &mut String, code: &str, a: &str, b: &str, c: &str) {
    let _ = writeln!(out, " {code:<2} {a:<8}  {b:<8}  {c}");
}

/// Serializes `problem` with variables and rows sorted by name.
pub fn write_mps<W: Write>(problem: &MilpProblem, mut sink: W) -> io::Result<()> {
    let text = mps_string(problem);
    sink.write_all(text.as_bytes())
}

pub fn mps_string(problem: &MilpProblem) -> String {
    let mut out = String::new();
    let name = if problem.name.is_empty() { "PROBLEM" } else { problem.name.as_str() };
    let _ = writeln!(out, "NAME          {name}");

    let mut row_order: Vec<usize> = (0..problem.num_constraints()).collect();
    row_order.sort_by(|&a, &b| problem.constraints()[a].name.cmp(&problem.constraints()[b].name));
    let mut var_order: Vec<usize> = (0..problem.num_vars()).collect();
    var_order.sort_by(|&a, &b| problem.variables()[a].name.cmp(&problem.variables()[b].name));

    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ}");
    for &i in &row_order {
        let c = &problem.constraints()[i];
        let code = match c.bounds {
            RowBounds::Le(_) => "L",
            RowBounds::Ge(_) => "G",
            RowBounds::Eq(_) => "E",
            RowBounds::Range { lower, upper } => match (lower.is_finite(), upper.is_finite()) {
                (true, _) => "G",
                (false, true) => "L",
                (false, false) => "N",
            },
        };
        let _ = writeln!(out, " {code}  {}", c.name);
    }

    let mut per_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.num_vars()];
    for &i in &row_order {
        for &(v, a) in &problem.constraints()[i].coeffs {
            per_var[v.0].push((i, a));
        }
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for &j in &var_order {
        let v = &problem.variables()[j];
        let integral = v.kind.is_integral();
        if integral != in_int {
            let tag = if integral { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    MARKER{marker:<4}  'MARKER'                 {tag}");
            marker += 1;
            in_int = integral;
        }
        let mut wrote = false;
        if v.objective != 0.0 {
            field_line(&mut out, "", &v.name, OBJ, &num(v.objective));
            wrote = true;
        }
        for &(i, a) in &per_var[j] {
            field_line(&mut out, "", &v.name, &problem.constraints()[i].name, &num(a));
            wrote = true;
        }
        if !wrote {
            field_line(&mut out, "", &v.name, OBJ, "0");
        }
    }
    if in_int {
        let _ = writeln!(out, "    MARKER{marker:<4}  'MARKER'                 'INTEND'");
    }

    out.push_str("RHS\n");
    for &i in &row_order {
        let c = &problem.constraints()[i];
        let rhs = match c.bounds {
            RowBounds::Le(v) | RowBounds::Ge(v) | RowBounds::Eq(v) => v,
            RowBounds::Range { lower, upper } => {
                if lower.is_finite() {
                    lower
                } else if upper.is_finite() {
                    upper
                } else {
                    0.0
                }
            }
        };
        if rhs != 0.0 {
            field_line(&mut out, "", "RHS", &c.name, &num(rhs));
        }
    }

    out.push_str("RANGES\n");
    for &i in &row_order {
        let c = &problem.constraints()[i];
        if let RowBounds::Range { lower, upper } = c.bounds {
            if lower.is_finite() && upper.is_finite() {
                field_line(&mut out, "", "RNG", &c.name, &num(upper - lower));
            }
        }
    }

    out.push_str("BOUNDS\n");
    for &j in &var_order {
        let v = &problem.variables()[j];
        let (lo, hi) = (v.lower, v.upper);
        match v.kind {
            VarKind::Binary | VarKind::Integer if lo == 0.0 && hi == 1.0 => {
                field_line(&mut out, "LO", "BND", &v.name, "0");
                field_line(&mut out, "UP", "BND", &v.name, "1");
                continue;
            }
            _ => {}
        }
        if lo == hi {
            field_line(&mut out, "FX", "BND", &v.name, &num(lo));
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            field_line(&mut out, "FR", "BND", &v.name, "");
            continue;
        }
        if lo == f64::NEG_INFINITY {
            field_line(&mut out, "MI", "BND", &v.name, "");
        } else if lo != 0.0 || hi < 0.0 || v.kind.is_integral() {
            field_line(&mut out, "LO", "BND", &v.name, &num(lo));
        }
        if hi.is_finite() {
            field_line(&mut out, "UP", "BND", &v.name, &num(hi));
        } else if v.kind.is_integral() {
            field_line(&mut out, "PL", "BND", &v.name, "");
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Name,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

#[derive(Debug, Clone, Copy)]
enum RowType {
    N,
    L,
    G,
    E,
}

fn parse_num(tok: &str, line: usize) -> Result<f64, MpsError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| MpsError::parse(line, format!("invalid number `{tok}`")))?;
    if v >= 1e30 {
        Ok(f64::INFINITY)
    } else if v <= -1e30 {
        Ok(f64::NEG_INFINITY)
    } else {
        Ok(v)
    }
}

/// Parses an MPS document. The first `N` row is the objective; later `N`
/// rows become free constraints.
pub fn parse_mps(source: &str) -> Result<MilpProblem, MpsError> {
    let mut section = Section::None;
    let mut problem = MilpProblem::new("");
    let mut objective_row: Option<String> = None;
    let mut row_index: HashMap<String, (usize, RowType)> = HashMap::new();
    let mut rows: Vec<(String, RowType, Vec<(VarId, f64)>, f64, Option<f64>)> = Vec::new();
    let mut var_index: HashMap<String, VarId> = HashMap::new();
    let mut lower_set: Vec<bool> = Vec::new();
    let mut integer_block = false;
    let mut saw_content = false;

    for (k, raw) in source.lines().enumerate() {
        let line_no = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        saw_content = true;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match toks[0] {
                "NAME" => {
                    problem.name = toks.get(1).copied().unwrap_or("").to_string();
                    Section::Name
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(MpsError::parse(line_no, format!("unknown section `{other}`"))),
            };
            if section == Section::End {
                break;
            }
            continue;
        }
        match section {
            Section::None | Section::Name | Section::End => {
                return Err(MpsError::parse(line_no, "data line outside of a section"));
            }
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(MpsError::parse(line_no, "expected `<type> <row>`"));
                }
                let ty = match toks[0] {
                    "N" => RowType::N,
                    "L" => RowType::L,
                    "G" => RowType::G,
                    "E" => RowType::E,
                    t => return Err(MpsError::parse(line_no, format!("unknown row type `{t}`"))),
                };
                let name = toks[1].to_string();
                if matches!(ty, RowType::N) && objective_row.is_none() {
                    objective_row = Some(name);
                    continue;
                }
                if row_index.contains_key(&name) || objective_row.as_deref() == Some(name.as_str()) {
                    return Err(MpsError::parse(line_no, format!("duplicate row `{name}`")));
                }
                row_index.insert(name.clone(), (rows.len(), ty));
                rows.push((name, ty, Vec::new(), 0.0, None));
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    match toks[2] {
                        "'INTORG'" => integer_block = true,
                        "'INTEND'" => integer_block = false,
                        t => return Err(MpsError::parse(line_no, format!("unknown marker `{t}`"))),
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(MpsError::parse(line_no, "expected `<column> <row> <value> [<row> <value>]`"));
                }
                let col = toks[0];
                let id = match var_index.get(col) {
                    Some(&id) => id,
                    None => {
                        let kind = if integer_block { VarKind::Integer } else { VarKind::Continuous };
                        let id = problem.add_var(col, kind, 0.0, f64::INFINITY, 0.0);
                        var_index.insert(col.to_string(), id);
                        lower_set.push(false);
                        id
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let value = parse_num(pair[1], line_no)?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        problem.var_mut(id).objective += value;
                    } else {
                        let &(r, _) = row_index
                            .get(pair[0])
                            .ok_or_else(|| MpsError::parse(line_no, format!("unknown row `{}`", pair[0])))?;
                        rows[r].2.push((id, value));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let pairs = match toks.len() {
                    3 | 5 => &toks[1..],
                    2 | 4 => &toks[..],
                    _ => return Err(MpsError::parse(line_no, "expected `[<set>] <row> <value> [<row> <value>]`")),
                };
                for pair in pairs.chunks(2) {
                    let value = parse_num(pair[1], line_no)?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        if section == Section::Rhs && value != 0.0 {
                            return Err(MpsError::parse(line_no, "objective constants are not supported"));
                        }
                        continue;
                    }
                    let &(r, _) = row_index
                        .get(pair[0])
                        .ok_or_else(|| MpsError::parse(line_no, format!("unknown row `{}`", pair[0])))?;
                    if section == Section::Rhs {
                        rows[r].3 = value;
                    } else {
                        rows[r].4 = Some(value);
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(MpsError::parse(line_no, "expected `<type> <set> <column> [<value>]`"));
                }
                let col = toks[2];
                let id = *var_index
                    .get(col)
                    .ok_or_else(|| MpsError::parse(line_no, format!("unknown column `{col}`")))?;
                let value = match toks.get(3) {
                    Some(t) => Some(parse_num(t, line_no)?),
                    None => None,
                };
                let need = |v: Option<f64>| v.ok_or_else(|| MpsError::parse(line_no, "bound value missing"));
                let var = problem.var_mut(id);
                match toks[0] {
                    "UP" => {
                        let v = need(value)?;
                        if v < 0.0 && !lower_set[id.0] && var.lower == 0.0 {
                            var.lower = f64::NEG_INFINITY;
                        }
                        var.upper = v;
                    }
                    "LO" => {
                        var.lower = need(value)?;
                        lower_set[id.0] = true;
                    }
                    "FX" => {
                        let v = need(value)?;
                        var.lower = v;
                        var.upper = v;
                        lower_set[id.0] = true;
                    }
                    "FR" => {
                        var.lower = f64::NEG_INFINITY;
                        var.upper = f64::INFINITY;
                    }
                    "MI" => {
                        var.lower = f64::NEG_INFINITY;
                        lower_set[id.0] = true;
                    }
                    "PL" => var.upper = f64::INFINITY,
                    "BV" => {
                        var.kind = VarKind::Binary;
                        var.lower = 0.0;
                        var.upper = 1.0;
                    }
                    "LI" => {
                        var.kind = VarKind::Integer;
                        var.lower = need(value)?;
                        lower_set[id.0] = true;
                    }
                    "UI" => {
                        var.kind = VarKind::Integer;
                        var.upper = need(value)?;
                    }
                    t => return Err(MpsError::parse(line_no, format!("unknown bound type `{t}`"))),
                }
            }
        }
    }
    if !saw_content {
        return Err(MpsError::parse(0, "empty input"));
    }
    if section != Section::End {
        return Err(MpsError::parse(source.lines().count(), "missing ENDATA"));
    }

    for j in 0..problem.num_vars() {
        let v = problem.var_mut(VarId(j));
        if v.kind == VarKind::Integer && v.lower == 0.0 && v.upper == 1.0 {
            v.kind = VarKind::Binary;
        }
    }
    for (name, ty, coeffs, rhs, range) in rows {
        let bounds = match (ty, range) {
            (RowType::N, _) => RowBounds::Range {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            },
            (RowType::L, None) => RowBounds::Le(rhs),
            (RowType::G, None) => RowBounds::Ge(rhs),
            (RowType::E, None) => RowBounds::Eq(rhs),
            (RowType::L, Some(r)) => RowBounds::Range {
                lower: rhs - r.abs(),
                upper: rhs,
            },
            (RowType::G, Some(r)) => RowBounds::Range {
                lower: rhs,
                upper: rhs + r.abs(),
            },
            (RowType::E, Some(r)) if r >= 0.0 => RowBounds::Range { lower: rhs, upper: rhs + r },
            (RowType::E, Some(r)) => RowBounds::Range { lower: rhs + r, upper: rhs },
        };
        problem.add_constraint(name, "mps", coeffs, bounds);
    }
    problem.validate()?;
    Ok(problem)
}
