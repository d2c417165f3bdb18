//! Fixed-format MPS export and a reader for the same subset.
//!
//! Supported sections: `NAME`, `ROWS`, `COLUMNS` (with `MARKER` `INTORG` /
//! `INTEND`), `RHS`, `RANGES`, `BOUNDS` (`LO UP FX FR MI PL BV`), `ENDATA`.
//! Names are at most eight characters (`R0000001`, `C0000001`) so every field
//! sits in its fixed column. Numbers are written in the shortest form that
//! parses back to the same `f64`; long values overflow the 12-character field,
//! which token-based readers accept.
//!
//! Integer columns must be binary. An integer column without bounds defaults
//! to `[0, 1]`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::MipError;
use crate::model::{MipModel, Sense, Tag, VarId, VarKind};

const OBJ_ROW: &str = "OBJ";

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn field_line(out: &mut String, code: &str, name: &str, entry: &str, value: Option<f64>) {
    let _ = write!(out, " {code:<2} {name:<8}  {entry:<8}");
    if let Some(v) = value {
        let _ = write!(out, "  {:>12}", num(v));
    }
    out.push('\n');
}

/// Writes the model as fixed-format MPS. Row and column order follow the
/// model, so the output is deterministic.
pub fn export_mps(model: &MipModel, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", name.split_whitespace().next().unwrap_or("MODEL"));
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ_ROW}");
    for (i, row) in model.constraints.iter().enumerate() {
        let code = match row.sense {
            Sense::Le => "L",
            Sense::Eq => "E",
            Sense::Ge => "G",
        };
        let _ = writeln!(out, " {code}  {}", row_name(i));
    }

    // Column-major view of the rows.
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, row) in model.constraints.iter().enumerate() {
        for &(v, c) in &row.terms {
            columns[v.0].push((i, c));
        }
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (j, var) in model.vars.iter().enumerate() {
        let is_int = var.kind == VarKind::Binary;
        if is_int != in_int {
            let tag = if is_int { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    M{marker:07}  'MARKER'                 {tag}");
            marker += 1;
            in_int = is_int;
        }
        let col = col_name(j);
        let obj = model.objective.get(&VarId(j)).copied();
        if obj.is_none() && columns[j].is_empty() {
            field_line(&mut out, "", &col, OBJ_ROW, Some(0.0));
        }
        if let Some(c) = obj {
            field_line(&mut out, "", &col, OBJ_ROW, Some(c));
        }
        for &(i, c) in &columns[j] {
            field_line(&mut out, "", &col, &row_name(i), Some(c));
        }
    }
    if in_int {
        let _ = writeln!(out, "    M{marker:07}  'MARKER'                 'INTEND'");
    }

    out.push_str("RHS\n");
    for (i, row) in model.constraints.iter().enumerate() {
        if row.rhs != 0.0 {
            field_line(&mut out, "", "RHS", &row_name(i), Some(row.rhs));
        }
    }

    out.push_str("BOUNDS\n");
    for (j, var) in model.vars.iter().enumerate() {
        let col = col_name(j);
        let (lo, hi) = (var.lower, var.upper);
        if var.kind == VarKind::Binary {
            if lo == 0.0 && hi == 1.0 {
                field_line(&mut out, "BV", "BND", &col, None);
            } else {
                field_line(&mut out, "FX", "BND", &col, Some(lo));
            }
            continue;
        }
        if lo == hi {
            field_line(&mut out, "FX", "BND", &col, Some(lo));
            continue;
        }
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => field_line(&mut out, "FR", "BND", &col, None),
            (false, true) => {
                field_line(&mut out, "MI", "BND", &col, None);
                field_line(&mut out, "UP", "BND", &col, Some(hi));
            }
            (true, _) => {
                if lo != 0.0 {
                    field_line(&mut out, "LO", "BND", &col, Some(lo));
                }
                if hi.is_finite() {
                    field_line(&mut out, "UP", "BND", &col, Some(hi));
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

struct RowDef {
    name: String,
    sense: Sense,
    terms: Vec<(VarId, f64)>,
    rhs: f64,
    range: Option<f64>,
}

/// Reads the MPS subset documented at module level. Free rows other than the
/// first `N` row are ignored; ranged rows become a `>=` and a `<=` row.
pub fn read_mps(text: &str) -> Result<MipModel, MipError> {
    let err = |line: usize, message: String| MipError::Mps { line, message };
    let mut section = Section::None;
    let mut obj_name: Option<String> = None;
    let mut rows: Vec<RowDef> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut col_names: Vec<String> = Vec::new();
    let mut col_int: Vec<bool> = Vec::new();
    let mut col_obj: Vec<f64> = Vec::new();
    let mut lower: Vec<Option<f64>> = Vec::new();
    let mut upper: Vec<Option<f64>> = Vec::new();
    let mut in_int = false;

    let parse_num = |line: usize, tok: &str| -> Result<f64, MipError> {
        tok.parse::<f64>()
            .map_err(|_| err(line, format!("bad number '{tok}'")))
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match toks[0] {
                "NAME" => Section::None,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => break,
                other => return Err(err(lineno, format!("unknown section '{other}'"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(err(lineno, "data outside a section".into())),
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(err(lineno, "ROWS entry needs type and name".into()));
                }
                let sense = match toks[0] {
                    "N" => {
                        if obj_name.is_none() {
                            obj_name = Some(toks[1].to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(err(lineno, format!("unknown row type '{other}'"))),
                };
                if row_index.insert(toks[1].to_string(), rows.len()).is_some() {
                    return Err(err(lineno, format!("duplicate row '{}'", toks[1])));
                }
                rows.push(RowDef {
                    name: toks[1].to_string(),
                    sense,
                    terms: Vec::new(),
                    rhs: 0.0,
                    range: None,
                });
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    match toks[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        other => return Err(err(lineno, format!("unknown marker {other}"))),
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(err(lineno, "COLUMNS entry needs 3 or 5 fields".into()));
                }
                let j = match col_index.get(toks[0]) {
                    Some(&j) => j,
                    None => {
                        let j = col_names.len();
                        col_index.insert(toks[0].to_string(), j);
                        col_names.push(toks[0].to_string());
                        col_int.push(in_int);
                        col_obj.push(0.0);
                        lower.push(None);
                        upper.push(None);
                        j
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let value = parse_num(lineno, pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        col_obj[j] += value;
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        rows[i].terms.push((VarId(j), value));
                    } else {
                        return Err(err(lineno, format!("unknown row '{}'", pair[0])));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                // Optional set name in front of the (row, value) pairs.
                let body = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                for pair in body.chunks(2) {
                    if pair.len() != 2 {
                        return Err(err(lineno, "dangling field".into()));
                    }
                    let value = parse_num(lineno, pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        log::warn!("ignoring objective constant on line {lineno}");
                        continue;
                    }
                    let &i = row_index
                        .get(pair[0])
                        .ok_or_else(|| err(lineno, format!("unknown row '{}'", pair[0])))?;
                    if section == Section::Rhs {
                        rows[i].rhs = value;
                    } else {
                        rows[i].range = Some(value);
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(err(lineno, "BOUNDS entry too short".into()));
                }
                let &j = col_index
                    .get(toks[2])
                    .ok_or_else(|| err(lineno, format!("unknown column '{}'", toks[2])))?;
                let value = || -> Result<f64, MipError> {
                    let tok = toks.get(3).ok_or_else(|| err(lineno, "missing bound value".into()))?;
                    parse_num(lineno, tok)
                };
                match toks[0] {
                    "LO" => lower[j] = Some(value()?),
                    "UP" => upper[j] = Some(value()?),
                    "FX" => {
                        let v = value()?;
                        lower[j] = Some(v);
                        upper[j] = Some(v);
                    }
                    "FR" => {
                        lower[j] = Some(f64::NEG_INFINITY);
                        upper[j] = Some(f64::INFINITY);
                    }
                    "MI" => lower[j] = Some(f64::NEG_INFINITY),
                    "PL" => upper[j] = Some(f64::INFINITY),
                    "BV" => {
                        col_int[j] = true;
                        lower[j] = Some(0.0);
                        upper[j] = Some(1.0);
                    }
                    other => return Err(err(lineno, format!("unsupported bound type '{other}'"))),
                }
            }
        }
    }

    let mut model = MipModel::new();
    for j in 0..col_names.len() {
        let kind = if col_int[j] { VarKind::Binary } else { VarKind::Continuous };
        let (dlo, dhi) = if col_int[j] { (0.0, 1.0) } else { (0.0, f64::INFINITY) };
        let lo = lower[j].unwrap_or(dlo);
        let hi = upper[j].unwrap_or(dhi);
        let id = model.add_var(kind, lo, hi, Tag::new(col_names[j].clone()))?;
        if col_obj[j] != 0.0 {
            model.add_objective_term(id, col_obj[j])?;
        }
    }
    for row in rows {
        let tag = Tag::new(row.name);
        match row.range {
            None => {
                model.add_constraint(row.terms, row.sense, row.rhs, tag)?;
            }
            Some(r) => {
                let (lo, hi) = match row.sense {
                    Sense::Le => (row.rhs - r.abs(), row.rhs),
                    Sense::Ge => (row.rhs, row.rhs + r.abs()),
                    Sense::Eq if r >= 0.0 => (row.rhs, row.rhs + r),
                    Sense::Eq => (row.rhs + r, row.rhs),
                };
                model.add_constraint(row.terms.clone(), Sense::Ge, lo, tag.clone())?;
                model.add_constraint(row.terms, Sense::Le, hi, tag)?;
            }
        }
    }
    Ok(model)
}
