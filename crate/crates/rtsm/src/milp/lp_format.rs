//! LP text format writer and a reader for `name value` solution files.

use std::collections::HashMap;
use std::fmt::Write;

use super::model::{MilpModel, Sense, VarKind};
use super::MilpError;

fn legal(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.()".contains(c) { c } else { '_' })
        .collect();
    if s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s.insert(0, '_');
    }
    s
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (String, f64)>) {
    let mut first = true;
    let mut width = 0;
    for (name, a) in terms {
        let sign = if a < 0.0 { "-" } else if first { "" } else { "+" };
        let piece = format!(" {sign} {} {name}", num(a.abs()));
        width += piece.len();
        if width > 200 {
            out.push_str("\n   ");
            width = piece.len();
        }
        out.push_str(&piece);
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
}

/// Emits `model` in the standard LP text format (minimize / subject to /
/// bounds / binary sections).
pub fn write_lp(model: &MilpModel) -> String {
    let names: Vec<String> = model.vars.iter().map(|v| legal(&v.name)).collect();
    let mut out = String::new();
    if model.obj_offset != 0.0 {
        let _ = writeln!(out, "\\ objective offset {}", num(model.obj_offset));
    }
    out.push_str("Minimize\n obj:");
    write_terms(
        &mut out,
        model.vars.iter().enumerate().filter(|(_, v)| v.obj != 0.0).map(|(j, v)| (names[j].clone(), v.obj)),
    );
    out.push_str("\nSubject To\n");
    for (i, c) in model.cons.iter().enumerate() {
        let cname = if c.name.is_empty() { format!("r{i}") } else { legal(&c.name) };
        let _ = write!(out, " {cname}:");
        write_terms(&mut out, c.terms.iter().map(|&(v, a)| (names[v.0].clone(), a)));
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind == VarKind::Binary && v.lb == 0.0 && v.ub == 1.0 {
            continue;
        }
        if v.lb == f64::NEG_INFINITY && v.ub == f64::INFINITY {
            let _ = writeln!(out, " {} free", names[j]);
        } else if v.lb == v.ub {
            let _ = writeln!(out, " {} = {}", names[j], num(v.lb));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lb), names[j], num(v.ub));
        }
    }
    let bins: Vec<&String> =
        model.vars.iter().enumerate().filter(|(_, v)| v.kind == VarKind::Binary).map(|(j, _)| &names[j]).collect();
    if !bins.is_empty() {
        out.push_str("Binary\n");
        for chunk in bins.chunks(8) {
            out.push(' ');
            out.push_str(&chunk.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}

/// Reads a solution file with one `name value` pair per line (an optional
/// leading column index is accepted) and returns values in model order.
pub fn read_solution(model: &MilpModel, text: &str) -> Result<Vec<f64>, MilpError> {
    let index: HashMap<String, usize> =
        model.vars.iter().enumerate().map(|(j, v)| (legal(&v.name), j)).collect();
    let mut values = vec![f64::NAN; model.vars.len()];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('\\') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        // "name value" or "index name value [...]"
        let (name, value) = match fields.as_slice() {
            [name, value] => (*name, *value),
            [idx, name, value, ..] if idx.parse::<usize>().is_ok() => (*name, *value),
            _ => continue,
        };
        let Some(&j) = index.get(name) else {
            if value.parse::<f64>().is_err() {
                continue;
            }
            return Err(MilpError::SolutionParse { line: ln + 1, msg: format!("unknown variable {name}") });
        };
        values[j] = value
            .parse()
            .map_err(|_| MilpError::SolutionParse { line: ln + 1, msg: format!("bad value {value}") })?;
    }
    if let Some(j) = values.iter().position(|v| v.is_nan()) {
        return Err(MilpError::SolutionParse { line: 0, msg: format!("missing variable {}", model.vars[j].name) });
    }
    Ok(values)
}
