use super::milp::{MilpInstance, Sense, VarKind};
use super::ModelError;
use std::fmt::Write;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Lp,
    Mps,
}

impl FromStr for ExportFormat {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lp" | "lp-text" => Ok(ExportFormat::Lp),
            "mps" | "mps-text" => Ok(ExportFormat::Mps),
            _ => Err(ModelError::UnsupportedFormat(s.to_string())),
        }
    }
}

/// Render an instance as CPLEX-LP or free-MPS text.
pub fn export_milp(inst: &MilpInstance, format: &str) -> Result<String, ModelError> {
    Ok(match format.parse::<ExportFormat>()? {
        ExportFormat::Lp => to_lp(inst),
        ExportFormat::Mps => to_mps(inst),
    })
}

fn push_terms(out: &mut String, inst: &MilpInstance, terms: &[(usize, f64)]) {
    let mut width = 0;
    for (n, &(v, c)) in terms.iter().enumerate() {
        let name = &inst.variables[v].name;
        let piece = if c < 0.0 {
            format!(" - {} {}", -c, name)
        } else if n == 0 {
            format!(" {} {}", c, name)
        } else {
            format!(" + {} {}", c, name)
        };
        if width + piece.len() > 200 {
            out.push_str("\n  ");
            width = 0;
        }
        width += piece.len();
        out.push_str(&piece);
    }
}

fn to_lp(inst: &MilpInstance) -> String {
    let mut out = String::new();
    out.push_str("\\ terminal-area arrival routing\nMinimize\n obj:");
    push_terms(&mut out, inst, &inst.objective);
    out.push_str("\nSubject To\n");
    for r in &inst.rows {
        let _ = write!(out, " {}:", r.name);
        if r.coeffs.is_empty() {
            let _ = write!(
                out,
                " 0 {}",
                inst.variables.first().map_or("", |v| v.name.as_str())
            );
        }
        push_terms(&mut out, inst, &r.coeffs);
        let op = match r.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", r.rhs);
    }
    out.push_str("Bounds\n");
    for v in inst
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Continuous)
    {
        if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, v.lower);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
        }
    }
    let bins: Vec<&str> = inst
        .variables
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
    out.push_str("End\n");
    out
}

fn to_mps(inst: &MilpInstance) -> String {
    let mut out = String::new();
    out.push_str("NAME tma\nROWS\n N obj\n");
    for r in &inst.rows {
        let t = match r.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {t} {}", r.name);
    }
    let mut columns: Vec<Vec<(&str, f64)>> = vec![Vec::new(); inst.variables.len()];
    for &(v, c) in &inst.objective {
        columns[v].push(("obj", c));
    }
    for r in &inst.rows {
        for &(v, c) in &r.coeffs {
            columns[v].push((r.name.as_str(), c));
        }
    }
    out.push_str("COLUMNS\n");
    for (v, entries) in columns.iter().enumerate() {
        let name = &inst.variables[v].name;
        if entries.is_empty() {
            let _ = writeln!(out, " {name} obj 0");
        }
        for (row, c) in entries {
            let _ = writeln!(out, " {name} {row} {c}");
        }
    }
    out.push_str("RHS\n");
    for r in inst.rows.iter().filter(|r| r.rhs != 0.0) {
        let _ = writeln!(out, " RHS {} {}", r.name, r.rhs);
    }
    out.push_str("BOUNDS\n");
    for v in &inst.variables {
        match v.kind {
            VarKind::Binary => {
                let _ = writeln!(out, " BV BND {}", v.name);
            }
            VarKind::Continuous if v.lower == v.upper => {
                let _ = writeln!(out, " FX BND {} {}", v.name, v.lower);
            }
            VarKind::Continuous => {
                let _ = writeln!(out, " LO BND {} {}", v.name, v.lower);
                let _ = writeln!(out, " UP BND {} {}", v.name, v.upper);
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}
