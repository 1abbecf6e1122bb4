//! CPLEX LP text format writer, for cross-checking problems in external solvers.

use std::fmt::Write;

use super::{LinearProgram, RowSense};

fn term(out: &mut String, coef: f64, name: &str, first: bool) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {}", -coef, name);
    } else if first {
        let _ = write!(out, " {coef} {name}");
    } else {
        let _ = write!(out, " + {coef} {name}");
    }
}

/// Renders `lp` in LP format; variables are named `x0, x1, ...`, rows `r0, r1, ...`.
pub fn write_lp_format(lp: &LinearProgram, binaries: &[usize]) -> String {
    let mut out = String::from("Minimize\n obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, c, &format!("x{j}"), first);
            first = false;
        }
    }
    if lp.objective_offset != 0.0 || first {
        if lp.objective_offset < 0.0 {
            let _ = write!(out, " - {}", -lp.objective_offset);
        } else {
            let _ = write!(out, " + {}", lp.objective_offset);
        }
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.rows.iter().enumerate() {
        let _ = write!(out, " r{i}:");
        let mut first = true;
        for &(j, v) in &row.coeffs {
            term(&mut out, v, &format!("x{j}"), first);
            first = false;
        }
        if first {
            out.push_str(" 0 x0");
        }
        let op = match row.sense {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) if l == u => {
                let _ = writeln!(out, " x{j} = {l}");
            }
            (true, true) => {
                let _ = writeln!(out, " {l} <= x{j} <= {u}");
            }
            (true, false) => {
                let _ = writeln!(out, " x{j} >= {l}");
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= x{j} <= {u}");
            }
            (false, false) => {
                let _ = writeln!(out, " x{j} free");
            }
        }
    }
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for &j in binaries {
            let _ = writeln!(out, " x{j}");
        }
    }
    out.push_str("End\n");
    out
}
