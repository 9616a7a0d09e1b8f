use std::fmt::Write;

use super::{ConstraintSystem, QuadExpr, Sense};

fn bound(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:e}")
    }
}

fn expr(sys: &ConstraintSystem, e: &QuadExpr) -> String {
    let name = |i: usize| sys.variables[i].key.to_string();
    let mut parts = Vec::new();
    for &(i, j, c) in &e.quad {
        if i == j {
            parts.push(format!("{c:e}*{}^2", name(i)));
        } else {
            parts.push(format!("{c:e}*{}*{}", name(i), name(j)));
        }
    }
    for &(i, c) in &e.lin {
        parts.push(format!("{c:e}*{}", name(i)));
    }
    if e.constant != 0.0 || parts.is_empty() {
        parts.push(format!("{:e}", e.constant));
    }
    parts.join(" + ")
}

/// Text rendering of a system in monomial form, stable for diffing.
pub fn dump(sys: &ConstraintSystem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "variables {}", sys.n_vars());
    for (i, v) in sys.variables.iter().enumerate() {
        let kind = serde_json::to_value(v.kind()).ok().and_then(|k| k.as_str().map(str::to_string)).unwrap_or_default();
        let _ = writeln!(
            s,
            "  x{i} {} {kind} [{}, {}] init={:e}",
            v.key,
            bound(v.lower),
            bound(v.upper),
            v.init
        );
    }
    let _ = writeln!(s, "fixed {}", sys.fixed.len());
    for (k, v) in &sys.fixed {
        let _ = writeln!(s, "  {k} = {v:e}");
    }
    let _ = writeln!(s, "constraints {}", sys.n_cons());
    for (k, c) in sys.constraints.iter().enumerate() {
        let op = match c.sense {
            Sense::Eq => "==",
            Sense::Le => "<=",
        };
        let _ = writeln!(s, "  c{k} {}: {} {op} 0", c.tag, expr(sys, &c.expr));
    }
    let _ = writeln!(s, "dropped {}", sys.dropped.len());
    for c in &sys.dropped {
        let _ = writeln!(s, "  {}: {}", c.tag, expr(sys, &c.expr));
    }
    let obj = QuadExpr::from(sys.objective.clone());
    let _ = writeln!(s, "objective: {}", expr(sys, &obj));
    s
}
