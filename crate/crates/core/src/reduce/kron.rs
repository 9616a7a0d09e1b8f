use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::netmodel::{LineCode, Network, NEUTRAL};

use super::ReduceError;

/// Schur complement `A_pp - A_pe A_ee^-1 A_ep` eliminating index `e`.
pub fn schur_eliminate(a: &DMatrix<Complex64>, e: usize) -> Option<DMatrix<Complex64>> {
    let n = a.nrows();
    let pivot = a[(e, e)];
    if pivot.norm() == 0.0 || !pivot.is_finite() {
        return None;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != e).collect();
    Some(DMatrix::from_fn(n - 1, n - 1, |i, j| {
        let (r, c) = (keep[i], keep[j]);
        a[(r, c)] - a[(r, e)] * a[(e, c)] / pivot
    }))
}

fn drop_index(a: &DMatrix<f64>, e: usize) -> DMatrix<f64> {
    a.clone().remove_row(e).remove_column(e)
}

/// Eliminate conductor `eliminate` from a linecode, assuming it is perfectly
/// grounded at both ends. Shunt admittances of the eliminated conductor are
/// dropped with it (its voltage is zero).
pub fn kron_reduce(code: &LineCode, eliminate: usize) -> Result<LineCode, ReduceError> {
    if eliminate >= code.n_conductors {
        return Err(ReduceError::NoSuchConductor { linecode: code.id.clone(), index: eliminate });
    }
    let z = schur_eliminate(&code.z(), eliminate)
        .ok_or_else(|| ReduceError::SingularBlock { linecode: code.id.clone() })?;
    let opt = |m: &Option<DMatrix<f64>>| m.as_ref().map(|m| drop_index(m, eliminate));
    Ok(LineCode {
        id: format!("{}.kron", code.id),
        n_conductors: code.n_conductors - 1,
        r: z.map(|v| v.re),
        x: z.map(|v| v.im),
        g_fr: opt(&code.g_fr),
        b_fr: opt(&code.b_fr),
        g_to: opt(&code.g_to),
        b_to: opt(&code.b_to),
        i_max: code.i_max.as_ref().map(|v| {
            let mut v = v.clone();
            v.remove(eliminate);
            v
        }),
    })
}

/// Kron-reduce every line that carries a neutral conductor. The neutral
/// survives only as a perfectly grounded terminal at buses where a
/// non-line component still references it.
pub fn kron_network(net: &Network) -> Result<Network, ReduceError> {
    if !net.transformers.is_empty() {
        log::debug!("kron reduction keeps transformer neutrals as grounded terminals");
    }
    let mut out = net.clone();
    out.linecodes.clear();
    let mut reduced_codes = std::collections::BTreeMap::new();
    for line in out.lines.values_mut() {
        let code = net.linecode_of(line)?;
        let Some(k) = line.map_from.iter().position(|t| t == NEUTRAL) else {
            out.linecodes.insert(code.id.clone(), code.clone());
            continue;
        };
        if line.map_to.get(k).map(String::as_str) != Some(NEUTRAL) {
            return Err(ReduceError::NeutralMismatch { line: line.id.clone() });
        }
        let key = (code.id.clone(), k);
        if !reduced_codes.contains_key(&key) {
            let mut r = kron_reduce(code, k)?;
            if k != code.n_conductors - 1 {
                r.id = format!("{}.kron{k}", code.id);
            }
            reduced_codes.insert(key.clone(), r);
        }
        let r = &reduced_codes[&key];
        line.linecode = r.id.clone();
        line.map_from.remove(k);
        line.map_to.remove(k);
    }
    for c in reduced_codes.into_values() {
        out.linecodes.insert(c.id.clone(), c);
    }
    for s in out.shunts.values_mut() {
        if let Some(k) = s.map.iter().position(|t| t == NEUTRAL) {
            s.map.remove(k);
            s.y = s.y.clone().remove_row(k).remove_column(k);
        }
    }
    out.shunts.retain(|_, s| !s.map.is_empty());
    let mut uses_neutral = std::collections::BTreeSet::new();
    for d in out.loads.values() {
        if d.map.iter().any(|t| t == NEUTRAL) {
            uses_neutral.insert(d.bus.clone());
        }
    }
    for g in out.generators.values() {
        if g.map.iter().any(|t| t == NEUTRAL) {
            uses_neutral.insert(g.bus.clone());
        }
    }
    for t in out.transformers.values() {
        if t.map_from.iter().any(|x| x == NEUTRAL) {
            uses_neutral.insert(t.from_bus.clone());
        }
        if t.map_to.iter().any(|x| x == NEUTRAL) {
            uses_neutral.insert(t.to_bus.clone());
        }
    }
    for bus in out.buses.values_mut() {
        if uses_neutral.contains(&bus.id) {
            if let Some(t) = bus.terminal_mut(NEUTRAL) {
                t.grounded = true;
                t.grounding_impedance = None;
            }
        } else {
            bus.terminals.retain(|t| t.label != NEUTRAL);
        }
        bus.bounds.vn_max = None;
    }
    for s in out.sources.values_mut() {
        let keep = out.buses.get(&s.bus).is_some_and(|b| b.has_terminal(NEUTRAL));
        if keep {
            s.phasors.insert(NEUTRAL.to_string(), Complex64::new(0.0, 0.0));
        } else {
            s.phasors.remove(NEUTRAL);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn code(z: DMatrix<Complex64>) -> LineCode {
        LineCode::new("lc", z.map(|v| v.re), z.map(|v| v.im))
    }

    #[test]
    fn zero_coupling_keeps_phase_block() {
        let z = DMatrix::from_fn(4, 4, |i, j| if i == j { c(0.1 * (i + 1) as f64, 0.3) } else if i < 3 && j < 3 { c(0.01, 0.05) } else { c(0.0, 0.0) });
        let r = kron_reduce(&code(z.clone()), 3).unwrap();
        assert_eq!(r.z(), z.view((0, 0), (3, 3)).into_owned());
    }

    #[test]
    fn symmetric_closed_form() {
        let zs = c(0.4, 0.9);
        let zm = c(0.05, 0.35);
        let z = DMatrix::from_fn(4, 4, |i, j| if i == j { zs } else { zm });
        let r = kron_reduce(&code(z), 3).unwrap().z();
        let d = zs - zm * zm / zs;
        let o = zm - zm * zm / zs;
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { d } else { o };
                assert!((r[(i, j)] - e).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn singular_block_is_an_error() {
        let z = DMatrix::from_fn(2, 2, |i, j| if i == 0 && j == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert!(matches!(kron_reduce(&code(z), 1), Err(ReduceError::SingularBlock { .. })));
    }
}
