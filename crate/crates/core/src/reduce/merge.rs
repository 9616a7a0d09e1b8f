use std::collections::BTreeMap;

use crate::netmodel::{Line, LineCode, Network};

use super::ReduceError;

/// Lines incident to each bus.
fn incidence(net: &Network) -> BTreeMap<&str, Vec<&Line>> {
    let mut inc: BTreeMap<&str, Vec<&Line>> = BTreeMap::new();
    for l in net.lines.values() {
        inc.entry(l.from_bus.as_str()).or_default().push(l);
        inc.entry(l.to_bus.as_str()).or_default().push(l);
    }
    inc
}

fn is_passive(net: &Network, bus: &str) -> bool {
    let Some(b) = net.buses.get(bus) else { return false };
    b.bounds.is_empty()
        && b.terminals.iter().all(|t| !t.grounded)
        && !net.loads.values().any(|d| d.bus == bus)
        && !net.generators.values().any(|g| g.bus == bus)
        && !net.shunts.values().any(|s| s.bus == bus)
        && !net.sources.values().any(|s| s.bus == bus)
        && !net.transformers.values().any(|t| t.from_bus == bus || t.to_bus == bus)
}

/// Orient `l` so that it ends at `bus` (`end = true`) or starts there.
fn oriented(l: &Line, bus: &str, end: bool) -> Line {
    let at_end = l.to_bus == bus;
    if at_end == end {
        return l.clone();
    }
    Line {
        from_bus: l.to_bus.clone(),
        to_bus: l.from_bus.clone(),
        map_from: l.map_to.clone(),
        map_to: l.map_from.clone(),
        ..l.clone()
    }
}

fn merge_pair(net: &Network, bus: &str) -> Result<Option<(Line, Option<LineCode>, String)>, ReduceError> {
    if !is_passive(net, bus) {
        return Ok(None);
    }
    let inc = incidence(net);
    let Some(lines) = inc.get(bus) else { return Ok(None) };
    if lines.len() != 2 || lines[0].id == lines[1].id {
        return Ok(None);
    }
    let (first, second) = if lines[0].id <= lines[1].id { (lines[0], lines[1]) } else { (lines[1], lines[0]) };
    let a = oriented(first, bus, true);
    let b = oriented(second, bus, false);
    if a.from_bus == b.to_bus || a.map_to != b.map_from {
        return Ok(None);
    }
    let (ca, cb) = (net.linecode_of(&a)?, net.linecode_of(&b)?);
    if ca.has_shunt() || cb.has_shunt() || ca.n_conductors != cb.n_conductors {
        return Ok(None);
    }
    let mut merged = Line { to_bus: b.to_bus.clone(), map_to: b.map_to.clone(), ..a.clone() };
    if ca.id == cb.id {
        merged.length = a.length + b.length;
        return Ok(Some((merged, None, second.id.clone())));
    }
    let z = ca.z() * num_complex::Complex64::new(a.length, 0.0) + cb.z() * num_complex::Complex64::new(b.length, 0.0);
    let i_max = match (&ca.i_max, &cb.i_max) {
        (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(p, q)| p.min(*q)).collect()),
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
    };
    let code = LineCode { i_max, ..LineCode::new(&format!("{}+{}", a.id, b.id), z.map(|v| v.re), z.map(|v| v.im)) };
    merged.linecode = code.id.clone();
    merged.length = 1.0;
    Ok(Some((merged, Some(code), second.id.clone())))
}

/// Collapse chains of passive degree-two buses into single lines.
pub fn merge_series_lines(net: &Network) -> Result<Network, ReduceError> {
    let mut out = net.clone();
    loop {
        let mut changed = false;
        let buses: Vec<String> = out.buses.keys().cloned().collect();
        for bus in buses {
            if let Some((line, code, removed)) = merge_pair(&out, &bus)? {
                out.lines.remove(&removed);
                if let Some(c) = code {
                    out.add_linecode(c);
                }
                out.add_line(line);
                out.buses.remove(&bus);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let used: std::collections::BTreeSet<&str> = out.lines.values().map(|l| l.linecode.as_str()).collect();
    let unused: Vec<String> = out
        .linecodes
        .keys()
        .filter(|k| !used.contains(k.as_str()) && !net.linecodes.contains_key(*k))
        .cloned()
        .collect();
    for k in unused {
        out.linecodes.remove(&k);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn chain_collapses_to_one_line() {
        let net = fixtures::chain(6);
        let merged = merge_series_lines(&net).unwrap();
        assert_eq!(merged.lines.len(), 1);
        assert_eq!(merged.buses.len(), 2);
        let l = merged.lines.values().next().unwrap();
        assert!((l.length - 0.25).abs() < 1e-12);
        assert!(crate::netmodel::validate_network(&merged).is_empty());
    }

    #[test]
    fn loaded_buses_stay() {
        let net = fixtures::f2();
        assert_eq!(merge_series_lines(&net).unwrap(), net);
    }
}
