use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::netmodel::{LineCode, Network};

use super::kron::kron_reduce;
use super::sequence::{sequence_impedance, SequenceImpedance};
use super::ReduceError;

/// Index of the library entry closest to `original` in `(r+, x+)` space.
/// Ties go to the lowest index. `None` for an empty library.
pub fn match_linecode(original: &SequenceImpedance, library: &[SequenceImpedance]) -> Option<usize> {
    closest(original.z_plus, library.iter().map(|s| s.z_plus))
}

pub fn closest(target: Complex64, candidates: impl IntoIterator<Item = Complex64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, z) in candidates.into_iter().enumerate() {
        let d = (target - z).norm();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|b| b.0)
}

/// Positive-sequence impedance per km: three-wire codes directly, four-wire
/// codes after Kron-reducing the last conductor. `None` for other sizes.
pub fn positive_sequence_of(code: &LineCode) -> Result<Option<Complex64>, ReduceError> {
    Ok(match code.n_conductors {
        3 => Some(sequence_impedance(code).z_plus),
        4 => Some(sequence_impedance(&kron_reduce(code, 3)?).z_plus),
        _ => None,
    })
}

/// Replace the linecode of every line by the library code with the nearest
/// positive-sequence impedance, among library codes with the same
/// conductor count. Codes without a candidate are kept.
pub fn rematch_linecodes(net: &Network, library: &[LineCode]) -> Result<Network, ReduceError> {
    let mut lib = Vec::new();
    for c in library {
        if let Some(z) = positive_sequence_of(c)? {
            lib.push((c, z));
        }
    }
    let mut chosen: BTreeMap<String, Option<&LineCode>> = BTreeMap::new();
    for (id, code) in &net.linecodes {
        let pick = match positive_sequence_of(code)? {
            Some(z) => {
                let same: Vec<_> = lib.iter().filter(|(c, _)| c.n_conductors == code.n_conductors).collect();
                closest(z, same.iter().map(|(_, z)| *z)).map(|i| same[i].0)
            }
            None => None,
        };
        if pick.is_none() {
            log::warn!("linecode {id} has no library candidate and is kept");
        }
        chosen.insert(id.clone(), pick);
    }
    let mut out = net.clone();
    for line in out.lines.values_mut() {
        if let Some(Some(c)) = chosen.get(&line.linecode) {
            line.linecode = c.id.clone();
        }
    }
    let used: std::collections::BTreeSet<&String> = out.lines.values().map(|l| &l.linecode).collect();
    let mut codes: BTreeMap<String, LineCode> = BTreeMap::new();
    for id in used {
        let code = net.linecodes.get(id).or_else(|| library.iter().find(|c| &c.id == id));
        if let Some(c) = code {
            codes.insert(id.clone(), c.clone());
        }
    }
    out.linecodes = codes;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(r: f64, x: f64) -> SequenceImpedance {
        SequenceImpedance { z_plus: Complex64::new(r, x), z_zero: Complex64::new(0.0, 0.0), coupling: 0.0 }
    }

    #[test]
    fn exact_match_wins() {
        assert_eq!(match_linecode(&seq(0.3, 0.1), &[seq(0.1, 0.1), seq(0.3, 0.1)]), Some(1));
    }

    #[test]
    fn rematch_picks_nearest_library_code() {
        let net = crate::fixtures::f1();
        let scaled = |id: &str, k: f64| {
            let c = crate::fixtures::cable();
            LineCode::new(id, c.r.clone() * k, c.x.clone() * k)
        };
        let lib = vec![scaled("big", 3.0), scaled("close", 1.05), scaled("small", 0.3)];
        let out = rematch_linecodes(&net, &lib).unwrap();
        assert_eq!(out.lines["l1"].linecode, "close");
        assert!(out.linecodes.contains_key("close") && !out.linecodes.contains_key("cable4"));
    }

    #[test]
    fn nearer_candidate_wins() {
        assert_eq!(match_linecode(&seq(0.0, 0.0), &[seq(0.2, 0.0), seq(0.0, 0.1)]), Some(1));
    }

    #[test]
    fn ties_go_to_lower_index() {
        assert_eq!(match_linecode(&seq(0.0, 0.0), &[seq(0.1, 0.0), seq(0.0, 0.1), seq(-0.1, 0.0)]), Some(0));
    }

    #[test]
    fn empty_library() {
        assert_eq!(match_linecode(&seq(0.0, 0.0), &[]), None);
    }
}
