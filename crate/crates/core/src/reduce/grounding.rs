use std::collections::BTreeMap;

use crate::netmodel::Network;
use crate::qcqp::{ConstraintSystem, Family, Part, Quantity, VarKey};

/// Fix the voltage of every perfectly grounded terminal to zero and drop its
/// KCL rows. The dropped rows stay in the system so the grounding current
/// can be evaluated after solving.
pub fn eliminate_grounded_terminals(sys: &ConstraintSystem, net: &Network) -> ConstraintSystem {
    let mut grounded = Vec::new();
    for bus in net.buses.values() {
        for t in &bus.terminals {
            if t.is_perfectly_grounded() {
                grounded.push((bus.id.clone(), t.label.clone()));
            }
        }
    }
    let mut work = sys.clone();
    work.drop_rows(|tag| {
        tag.family == Family::Kcl
            && tag.terminal.as_ref().is_some_and(|t| grounded.iter().any(|(b, l)| *b == tag.id && l == t))
    });
    let mut values = BTreeMap::new();
    for (bus, terminal) in grounded {
        let q = Quantity::Voltage { bus, terminal };
        for part in [Part::Re, Part::Im] {
            if let Some(i) = work.index_of(&VarKey::new(q.clone(), part)) {
                values.insert(i, 0.0);
            }
        }
    }
    work.substitute(&values)
}
