use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_complex::Complex64;

use crate::form::{build_ivr, Formulation, FormulationConfig};
use crate::netmodel::{Network, NEUTRAL};

use super::{newton_pf, SolveError, SolverOptions};

pub type TerminalVoltages = BTreeMap<(String, String), Complex64>;

fn key(bus: &str, t: &str) -> (String, String) {
    (bus.to_string(), t.to_string())
}

/// No-load voltages: source phasors propagated through lines unchanged and
/// across ideal transformers by their turns ratio, following the
/// conductor-terminal maps. Grounded terminals are zero.
pub fn noload_voltages(net: &Network) -> Result<TerminalVoltages, SolveError> {
    if net.sources.is_empty() {
        return Err(SolveError::NoSource);
    }
    let mut u: TerminalVoltages = BTreeMap::new();
    let mut reached: BTreeSet<String> = BTreeSet::new();
    let mut queue = VecDeque::new();
    for bus in net.buses.values() {
        for t in &bus.terminals {
            if t.is_perfectly_grounded() {
                u.insert(key(&bus.id, &t.label), Complex64::default());
            }
        }
    }
    for s in net.sources.values() {
        for (t, v) in &s.phasors {
            u.insert(key(&s.bus, t), *v);
        }
        if reached.insert(s.bus.clone()) {
            queue.push_back(s.bus.clone());
        }
    }
    while let Some(bus) = queue.pop_front() {
        let mut next = Vec::new();
        for l in net.lines.values() {
            let (other, here_map, there_map) = if l.from_bus == bus {
                (&l.to_bus, &l.map_from, &l.map_to)
            } else if l.to_bus == bus {
                (&l.from_bus, &l.map_to, &l.map_from)
            } else {
                continue;
            };
            for (a, b) in here_map.iter().zip(there_map) {
                if let Some(v) = u.get(&key(&bus, a)).copied() {
                    u.entry(key(other, b)).or_insert(v);
                }
            }
            next.push(other.clone());
        }
        let mut pending: Vec<(&str, &[String], Complex64)> = Vec::new();
        for t in net.transformers.values() {
            let (other, here_map, there_map, ratio) = if t.from_bus == bus {
                (&t.to_bus, &t.map_from, &t.map_to, 1.0 / t.turns_ratio)
            } else if t.to_bus == bus {
                (&t.from_bus, &t.map_to, &t.map_from, t.turns_ratio)
            } else {
                continue;
            };
            if reached.contains(other) {
                continue;
            }
            let ux = u.get(&key(&bus, &here_map[0])).copied().unwrap_or_default();
            let uy = u.get(&key(&bus, &here_map[1])).copied().unwrap_or_default();
            pending.push((other.as_str(), there_map.as_slice(), (ux - uy) * ratio));
            next.push(other.clone());
        }
        // Resolve winding voltage differences; a floating winding group is
        // anchored at its first terminal and then centred.
        let mut floating: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
        let mut progress = true;
        let mut left = pending;
        while progress && !left.is_empty() {
            progress = false;
            let mut rest = Vec::new();
            for (other, map, d) in left {
                let kx = key(other, &map[0]);
                let ky = key(other, &map[1]);
                match (u.get(&kx).copied(), u.get(&ky).copied()) {
                    (_, Some(vy)) => {
                        u.entry(kx).or_insert(vy + d);
                        progress = true;
                    }
                    (Some(vx), None) => {
                        u.insert(ky, vx - d);
                        progress = true;
                    }
                    (None, None) => rest.push((other, map, d)),
                }
            }
            if !progress {
                if let Some((other, map, _)) = rest.first() {
                    u.insert(key(other, &map[1]), Complex64::default());
                    floating.entry(other).or_default().extend(map.iter().cloned());
                    progress = true;
                }
            }
            left = rest;
        }
        for (other, labels) in floating {
            let vals: Vec<Complex64> = labels.iter().map(|t| u[&key(other, t)]).collect();
            let mean = vals.iter().sum::<Complex64>() / vals.len() as f64;
            for t in &labels {
                if let Some(v) = u.get_mut(&key(other, t)) {
                    *v -= mean;
                }
            }
        }
        for b in next {
            if reached.insert(b.clone()) {
                queue.push_back(b);
            }
        }
    }
    for (bus, _) in net.connected_terminals() {
        if !reached.contains(&bus) {
            return Err(SolveError::UnreachableBus(bus));
        }
    }
    Ok(u)
}

/// Per-bus voltage base: the largest no-load terminal voltage magnitude.
pub fn voltage_bases(net: &Network, noload: &TerminalVoltages) -> BTreeMap<String, f64> {
    net.buses
        .keys()
        .map(|b| {
            let vmax = noload
                .range(key(b, "")..)
                .take_while(|((bb, _), _)| bb == b)
                .map(|(_, v)| v.norm())
                .fold(0.0, f64::max);
            (b.clone(), if vmax > 0.0 { vmax } else { 1.0 })
        })
        .collect()
}

/// Initial terminal voltages in volts: the no-load profile, with ungrounded
/// neutral terminals placed at `eps` per unit on the real axis.
pub fn init_voltages(net: &Network, eps: f64) -> Result<TerminalVoltages, SolveError> {
    let mut u = noload_voltages(net)?;
    let bases = voltage_bases(net, &u);
    for bus in net.buses.values() {
        for t in &bus.terminals {
            if t.label == NEUTRAL && !t.grounded && net.source_phasor(&bus.id, &t.label).is_none() {
                u.insert(key(&bus.id, &t.label), Complex64::new(eps * bases[&bus.id], 0.0));
            }
        }
    }
    Ok(u)
}

/// Load-aware starting point for `f`: one linearized current-injection
/// step (a single Newton iteration of the current-voltage power flow from
/// the no-load profile), mapped into the variables of `f`. Converges to the
/// physical root in cases where the no-load start lets a power-voltage
/// model settle on a zero neutral voltage.
pub fn load_aware_start(f: &Formulation) -> Result<Vec<f64>, SolveError> {
    let cfg = FormulationConfig { neutral_init: f.cfg.neutral_init, ..FormulationConfig::power_flow() };
    let ivr = build_ivr(&f.net, &cfg)?;
    let opts = SolverOptions { max_iter: 1, ..SolverOptions::default() };
    let step = newton_pf(&ivr.sys, &opts)?;
    Ok(f.point_from_state(&ivr.state_from_point(&step.x)))
}
