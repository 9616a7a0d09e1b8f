use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::form::{terminal_current_balance, Formulation};
use crate::netmodel::NEUTRAL;
use crate::reduce::vuf;

use super::Solution;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BusReport {
    /// Largest phase-to-neutral voltage magnitude in volts.
    pub max_phase_neutral: f64,
    /// Neutral terminal voltage magnitude in volts (0 without a neutral).
    pub neutral_shift: f64,
    /// Voltage unbalance factor, when the bus has three phases.
    pub vuf: Option<f64>,
}

/// Quantities recovered after a solve, in SI units per modelled phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PostReport {
    /// Current from each perfectly grounded terminal into ground, keyed
    /// `bus.terminal`.
    pub grounding_currents: BTreeMap<String, Complex64>,
    /// Power drawn by each load element and supplied by each generator
    /// element, keyed by element id.
    pub load_powers: BTreeMap<String, Complex64>,
    pub gen_powers: BTreeMap<String, Complex64>,
    /// Power entering each line at its from and to ends, per conductor.
    pub line_flows: BTreeMap<String, (Vec<Complex64>, Vec<Complex64>)>,
    /// Power injected by each source, keyed `bus.terminal`.
    pub source_powers: BTreeMap<String, Complex64>,
    pub buses: BTreeMap<String, BusReport>,
}

/// Attach grounding currents, component powers and bus voltage quality
/// figures to a solution.
pub fn recover_postprocessing(f: &Formulation, mut sol: Solution) -> Solution {
    let net = &f.net;
    let st = f.state_from_point(&sol.x);
    let balance = terminal_current_balance(net, &st);
    let mut rep = PostReport::default();
    for ((bus, t), i) in &balance {
        if net.is_perfectly_grounded(bus, t) {
            rep.grounding_currents.insert(format!("{bus}.{t}"), -*i);
        }
        if net.source_phasor(bus, t).is_some() {
            rep.source_powers.insert(format!("{bus}.{t}"), st.voltage(bus, t) * i.conj());
        }
    }
    rep.load_powers = st.load_powers.clone();
    rep.gen_powers = st.gen_powers.clone();
    for (id, c) in &st.lines {
        let l = &net.lines[id];
        let fr = c.from.iter().zip(&l.map_from).map(|(i, t)| st.voltage(&l.from_bus, t) * i.conj()).collect();
        let to = c.to.iter().zip(&l.map_to).map(|(i, t)| st.voltage(&l.to_bus, t) * i.conj()).collect();
        rep.line_flows.insert(id.clone(), (fr, to));
    }
    for bus in net.buses.values() {
        let un = if bus.has_terminal(NEUTRAL) { st.voltage(&bus.id, NEUTRAL) } else { Complex64::default() };
        let ph: Vec<Complex64> = bus.phase_labels().map(|p| st.voltage(&bus.id, p) - un).collect();
        let max_phase_neutral = ph.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let vuf = (ph.len() == 3).then(|| vuf(ph[0], ph[1], ph[2]));
        rep.buses.insert(bus.id.clone(), BusReport { max_phase_neutral, neutral_shift: un.norm(), vuf });
    }
    sol.recovered = Some(rep);
    sol
}
