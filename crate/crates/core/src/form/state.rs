//! Physical network state in SI units and its mapping to and from the
//! variable vectors of either form.
//!
//! Currents are those a component conductor draws from its bus terminal,
//! so the currents at an ungrounded, source-free terminal sum to zero.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::netmodel::{Load, LoadModel, Network, NEUTRAL};
use crate::qcqp::{ComponentKind, Part, Quantity, Seq, Side, VarKey};
use crate::reduce::sequence::sequence_components;

use super::{load_groups, Form, Formulation};

type Terminal = (String, String);

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LineCurrents {
    pub from: Vec<Complex64>,
    pub to: Vec<Complex64>,
    pub series: Vec<Complex64>,
}

/// Voltages (V), currents (A) and powers (VA) of an expanded network, per
/// modelled phase. Load and generator currents flow from the element's
/// first terminal to its second; generator currents are injected at the
/// first terminal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkState {
    pub voltages: BTreeMap<Terminal, Complex64>,
    pub lines: BTreeMap<String, LineCurrents>,
    /// `[ix, iy, jx, jy]` drawn at the primary and secondary terminals.
    pub transformers: BTreeMap<String, [Complex64; 4]>,
    pub load_currents: BTreeMap<String, Complex64>,
    pub load_powers: BTreeMap<String, Complex64>,
    pub gen_currents: BTreeMap<String, Complex64>,
    pub gen_powers: BTreeMap<String, Complex64>,
    pub shunts: BTreeMap<String, Vec<Complex64>>,
}

impl NetworkState {
    pub fn voltage(&self, bus: &str, t: &str) -> Complex64 {
        self.voltages.get(&(bus.to_string(), t.to_string())).copied().unwrap_or_default()
    }

    /// Every `(terminal, drawn current)` pair of the state.
    pub fn drawn_currents(&self, net: &Network) -> Vec<(Terminal, Complex64)> {
        let key = |b: &str, t: &str| (b.to_string(), t.to_string());
        let mut out = Vec::new();
        for (id, c) in &self.lines {
            let l = &net.lines[id];
            for (k, i) in c.from.iter().enumerate() {
                out.push((key(&l.from_bus, &l.map_from[k]), *i));
            }
            for (k, i) in c.to.iter().enumerate() {
                out.push((key(&l.to_bus, &l.map_to[k]), *i));
            }
        }
        for (id, c) in &self.transformers {
            let t = &net.transformers[id];
            out.push((key(&t.from_bus, &t.map_from[0]), c[0]));
            out.push((key(&t.from_bus, &t.map_from[1]), c[1]));
            out.push((key(&t.to_bus, &t.map_to[0]), c[2]));
            out.push((key(&t.to_bus, &t.map_to[1]), c[3]));
        }
        for (id, i) in &self.load_currents {
            let d = &net.loads[id];
            out.push((key(&d.bus, &d.map[0]), *i));
            out.push((key(&d.bus, &d.map[1]), -*i));
        }
        for (id, i) in &self.gen_currents {
            let g = &net.generators[id];
            out.push((key(&g.bus, &g.map[0]), -*i));
            out.push((key(&g.bus, &g.map[1]), *i));
        }
        for (id, c) in &self.shunts {
            let s = &net.shunts[id];
            for (k, i) in c.iter().enumerate() {
                out.push((key(&s.bus, &s.map[k]), *i));
            }
        }
        out
    }
}

/// Sum of currents drawn at each terminal, in ampere. Zero at ungrounded,
/// source-free terminals of a physical state; at grounded terminals it is
/// the current into ground, at source terminals the source injection.
pub fn terminal_current_balance(net: &Network, st: &NetworkState) -> BTreeMap<Terminal, Complex64> {
    let mut out: BTreeMap<Terminal, Complex64> = BTreeMap::new();
    for (t, i) in st.drawn_currents(net) {
        *out.entry(t).or_default() += i;
    }
    out
}

/// Sum of `U conj(I)` over the currents drawn at each terminal, in VA.
pub fn terminal_power_balance(net: &Network, st: &NetworkState) -> BTreeMap<Terminal, Complex64> {
    let mut out: BTreeMap<Terminal, Complex64> = BTreeMap::new();
    for (t, i) in st.drawn_currents(net) {
        let u = st.voltage(&t.0, &t.1);
        *out.entry(t).or_default() += u * i.conj();
    }
    out
}

fn safe_div(a: Complex64, b: Complex64) -> Complex64 {
    if b.norm() > 0.0 {
        a / b
    } else {
        Complex64::default()
    }
}

impl Formulation {
    fn cval(&self, q: Quantity, x: &[f64]) -> Option<Complex64> {
        self.sys.complex_value(&q, x)
    }

    /// Element power in VA from its model at a given element voltage.
    fn model_power(&self, d: &Load, uxy: Complex64, x: &[f64]) -> Complex64 {
        let k = self.net.phase_multiplicity;
        let s = Complex64::new(d.p_nom.get(0), d.q_nom.get(0)) / k;
        match d.model {
            LoadModel::Power | LoadModel::Zip => s,
            _ => match self.cval(Quantity::LoadPower { load: d.id.clone() }, x) {
                Some(v) if self.form == Form::Acr => v * self.bases.s_base,
                _ => match d.model {
                    LoadModel::Impedance => s * (uxy.norm() / d.u_nom).powi(2),
                    _ => s * (uxy.norm() / d.u_nom),
                },
            },
        }
    }

    /// Physical state at a point of this formulation.
    pub fn state_from_point(&self, x: &[f64]) -> NetworkState {
        let net = &self.net;
        let mut st = NetworkState { voltages: self.voltages(x), ..Default::default() };
        for t in net.connected_terminals() {
            st.voltages.entry(t).or_default();
        }
        let s_base = self.bases.s_base;
        for l in net.lines.values() {
            let Ok(code) = net.linecode_of(l) else { continue };
            let n = code.n_conductors;
            let len = Complex64::new(l.length, 0.0);
            let ui: Vec<Complex64> = l.map_from.iter().map(|t| st.voltage(&l.from_bus, t)).collect();
            let uj: Vec<Complex64> = l.map_to.iter().map(|t| st.voltage(&l.to_bus, t)).collect();
            let yfr = code.y_fr() * len;
            let yto = code.y_to() * len;
            let (ibi, ibj) = (self.bases.ib(&l.from_bus), self.bases.ib(&l.to_bus));
            let series: Vec<Complex64> = match self.form {
                Form::Ivr => (0..n)
                    .map(|k| {
                        self.cval(Quantity::SeriesCurrent { line: l.id.clone(), conductor: k }, x).unwrap_or_default()
                            * ibi
                    })
                    .collect(),
                Form::Acr => {
                    let ys = (code.z() * len).try_inverse().unwrap_or_else(|| code.z() * Complex64::default());
                    (0..n).map(|k| (0..n).map(|m| ys[(k, m)] * (ui[m] - uj[m])).sum()).collect()
                }
            };
            let mut c = LineCurrents { series: series.clone(), ..Default::default() };
            for k in 0..n {
                let shunt_fr: Complex64 = (0..n).map(|m| yfr[(k, m)] * ui[m]).sum();
                let shunt_to: Complex64 = (0..n).map(|m| yto[(k, m)] * uj[m]).sum();
                let read = |side| self.cval(Quantity::LineCurrent { line: l.id.clone(), side, conductor: k }, x);
                c.from.push(read(Side::From).map(|v| v * ibi).unwrap_or(series[k] + shunt_fr));
                c.to.push(read(Side::To).map(|v| v * ibj).unwrap_or(-series[k] + shunt_to));
            }
            st.lines.insert(l.id.clone(), c);
        }
        for t in net.transformers.values() {
            let (ibi, ibj) = (self.bases.ib(&t.from_bus), self.bases.ib(&t.to_bus));
            let cur = match self.form {
                Form::Ivr => {
                    let r = |side, k, ib: f64| {
                        self.cval(Quantity::TransformerCurrent { transformer: t.id.clone(), side, conductor: k }, x)
                            .unwrap_or_default()
                            * ib
                    };
                    [r(Side::From, 0, ibi), r(Side::From, 1, ibi), r(Side::To, 0, ibj), r(Side::To, 1, ibj)]
                }
                Form::Acr => {
                    let f = |side, k| {
                        self.cval(Quantity::Flow { kind: ComponentKind::Transformer, id: t.id.clone(), side, conductor: k }, x)
                            .unwrap_or_default()
                            * s_base
                    };
                    // Each winding carries one current; read it at the terminal
                    // with the larger voltage.
                    let pair = |bus: &str, map: &[String], side| {
                        let (ua, ub) = (st.voltage(bus, &map[0]), st.voltage(bus, &map[1]));
                        let i = if ua.norm() >= ub.norm() {
                            safe_div(f(side, 0), ua).conj()
                        } else {
                            -safe_div(f(side, 1), ub).conj()
                        };
                        (i, -i)
                    };
                    let (ix, iy) = pair(&t.from_bus, &t.map_from, Side::From);
                    let (jx, jy) = pair(&t.to_bus, &t.map_to, Side::To);
                    [ix, iy, jx, jy]
                }
            };
            st.transformers.insert(t.id.clone(), cur);
        }
        for d in net.loads.values() {
            let uxy = st.voltage(&d.bus, &d.map[0]) - st.voltage(&d.bus, &d.map[1]);
            let ib = self.bases.ib(&d.bus);
            let i = match (self.form, self.cval(Quantity::LoadCurrent { load: d.id.clone() }, x)) {
                (Form::Ivr, Some(i)) => i * ib,
                _ => safe_div(self.model_power(d, uxy, x), uxy).conj(),
            };
            st.load_currents.insert(d.id.clone(), i);
            st.load_powers.insert(d.id.clone(), uxy * i.conj());
        }
        for g in net.generators.values() {
            let uxy = st.voltage(&g.bus, &g.map[0]) - st.voltage(&g.bus, &g.map[1]);
            let sg = self.cval(Quantity::GenPower { generator: g.id.clone() }, x).unwrap_or_default() * s_base;
            let i = match self.cval(Quantity::GenCurrent { generator: g.id.clone() }, x) {
                Some(i) => i * self.bases.ib(&g.bus),
                None => safe_div(sg, uxy).conj(),
            };
            st.gen_currents.insert(g.id.clone(), i);
            st.gen_powers.insert(g.id.clone(), sg);
        }
        for s in net.shunts.values() {
            let u: Vec<Complex64> = s.map.iter().map(|t| st.voltage(&s.bus, t)).collect();
            let i = (0..u.len()).map(|k| (0..u.len()).map(|m| s.y[(k, m)] * u[m]).sum()).collect();
            st.shunts.insert(s.id.clone(), i);
        }
        st
    }

    /// Variable vector reproducing a physical state. Quantities the state
    /// does not determine keep their initial values.
    pub fn point_from_state(&self, st: &NetworkState) -> Vec<f64> {
        let groups = load_groups(&self.net);
        self.sys
            .variables
            .iter()
            .map(|v| {
                let Some(c) = self.quantity_value(&v.key.quantity, st, &groups) else { return v.init };
                match v.key.part {
                    Part::Re => c.re,
                    Part::Im => c.im,
                }
            })
            .collect()
    }

    /// Per-unit value of a quantity in a state.
    fn quantity_value(
        &self,
        q: &Quantity,
        st: &NetworkState,
        groups: &BTreeMap<String, Vec<String>>,
    ) -> Option<Complex64> {
        let net = &self.net;
        let b = &self.bases;
        let s = b.s_base;
        let u_pu = |bus: &str, t: &str| st.voltage(bus, t) / b.vb(bus);
        Some(match q {
            Quantity::Voltage { bus, terminal } => u_pu(bus, terminal),
            Quantity::SeriesCurrent { line, conductor } => {
                st.lines.get(line)?.series[*conductor] / b.ib(&net.lines[line].from_bus)
            }
            Quantity::LineCurrent { line, side, conductor } => {
                let c = st.lines.get(line)?;
                let l = &net.lines[line];
                match side {
                    Side::From => c.from[*conductor] / b.ib(&l.from_bus),
                    Side::To => c.to[*conductor] / b.ib(&l.to_bus),
                }
            }
            Quantity::TransformerCurrent { transformer, side, conductor } => {
                let c = st.transformers.get(transformer)?;
                let t = &net.transformers[transformer];
                match side {
                    Side::From => c[*conductor] / b.ib(&t.from_bus),
                    Side::To => c[2 + conductor] / b.ib(&t.to_bus),
                }
            }
            Quantity::LoadCurrent { load } => st.load_currents.get(load)? / b.ib(&net.loads[load].bus),
            Quantity::LoadPower { load } => st.load_powers.get(load)? / s,
            Quantity::VoltageMagSqr { load } => {
                let d = &net.loads[load];
                Complex64::new((u_pu(&d.bus, &d.map[0]) - u_pu(&d.bus, &d.map[1])).norm_sqr(), 0.0)
            }
            Quantity::GenCurrent { generator } => st.gen_currents.get(generator)? / b.ib(&net.generators[generator].bus),
            Quantity::GenPower { generator } => st.gen_powers.get(generator)? / s,
            Quantity::ShuntCurrent { shunt, conductor } => {
                st.shunts.get(shunt)?[*conductor] / b.ib(&net.shunts[shunt].bus)
            }
            Quantity::Flow { kind, id, side, conductor } => {
                let (bus, t, i) = self.drawn(*kind, id, *side, *conductor, st, groups)?;
                st.voltage(&bus, &t) * i.conj() / s
            }
            Quantity::Sequence { bus, seq } => {
                let bb = net.buses.get(bus)?;
                let un = if bb.has_terminal(NEUTRAL) { u_pu(bus, NEUTRAL) } else { Complex64::default() };
                let ph: Vec<Complex64> = bb.phase_labels().take(3).map(|p| u_pu(bus, p) - un).collect();
                if ph.len() < 3 {
                    return None;
                }
                let [z, p, n] = sequence_components(ph[0], ph[1], ph[2]);
                match seq {
                    Seq::Zero => z,
                    Seq::Pos => p,
                    Seq::Neg => n,
                }
            }
            Quantity::VoltageProduct { bus, factors } => factors.iter().map(|t| u_pu(bus, t)).product(),
        })
    }

    /// Terminal and drawn current (A) of a flow quantity.
    fn drawn(
        &self,
        kind: ComponentKind,
        id: &str,
        side: Side,
        k: usize,
        st: &NetworkState,
        groups: &BTreeMap<String, Vec<String>>,
    ) -> Option<(String, String, Complex64)> {
        let net = &self.net;
        Some(match kind {
            ComponentKind::Line => {
                let l = net.lines.get(id)?;
                let c = st.lines.get(id)?;
                match side {
                    Side::From => (l.from_bus.clone(), l.map_from[k].clone(), c.from[k]),
                    Side::To => (l.to_bus.clone(), l.map_to[k].clone(), c.to[k]),
                }
            }
            ComponentKind::Transformer => {
                let t = net.transformers.get(id)?;
                let c = st.transformers.get(id)?;
                match side {
                    Side::From => (t.from_bus.clone(), t.map_from[k].clone(), c[k]),
                    Side::To => (t.to_bus.clone(), t.map_to[k].clone(), c[2 + k]),
                }
            }
            ComponentKind::Load => match net.loads.get(id) {
                Some(d) => {
                    let i = *st.load_currents.get(id)?;
                    (d.bus.clone(), d.map[k].clone(), if k == 0 { i } else { -i })
                }
                None => {
                    let members = groups.get(id)?;
                    if k < members.len() {
                        let d = &net.loads[&members[k]];
                        (d.bus.clone(), d.map[0].clone(), *st.load_currents.get(&d.id)?)
                    } else {
                        let d = &net.loads[&members[0]];
                        let total: Complex64 = members.iter().filter_map(|m| st.load_currents.get(m)).sum();
                        (d.bus.clone(), d.map[1].clone(), -total)
                    }
                }
            },
            ComponentKind::Generator => {
                let g = net.generators.get(id)?;
                let i = *st.gen_currents.get(id)?;
                (g.bus.clone(), g.map[k].clone(), if k == 0 { -i } else { i })
            }
            ComponentKind::Shunt => {
                let sh = net.shunts.get(id)?;
                (sh.bus.clone(), sh.map[k].clone(), st.shunts.get(id)?[k])
            }
        })
    }

    /// Value of a variable key after mapping a state, for diagnostics.
    pub fn state_value(&self, key: &VarKey, st: &NetworkState) -> Option<f64> {
        let groups = load_groups(&self.net);
        let c = self.quantity_value(&key.quantity, st, &groups)?;
        Some(match key.part {
            Part::Re => c.re,
            Part::Im => c.im,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::form::{build, FormulationConfig};
    use crate::solve::{run_pf, SolverOptions, Start};

    #[test]
    fn ivr_state_round_trips() {
        let net = fixtures::f2();
        let (f, sol) = run_pf(&net, Form::Ivr, &FormulationConfig::power_flow(), &SolverOptions::default(), Start::NoLoad).unwrap();
        let x = f.point_from_state(&f.state_from_point(&sol.x));
        for (a, b) in x.iter().zip(&sol.x) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn physical_state_balances_currents() {
        let net = fixtures::f3();
        let (f, sol) = run_pf(&net, Form::Ivr, &FormulationConfig::power_flow(), &SolverOptions::default(), Start::NoLoad).unwrap();
        let st = f.state_from_point(&sol.x);
        for ((bus, t), i) in terminal_current_balance(&f.net, &st) {
            if bus != "src" {
                assert!(i.norm() < 1e-6, "{bus}.{t}: {i}");
            }
        }
        let acr = build(&net, Form::Acr, &FormulationConfig::power_flow()).unwrap();
        let xa = acr.point_from_state(&st);
        assert!(acr.sys.max_violation(&xa).unwrap() < 1e-8);
    }
}
