use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{Connection, LoadModel, Network, PerElement};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    DuplicateTerminal,
    GroundingFlag,
    UnknownBus,
    UnknownLinecode,
    UnknownTerminal,
    MapNotInjective,
    MapSize,
    LinecodeShape,
    LinecodeAsymmetric,
    SingularImpedance,
    NonPositiveLength,
    TurnsRatio,
    ZipWeights,
    NominalVoltage,
    ElementCount,
    GeneratorBounds,
    ShuntShape,
    SourceCoverage,
    FloatingNetwork,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub component: String,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: [{}] {}", self.component, self.rule, self.message)
    }
}

struct Checker<'a> {
    net: &'a Network,
    out: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn push(&mut self, component: &str, rule: Rule, message: String) {
        self.out.push(Diagnostic { component: component.to_string(), rule, message });
    }

    fn check_map(&mut self, id: &str, bus: &str, map: &[String]) {
        let Some(b) = self.net.buses.get(bus) else {
            self.push(id, Rule::UnknownBus, format!("bus `{bus}` does not exist"));
            return;
        };
        let mut seen = BTreeSet::new();
        for t in map {
            if !b.has_terminal(t) {
                self.push(id, Rule::UnknownTerminal, format!("terminal `{t}` missing at bus `{bus}`"));
            }
            if !seen.insert(t) {
                self.push(id, Rule::MapNotInjective, format!("terminal `{t}` mapped twice at bus `{bus}`"));
            }
        }
    }

    fn check_per_element(&mut self, id: &str, name: &str, v: &PerElement, n: usize) {
        if !v.len_ok(n) {
            self.push(id, Rule::ElementCount, format!("{name} has wrong length for {n} element(s)"));
        }
    }

    fn buses(&mut self) {
        for b in self.net.buses.values() {
            let mut seen = BTreeSet::new();
            for t in &b.terminals {
                if !seen.insert(&t.label) {
                    self.push(&b.id, Rule::DuplicateTerminal, format!("terminal `{}` declared twice", t.label));
                }
                if t.grounding_impedance.is_some() && !t.grounded {
                    self.push(&b.id, Rule::GroundingFlag, format!("terminal `{}` has impedance but is not grounded", t.label));
                }
            }
        }
    }

    fn linecodes(&mut self) {
        for c in self.net.linecodes.values() {
            let n = c.n_conductors;
            let mats = [Some(&c.r), Some(&c.x), c.g_fr.as_ref(), c.b_fr.as_ref(), c.g_to.as_ref(), c.b_to.as_ref()];
            if mats.iter().flatten().any(|m| m.nrows() != n || m.ncols() != n) {
                self.push(&c.id, Rule::LinecodeShape, format!("matrices must be {n}x{n}"));
                continue;
            }
            let asym = |m: &nalgebra::DMatrix<f64>| (m - m.transpose()).amax() > 1e-9 * m.amax().max(1.0);
            if asym(&c.r) || asym(&c.x) {
                self.push(&c.id, Rule::LinecodeAsymmetric, "R and X must be symmetric".into());
            }
            if n > 0 && c.z().try_inverse().is_none() {
                self.push(&c.id, Rule::SingularImpedance, "series impedance is singular".into());
            }
        }
    }

    fn lines(&mut self) {
        for l in self.net.lines.values() {
            match self.net.linecodes.get(&l.linecode) {
                None => self.push(&l.id, Rule::UnknownLinecode, format!("linecode `{}` does not exist", l.linecode)),
                Some(c) => {
                    if l.map_from.len() != c.n_conductors || l.map_to.len() != c.n_conductors {
                        self.push(&l.id, Rule::MapSize, format!("maps must have {} conductors", c.n_conductors));
                    }
                }
            }
            if !(l.length > 0.0) {
                self.push(&l.id, Rule::NonPositiveLength, format!("length {} km", l.length));
            }
            self.check_map(&l.id, &l.from_bus, &l.map_from);
            self.check_map(&l.id, &l.to_bus, &l.map_to);
        }
    }

    fn transformers(&mut self) {
        for t in self.net.transformers.values() {
            if !(t.turns_ratio > 0.0) || !t.turns_ratio.is_finite() {
                self.push(&t.id, Rule::TurnsRatio, format!("turns ratio {} must be positive", t.turns_ratio));
            }
            if t.map_from.len() != 2 || t.map_to.len() != 2 {
                self.push(&t.id, Rule::MapSize, "each side needs exactly 2 conductors".into());
            }
            self.check_map(&t.id, &t.from_bus, &t.map_from);
            self.check_map(&t.id, &t.to_bus, &t.map_to);
        }
    }

    fn injections(&mut self) {
        for d in self.net.loads.values() {
            self.check_map(&d.id, &d.bus, &d.map);
            let n = d.n_elements();
            if n == 0 || (d.connection == Connection::Delta && d.map.len() > 3) {
                self.push(&d.id, Rule::MapSize, format!("{} terminals cannot host a {:?} load", d.map.len(), d.connection));
            }
            self.check_per_element(&d.id, "p_nom", &d.p_nom, n);
            self.check_per_element(&d.id, "q_nom", &d.q_nom, n);
            if d.model != LoadModel::Power && !(d.u_nom > 0.0) {
                self.push(&d.id, Rule::NominalVoltage, "u_nom must be positive for voltage-dependent loads".into());
            }
            match (d.model, d.zip_weights) {
                (LoadModel::Zip, Some(w)) => {
                    if w.iter().any(|v| *v < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                        self.push(&d.id, Rule::ZipWeights, format!("weights {w:?} must be nonnegative and sum to 1"));
                    }
                }
                (LoadModel::Zip, None) => self.push(&d.id, Rule::ZipWeights, "ZIP load without weights".into()),
                _ => {}
            }
        }
        for g in self.net.generators.values() {
            self.check_map(&g.id, &g.bus, &g.map);
            let n = g.n_elements();
            if n == 0 || (g.connection == Connection::Delta && g.map.len() > 3) {
                self.push(&g.id, Rule::MapSize, format!("{} terminals cannot host a {:?} generator", g.map.len(), g.connection));
            }
            for (name, v) in [("p_min", &g.p_min), ("p_max", &g.p_max), ("q_min", &g.q_min), ("q_max", &g.q_max)] {
                self.check_per_element(&g.id, name, v, n);
            }
            for k in 0..n.max(1) {
                if g.p_min.get(k) > g.p_max.get(k) || g.q_min.get(k) > g.q_max.get(k) {
                    self.push(&g.id, Rule::GeneratorBounds, format!("element {}: min above max", k + 1));
                }
                if g.s_max.as_ref().is_some_and(|s| s.get(k) < 0.0) {
                    self.push(&g.id, Rule::GeneratorBounds, format!("element {}: negative s_max", k + 1));
                }
            }
        }
        for s in self.net.shunts.values() {
            self.check_map(&s.id, &s.bus, &s.map);
            if s.y.nrows() != s.map.len() || s.y.ncols() != s.map.len() {
                self.push(&s.id, Rule::ShuntShape, format!("admittance must be {0}x{0}", s.map.len()));
            }
        }
        for s in self.net.sources.values() {
            let Some(b) = self.net.buses.get(&s.bus) else {
                self.push(&s.id, Rule::UnknownBus, format!("bus `{}` does not exist", s.bus));
                continue;
            };
            for t in &b.terminals {
                if !s.phasors.contains_key(&t.label) {
                    self.push(&s.id, Rule::SourceCoverage, format!("no phasor for terminal `{}`", t.label));
                }
            }
            for label in s.phasors.keys() {
                if !b.has_terminal(label) {
                    self.push(&s.id, Rule::UnknownTerminal, format!("terminal `{label}` missing at bus `{}`", s.bus));
                }
            }
        }
    }

    fn connectivity(&mut self) {
        let nodes: Vec<(String, String)> = self
            .net
            .connected_terminals()
            .into_iter()
            .filter(|(b, t)| self.net.terminal(b, t).is_some())
            .collect();
        let index: BTreeMap<&(String, String), usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let mut parent: Vec<usize> = (0..nodes.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut join = |bus_a: &str, a: &str, bus_b: &str, b: &str| {
            let (Some(&i), Some(&j)) =
                (index.get(&(bus_a.to_string(), a.to_string())), index.get(&(bus_b.to_string(), b.to_string())))
            else {
                return;
            };
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            parent[ri] = rj;
        };
        let net = self.net;
        for l in net.lines.values() {
            for (a, b) in l.map_from.iter().zip(&l.map_to) {
                join(&l.from_bus, a, &l.to_bus, b);
            }
        }
        let mut join_all = |bus: &str, map: &[String]| {
            for w in map.windows(2) {
                join(bus, &w[0], bus, &w[1]);
            }
        };
        for t in net.transformers.values() {
            join_all(&t.from_bus, &t.map_from);
            join_all(&t.to_bus, &t.map_to);
        }
        for d in net.loads.values() {
            join_all(&d.bus, &d.map);
        }
        for g in net.generators.values() {
            join_all(&g.bus, &g.map);
        }
        let mut anchored = vec![false; nodes.len()];
        let mut anchor = |bus: &str, t: &str, parent: &mut [usize]| {
            if let Some(&i) = index.get(&(bus.to_string(), t.to_string())) {
                let r = find(parent, i);
                anchored[r] = true;
            }
        };
        for (b, t) in &nodes {
            if net.is_perfectly_grounded(b, t) || net.source_phasor(b, t).is_some() {
                anchor(b, t, &mut parent);
            }
        }
        for s in net.shunts.values() {
            for t in &s.map {
                anchor(&s.bus, t, &mut parent);
            }
        }
        for l in net.lines.values() {
            if net.linecodes.get(&l.linecode).is_some_and(|c| c.has_shunt()) {
                for t in &l.map_from {
                    anchor(&l.from_bus, t, &mut parent);
                }
            }
        }
        let mut reported = BTreeSet::new();
        for (i, (b, t)) in nodes.iter().enumerate() {
            let r = find(&mut parent, i);
            if !anchored[r] && reported.insert(r) {
                self.push(
                    b,
                    Rule::FloatingNetwork,
                    format!("terminal `{t}` belongs to an island with no ground reference or source"),
                );
            }
        }
    }
}

/// Check type invariants and connectivity. An empty list means valid.
pub fn validate_network(net: &Network) -> Vec<Diagnostic> {
    let mut c = Checker { net, out: Vec::new() };
    c.buses();
    c.linecodes();
    c.lines();
    c.transformers();
    c.injections();
    if c.out.is_empty() {
        c.connectivity();
    }
    c.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn rules(net: &Network) -> Vec<Rule> {
        validate_network(net).into_iter().map(|d| d.rule).collect()
    }

    #[test]
    fn fixtures_are_valid() {
        for name in fixtures::NAMES {
            assert!(rules(&fixtures::by_name(name).unwrap()).is_empty(), "{name}");
        }
    }

    #[test]
    fn reports_every_broken_line_rule() {
        let mut net = fixtures::f2();
        let l = net.lines.get_mut("l1").unwrap();
        l.length = 0.0;
        l.map_to[3] = "x".into();
        net.lines.get_mut("l2").unwrap().linecode = "missing".into();
        let r = rules(&net);
        assert!(r.contains(&Rule::NonPositiveLength));
        assert!(r.contains(&Rule::UnknownTerminal));
        assert!(r.contains(&Rule::UnknownLinecode));
    }

    #[test]
    fn injective_maps() {
        let mut net = fixtures::f1();
        let d = net.loads.get_mut("d1").unwrap();
        d.map[1] = d.map[0].clone();
        assert!(rules(&net).contains(&Rule::MapNotInjective));
    }

    #[test]
    fn detached_bus_is_floating() {
        let mut net = fixtures::f1();
        net.add_bus(crate::netmodel::Bus::new("island", &["a", "n"]));
        let mut d = net.loads["d1"].clone();
        d.id = "d2".into();
        d.bus = "island".into();
        d.map = vec!["a".into(), "n".into()];
        d.p_nom = 100.0.into();
        d.q_nom = 0.0.into();
        net.add_load(d);
        let d = validate_network(&net);
        assert!(d.iter().any(|d| d.rule == Rule::FloatingNetwork && d.component == "island"));
        assert!(d[0].to_string().starts_with("island: [floating-network]"));
    }
}
