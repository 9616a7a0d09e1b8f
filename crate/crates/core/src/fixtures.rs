//! Small bundled networks used by the tests, the acceptance suite and the
//! `fixture` CLI command.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::netmodel::{Bus, Connection, Generator, Line, LineCode, Load, LoadModel, Network, Terminal, VoltageSource, NEUTRAL};

/// Phase-to-neutral nominal voltage of every fixture.
pub const V_NOMINAL: f64 = 230.0;

pub const NAMES: &[&str] = &["f1", "f1-opf", "f2", "f2-opf", "f3", "f3-grounded", "kron-eq", "chain", "synthetic30"];

pub fn by_name(name: &str) -> Option<Network> {
    Some(match name {
        "f1" => f1(),
        "f1-opf" => f1_opf(),
        "f2" => f2(),
        "f2-opf" => f2_opf(),
        "f3" => f3(),
        "f3-grounded" => f3_grounded(),
        "kron-eq" => kron_equivalence(),
        "chain" => chain(6),
        "synthetic30" => synthetic_feeder(30, 7),
        _ => return None,
    })
}

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

const ABCN: [&str; 4] = ["a", "b", "c", "n"];

/// Four-wire underground cable, ohm/km.
pub fn cable() -> LineCode {
    let r = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.25 } else { 0.05 });
    let x = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.30 } else { 0.25 });
    LineCode::new("cable4", r, x)
}

/// Lighter four-wire service cable with a smaller neutral.
pub fn service_cable() -> LineCode {
    let r = DMatrix::from_fn(4, 4, |i, j| match (i, j) {
        (3, 3) => 0.6,
        _ if i == j => 0.4,
        _ => 0.06,
    });
    let x = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.32 } else { 0.26 });
    LineCode::new("service4", r, x)
}

pub fn balanced_phasors(v: f64) -> BTreeMap<String, Complex64> {
    let deg = std::f64::consts::PI / 180.0;
    BTreeMap::from([
        ("a".to_string(), Complex64::from_polar(v, 0.0)),
        ("b".to_string(), Complex64::from_polar(v, -120.0 * deg)),
        ("c".to_string(), Complex64::from_polar(v, 120.0 * deg)),
        (NEUTRAL.to_string(), Complex64::default()),
    ])
}

fn source_bus(net: &mut Network, id: &str) {
    net.add_bus(Bus {
        id: id.to_string(),
        terminals: vec![Terminal::new("a"), Terminal::new("b"), Terminal::new("c"), Terminal::grounded(NEUTRAL)],
        bounds: Default::default(),
    });
    net.add_source(VoltageSource {
        id: "grid".into(),
        bus: id.to_string(),
        phasors: balanced_phasors(V_NOMINAL),
        cost: 1.0,
    });
}

fn line(net: &mut Network, id: &str, from: &str, to: &str, length: f64, code: &str) {
    net.add_line(Line {
        id: id.into(),
        from_bus: from.into(),
        to_bus: to.into(),
        length,
        linecode: code.into(),
        map_from: s(&ABCN),
        map_to: s(&ABCN),
    });
}

/// Constant-power wye load over `a, b, c, n` with per-phase P and Q.
pub fn wye_load(id: &str, bus: &str, p: [f64; 3], q: [f64; 3]) -> Load {
    Load {
        id: id.into(),
        bus: bus.into(),
        connection: Connection::Wye,
        model: LoadModel::Power,
        p_nom: p.to_vec().into(),
        q_nom: q.to_vec().into(),
        u_nom: V_NOMINAL,
        zip_weights: None,
        map: s(&ABCN),
        profile: None,
        parent: None,
    }
}

/// Single-phase generator between `phase` and the neutral, unit power
/// factor, output in `[0, p_max]`.
pub fn single_phase_dg(id: &str, bus: &str, phase: &str, p_max: f64, cost: f64) -> Generator {
    Generator {
        id: id.into(),
        bus: bus.into(),
        connection: Connection::Wye,
        p_min: 0.0.into(),
        p_max: p_max.into(),
        q_min: 0.0.into(),
        q_max: 0.0.into(),
        s_max: None,
        cost,
        map: s(&[phase, NEUTRAL]),
        aggregates: vec![],
        parent: None,
    }
}

/// Source bus, one 4-wire line, one unbalanced wye load with a floating
/// neutral.
pub fn f1() -> Network {
    let mut net = Network::new();
    source_bus(&mut net, "src");
    net.add_bus(Bus::new("b1", &ABCN));
    net.add_linecode(cable());
    line(&mut net, "l1", "src", "b1", 0.2, "cable4");
    net.add_load(wye_load("d1", "b1", [4000.0, 3000.0, 5000.0], [1000.0, 500.0, 1500.0]));
    net
}

/// F1 with a cheap single-phase DG on phase a of the load bus and a 1.1 pu
/// phase-to-neutral upper bound there.
pub fn f1_opf() -> Network {
    let mut net = f1();
    net.add_generator(single_phase_dg("dg1", "b1", "a", 100_000.0, 0.1));
    net.buses.get_mut("b1").unwrap().bounds.vpn_max = Some(1.1 * V_NOMINAL);
    net
}

/// Unbalanced five-bus feeder: a trunk `src - b1 - b2 - b3` and a lateral
/// `b2 - b4`, loads with floating neutrals on every downstream bus.
pub fn f2() -> Network {
    let mut net = Network::new();
    source_bus(&mut net, "src");
    for b in ["b1", "b2", "b3", "b4"] {
        net.add_bus(Bus::new(b, &ABCN));
    }
    net.add_linecode(cable());
    net.add_linecode(service_cable());
    line(&mut net, "l1", "src", "b1", 0.15, "cable4");
    line(&mut net, "l2", "b1", "b2", 0.10, "cable4");
    line(&mut net, "l3", "b2", "b3", 0.12, "service4");
    line(&mut net, "l4", "b2", "b4", 0.08, "service4");
    net.add_load(wye_load("d1", "b1", [3000.0, 1000.0, 2000.0], [600.0, 200.0, 400.0]));
    net.add_load(wye_load("d2", "b2", [1500.0, 2500.0, 500.0], [300.0, 500.0, 100.0]));
    net.add_load(wye_load("d3", "b3", [4000.0, 500.0, 1000.0], [800.0, 100.0, 200.0]));
    net.add_load(wye_load("d4", "b4", [500.0, 3500.0, 1500.0], [100.0, 700.0, 300.0]));
    net
}

/// F2 with single-phase DGs at the feeder ends and 1.1 pu phase-to-neutral
/// bounds on every load bus.
pub fn f2_opf() -> Network {
    let mut net = f2();
    net.add_generator(single_phase_dg("dg3", "b3", "a", 60_000.0, 0.1));
    net.add_generator(single_phase_dg("dg4", "b4", "b", 60_000.0, 0.1));
    for b in ["b1", "b2", "b3", "b4"] {
        net.buses.get_mut(b).unwrap().bounds.vpn_max = Some(1.1 * V_NOMINAL);
    }
    net
}

/// Three-bus feeder whose intermediate bus `m` has an ungrounded neutral,
/// with unbalanced loads at `m` and at the end bus `e`.
pub fn f3() -> Network {
    let mut net = Network::new();
    source_bus(&mut net, "src");
    net.add_bus(Bus::new("m", &ABCN));
    net.add_bus(Bus::new("e", &ABCN));
    net.add_linecode(cable());
    line(&mut net, "l1", "src", "m", 0.2, "cable4");
    line(&mut net, "l2", "m", "e", 0.15, "cable4");
    net.add_load(wye_load("dm", "m", [5000.0, 1000.0, 2000.0], [1000.0, 200.0, 400.0]));
    net.add_load(wye_load("de", "e", [1000.0, 4000.0, 500.0], [200.0, 800.0, 100.0]));
    net
}

/// F3 with the intermediate neutral perfectly grounded.
pub fn f3_grounded() -> Network {
    let mut net = f3();
    ground_neutral(&mut net, "m");
    net
}

pub fn ground_neutral(net: &mut Network, bus: &str) {
    if let Some(t) = net.buses.get_mut(bus).and_then(|b| b.terminal_mut(NEUTRAL)) {
        t.grounded = true;
        t.grounding_impedance = None;
    }
}

/// Every neutral terminal perfectly grounded.
pub fn ground_all_neutrals(mut net: Network) -> Network {
    let ids: Vec<String> = net.buses.keys().cloned().collect();
    for b in ids {
        ground_neutral(&mut net, &b);
    }
    net
}

/// F2 with every neutral perfectly grounded.
pub fn kron_equivalence() -> Network {
    ground_all_neutrals(f2())
}

/// Lines-only chain of `n` buses (the source bus included), 4-wire lines,
/// floating neutrals.
pub fn chain(n: usize) -> Network {
    let mut net = Network::new();
    source_bus(&mut net, "b0");
    net.add_linecode(cable());
    for k in 1..n {
        net.add_bus(Bus::new(&format!("b{k}"), &ABCN));
        line(&mut net, &format!("l{k}"), &format!("b{}", k - 1), &format!("b{k}"), 0.05, "cable4");
    }
    net
}

/// Random radial 4-wire feeder with `n` buses, seeded. Loads sit on about
/// two thirds of the buses; a quarter of the load buses ground their
/// neutral.
pub fn synthetic_feeder(n: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new();
    source_bus(&mut net, "b0");
    net.add_linecode(cable());
    net.add_linecode(service_cable());
    for k in 1..n {
        let id = format!("b{k}");
        net.add_bus(Bus::new(&id, &ABCN));
        let parent = if k == 1 { 0 } else { rng.random_range(k.saturating_sub(4).max(1)..k) };
        let code = if rng.random_bool(0.7) { "cable4" } else { "service4" };
        let length = rng.random_range(0.02..0.08);
        line(&mut net, &format!("l{k}"), &format!("b{parent}"), &id, length, code);
        if rng.random_bool(0.67) {
            let mut p = [0.0; 3];
            let mut q = [0.0; 3];
            for ph in 0..3 {
                if rng.random_bool(0.8) {
                    p[ph] = rng.random_range(200.0..2500.0);
                    q[ph] = p[ph] * rng.random_range(0.1..0.4);
                }
            }
            if p.iter().all(|v| *v == 0.0) {
                p[0] = 500.0;
            }
            net.add_load(wye_load(&format!("d{k}"), &id, p, q));
            if rng.random_bool(0.25) {
                ground_neutral(&mut net, &id);
            }
        }
    }
    net
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::validate_network;

    #[test]
    fn every_fixture_validates() {
        for name in NAMES {
            let net = by_name(name).unwrap();
            assert!(validate_network(&net).is_empty(), "{name}: {:?}", validate_network(&net));
        }
    }

    #[test]
    fn synthetic_feeder_is_deterministic() {
        assert_eq!(synthetic_feeder(30, 7), synthetic_feeder(30, 7));
        assert_eq!(synthetic_feeder(30, 7).buses.len(), 30);
    }
}
