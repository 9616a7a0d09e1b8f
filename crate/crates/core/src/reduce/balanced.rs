use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::netmodel::{
    element_pairs, Bus, BusBounds, Connection, Generator, LineCode, Load, LoadModel, Network, PerElement, Shunt,
    Terminal, VoltageSource, NEUTRAL,
};

use super::kron::schur_eliminate;
use super::sequence::{sequence_components, sequence_matrix};
use super::ReduceError;

const PHASE: &str = "a";

fn positive_sequence(m: &DMatrix<Complex64>) -> Complex64 {
    match m.nrows() {
        3 => sequence_matrix(m)[(1, 1)],
        1 => m[(0, 0)],
        // Two-wire phase lines: impedance of the single remaining conductor.
        _ => m[(0, 0)],
    }
}

fn reduce_neutral(m: DMatrix<Complex64>, neutral: Option<usize>) -> Option<DMatrix<Complex64>> {
    match neutral {
        Some(k) => schur_eliminate(&m, k),
        None => Some(m),
    }
}

fn drop_neutral(m: DMatrix<f64>, neutral: Option<usize>) -> DMatrix<f64> {
    match neutral {
        Some(k) => m.remove_row(k).remove_column(k),
        None => m,
    }
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn balanced_linecode(code: &LineCode, neutral: Option<usize>, id: String) -> Result<LineCode, ReduceError> {
    let z = reduce_neutral(code.z(), neutral).ok_or_else(|| ReduceError::SingularBlock { linecode: code.id.clone() })?;
    let zp = positive_sequence(&z);
    let shunt = |g: &Option<DMatrix<f64>>, b: &Option<DMatrix<f64>>| -> (Option<DMatrix<f64>>, Option<DMatrix<f64>>) {
        if g.is_none() && b.is_none() {
            return (None, None);
        }
        let n = code.n_conductors;
        let zero = DMatrix::zeros(n, n);
        let y = crate::netmodel::complex_matrix(
            &drop_neutral(g.clone().unwrap_or(zero.clone()), neutral),
            &drop_neutral(b.clone().unwrap_or(zero), neutral),
        );
        let yp = positive_sequence(&y);
        (Some(scalar(yp.re)), Some(scalar(yp.im)))
    };
    let (g_fr, b_fr) = shunt(&code.g_fr, &code.b_fr);
    let (g_to, b_to) = shunt(&code.g_to, &code.b_to);
    let i_max = code.i_max.as_ref().map(|v| {
        let phases = v.iter().enumerate().filter(|(i, _)| Some(*i) != neutral).map(|(_, x)| *x);
        vec![phases.fold(f64::INFINITY, f64::min)]
    });
    Ok(LineCode {
        id,
        n_conductors: 1,
        r: scalar(zp.re),
        x: scalar(zp.im),
        g_fr,
        b_fr,
        g_to,
        b_to,
        i_max,
    })
}

fn is_phase_to_phase(net: &Network, bus: &str, x: &str, y: &str) -> bool {
    let live = |t: &str| t != NEUTRAL && !net.is_perfectly_grounded(bus, t);
    live(x) && live(y)
}

fn model_tag(m: LoadModel) -> &'static str {
    match m {
        LoadModel::Power => "power",
        LoadModel::Impedance => "impedance",
        LoadModel::Current => "current",
        LoadModel::Zip => "zip",
    }
}

/// Positive-sequence single-phase equivalent. Lines become one conductor
/// with impedance z+ (after eliminating the neutral), loads and generators
/// are aggregated per bus, and the source keeps its positive-sequence
/// phasor. Stored powers are three-phase totals; `phase_multiplicity = 3`.
pub fn balanced_equivalent(net: &Network) -> Result<Network, ReduceError> {
    if let Some(t) = net.transformers.keys().next() {
        return Err(ReduceError::Unbalanceable(format!("transformer `{t}` has no single-phase equivalent here")));
    }
    let mut out = Network::new();
    out.phase_multiplicity = 3.0;
    let mut v_ref: f64 = 0.0;
    for s in net.sources.values() {
        let u = |t: &str| s.phasors.get(t).copied().unwrap_or_default();
        let un = u(NEUTRAL);
        let phases: Vec<&str> = net.buses[&s.bus].phase_labels().collect();
        if phases.len() < 3 {
            return Err(ReduceError::Unbalanceable(format!("source `{}` is not three-phase", s.id)));
        }
        let [_, p, _] = sequence_components(u(phases[0]) - un, u(phases[1]) - un, u(phases[2]) - un);
        v_ref = v_ref.max(p.norm());
        out.add_source(VoltageSource {
            id: s.id.clone(),
            bus: s.bus.clone(),
            phasors: BTreeMap::from([(PHASE.to_string(), p), (NEUTRAL.to_string(), Complex64::default())]),
            cost: s.cost,
        });
    }
    let sqrt3 = 3f64.sqrt();
    for b in net.buses.values() {
        let o = &b.bounds;
        let tighter = |a: Option<f64>, b: Option<f64>, max: bool| match (a, b) {
            (Some(x), Some(y)) => Some(if max { x.min(y) } else { x.max(y) }),
            (x, y) => x.or(y),
        };
        out.add_bus(Bus {
            id: b.id.clone(),
            terminals: vec![Terminal::new(PHASE), Terminal::grounded(NEUTRAL)],
            bounds: BusBounds {
                vpn_min: tighter(o.vpn_min, o.vpp_min.map(|v| v / sqrt3), false),
                vpn_max: tighter(o.vpn_max, o.vpp_max.map(|v| v / sqrt3), true),
                ..Default::default()
            },
        });
    }
    for l in net.lines.values() {
        let code = net.linecode_of(l)?;
        let neutral = l.map_from.iter().position(|t| t == NEUTRAL);
        let id = format!("{}.bal", code.id);
        if !out.linecodes.contains_key(&id) {
            out.add_linecode(balanced_linecode(code, neutral, id.clone())?);
        }
        out.add_line(crate::netmodel::Line {
            linecode: id,
            map_from: vec![PHASE.into()],
            map_to: vec![PHASE.into()],
            ..l.clone()
        });
    }
    // Loads: totals per bus and model, referred to v_ref.
    let mut loads: BTreeMap<(String, LoadModel), (f64, f64)> = BTreeMap::new();
    for d in net.loads.values() {
        let pairs = element_pairs(d.connection, &d.map);
        let parts: Vec<(LoadModel, f64)> = match (d.model, d.zip_weights) {
            (LoadModel::Zip, Some(w)) => vec![(LoadModel::Impedance, w[0]), (LoadModel::Current, w[1]), (LoadModel::Power, w[2])],
            (m, _) => vec![(m, 1.0)],
        };
        for (k, (x, y)) in pairs.iter().enumerate() {
            let u_el = if is_phase_to_phase(net, &d.bus, x, y) { d.u_nom / sqrt3 } else { d.u_nom };
            for &(model, w) in &parts {
                if w == 0.0 {
                    continue;
                }
                let scale = match model {
                    LoadModel::Impedance => (v_ref / u_el).powi(2),
                    LoadModel::Current => v_ref / u_el,
                    _ => 1.0,
                };
                let e = loads.entry((d.bus.clone(), model)).or_default();
                e.0 += w * d.p_nom.get(k) * scale;
                e.1 += w * d.q_nom.get(k) * scale;
            }
        }
    }
    for ((bus, model), (p, q)) in loads {
        let id = format!("bal:{bus}:{}", model_tag(model));
        out.add_load(Load {
            id,
            bus,
            connection: Connection::Wye,
            model,
            p_nom: PerElement::Uniform(p),
            q_nom: PerElement::Uniform(q),
            u_nom: v_ref,
            zip_weights: None,
            map: vec![PHASE.into(), NEUTRAL.into()],
            profile: None,
            parent: None,
        });
    }
    let mut gens: BTreeMap<String, Vec<&Generator>> = BTreeMap::new();
    for g in net.generators.values() {
        gens.entry(g.bus.clone()).or_default().push(g);
    }
    for (bus, list) in gens {
        let total = |f: &dyn Fn(&Generator) -> &PerElement| -> f64 {
            list.iter().map(|g| f(g).values(g.n_elements().max(1)).iter().sum::<f64>()).sum()
        };
        let s_max = if list.iter().all(|g| g.s_max.is_some()) {
            Some(PerElement::Uniform(total(&|g| g.s_max.as_ref().unwrap())))
        } else {
            None
        };
        let cost = list.iter().map(|g| g.cost).fold(f64::INFINITY, f64::min);
        if list.iter().any(|g| g.cost != cost) {
            log::warn!("bus {bus}: generators with different costs aggregated at the lowest cost");
        }
        let mut aggregates: Vec<String> =
            list.iter().map(|g| g.parent.clone().unwrap_or_else(|| g.id.clone())).collect();
        aggregates.dedup();
        out.add_generator(Generator {
            id: format!("bal:{bus}"),
            bus: bus.clone(),
            connection: Connection::Wye,
            p_min: PerElement::Uniform(total(&|g| &g.p_min)),
            p_max: PerElement::Uniform(total(&|g| &g.p_max)),
            q_min: PerElement::Uniform(total(&|g| &g.q_min)),
            q_max: PerElement::Uniform(total(&|g| &g.q_max)),
            s_max,
            cost,
            map: vec![PHASE.into(), NEUTRAL.into()],
            aggregates,
            parent: None,
        });
    }
    for s in net.shunts.values() {
        let phases: Vec<usize> = (0..s.map.len()).filter(|&i| s.map[i] != NEUTRAL).collect();
        if phases.len() != 3 {
            log::warn!("shunt {} dropped from the balanced equivalent", s.id);
            continue;
        }
        let y = DMatrix::from_fn(3, 3, |i, j| s.y[(phases[i], phases[j])]);
        out.add_shunt(Shunt {
            id: s.id.clone(),
            bus: s.bus.clone(),
            y: DMatrix::from_element(1, 1, positive_sequence(&y)),
            map: vec![PHASE.into()],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn one_phase_per_bus() {
        let bal = balanced_equivalent(&fixtures::f2_opf()).unwrap();
        assert_eq!(bal.phase_multiplicity, 3.0);
        for b in bal.buses.values() {
            assert_eq!(b.terminals.len(), 2, "{}", b.id);
        }
        for c in bal.linecodes.values() {
            assert_eq!(c.n_conductors, 1);
        }
        assert!(crate::netmodel::validate_network(&bal).is_empty());
    }

    #[test]
    fn balanced_load_keeps_three_phase_total() {
        let net = fixtures::f1();
        let total: f64 = net.loads.values().map(|d| (0..d.n_elements()).map(|k| d.p_nom.get(k)).sum::<f64>()).sum();
        let bal = balanced_equivalent(&net).unwrap();
        let kept: f64 = bal.loads.values().map(|d| d.p_nom.get(0)).sum();
        assert!((kept - total).abs() < 1e-9 * total);
    }

    #[test]
    fn transformers_are_rejected() {
        let mut net = fixtures::f1();
        net.transformers.insert(
            "t".into(),
            crate::netmodel::IdealTransformer {
                id: "t".into(),
                from_bus: "src".into(),
                to_bus: "b1".into(),
                turns_ratio: 1.0,
                map_from: vec!["a".into(), "n".into()],
                map_to: vec!["a".into(), "n".into()],
            },
        );
        assert!(matches!(balanced_equivalent(&net), Err(ReduceError::Unbalanceable(_))));
    }
}
