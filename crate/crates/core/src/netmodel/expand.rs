use std::collections::BTreeMap;

use super::{element_pairs, Connection, Generator, Load, LoadModel, Network, NetworkError, PerElement};

fn check_connection(id: &str, connection: Connection, map: &[String]) -> Result<(), NetworkError> {
    match (connection, map.len()) {
        (_, 0 | 1) => Err(NetworkError::UnsupportedConnection {
            id: id.to_string(),
            msg: format!("{} terminal(s) cannot host an element", map.len()),
        }),
        (Connection::Delta, m) if m > 3 => Err(NetworkError::UnsupportedConnection {
            id: id.to_string(),
            msg: format!("delta over {m} terminals"),
        }),
        _ => Ok(()),
    }
}

fn split_zip(load: &Load) -> Vec<Load> {
    let w = load.zip_weights.unwrap_or([0.0, 0.0, 1.0]);
    [(LoadModel::Impedance, "z"), (LoadModel::Current, "i"), (LoadModel::Power, "p")]
        .into_iter()
        .zip(w)
        .filter(|(_, w)| *w != 0.0)
        .map(|((model, tag), w)| Load {
            id: format!("{}.{tag}", load.id),
            model,
            p_nom: load.p_nom.map(|p| p * w),
            q_nom: load.q_nom.map(|q| q * w),
            zip_weights: None,
            parent: Some(load.id.clone()),
            ..load.clone()
        })
        .collect()
}

fn split_load(load: Load) -> Vec<Load> {
    if load.map.len() == 2 {
        return vec![load];
    }
    element_pairs(load.connection, &load.map)
        .into_iter()
        .enumerate()
        .map(|(k, (x, y))| Load {
            id: format!("{}.{}", load.id, k + 1),
            p_nom: PerElement::Uniform(load.p_nom.get(k)),
            q_nom: PerElement::Uniform(load.q_nom.get(k)),
            map: vec![x, y],
            parent: Some(load.parent.clone().unwrap_or_else(|| load.id.clone())),
            ..load.clone()
        })
        .collect()
}

fn split_generator(g: Generator) -> Vec<Generator> {
    if g.map.len() == 2 {
        return vec![g];
    }
    let one = |v: &PerElement, k: usize| PerElement::Uniform(v.get(k));
    element_pairs(g.connection, &g.map)
        .into_iter()
        .enumerate()
        .map(|(k, (x, y))| Generator {
            id: format!("{}.{}", g.id, k + 1),
            p_min: one(&g.p_min, k),
            p_max: one(&g.p_max, k),
            q_min: one(&g.q_min, k),
            q_max: one(&g.q_max, k),
            s_max: g.s_max.as_ref().map(|s| one(s, k)),
            map: vec![x, y],
            parent: Some(g.id.clone()),
            ..g.clone()
        })
        .collect()
}

/// Replace multi-phase and ZIP loads and generators by single-phase elements.
///
/// Element ids are `{id}.{k}` (1-based, element order) and ZIP parts
/// `{id}.z`, `{id}.i`, `{id}.p`; `parent` records the composite id.
pub fn expand_composites(net: &Network) -> Result<Network, NetworkError> {
    let mut out = net.clone();
    out.loads.clear();
    out.generators.clear();
    for load in net.loads.values() {
        check_connection(&load.id, load.connection, &load.map)?;
        let parts = if load.model == LoadModel::Zip { split_zip(load) } else { vec![load.clone()] };
        for part in parts {
            for e in split_load(part) {
                out.add_load(e);
            }
        }
    }
    for g in net.generators.values() {
        check_connection(&g.id, g.connection, &g.map)?;
        for e in split_generator(g.clone()) {
            out.add_generator(e);
        }
    }
    Ok(out)
}

/// Conductor-terminal maps of the composites an expanded network came from,
/// rebuilt from the element maps. Keys are composite ids.
pub fn composite_map(expanded: &Network) -> BTreeMap<String, Vec<String>> {
    let mut groups: BTreeMap<String, (Connection, Vec<(usize, (String, String))>)> = BTreeMap::new();
    let elements = expanded
        .loads
        .values()
        .map(|d| (&d.id, &d.parent, d.connection, &d.map))
        .chain(expanded.generators.values().map(|g| (&g.id, &g.parent, g.connection, &g.map)));
    for (id, parent, conn, map) in elements {
        if let Some(p) = parent {
            let k = id.rsplit('.').next().and_then(|s| s.parse().ok()).unwrap_or(0);
            let e = groups.entry(p.clone()).or_insert((conn, vec![]));
            e.1.push((k, (map[0].clone(), map[1].clone())));
        }
    }
    let mut out = BTreeMap::new();
    for (id, (conn, mut pairs)) in groups {
        pairs.sort_by_key(|p| p.0);
        let mut unique: Vec<(String, String)> = Vec::new();
        for (_, p) in pairs {
            if !unique.contains(&p) {
                unique.push(p);
            }
        }
        let map = match (conn, unique.len()) {
            (_, 1) => vec![unique[0].0.clone(), unique[0].1.clone()],
            (Connection::Wye, _) => {
                let mut m: Vec<String> = unique.iter().map(|p| p.0.clone()).collect();
                m.push(unique[0].1.clone());
                m
            }
            (Connection::Delta, _) => unique.iter().map(|p| p.0.clone()).collect(),
        };
        out.insert(id, map);
    }
    out
}
