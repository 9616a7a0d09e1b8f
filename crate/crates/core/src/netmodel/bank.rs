use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Bus, IdealTransformer, Line, LineCode, NetworkError, Shunt, Terminal};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorGroup {
    Yy,
    Dy,
    Yd,
    Dd,
}

impl VectorGroup {
    fn primary_delta(self) -> bool {
        matches!(self, VectorGroup::Dy | VectorGroup::Dd)
    }

    fn secondary_delta(self) -> bool {
        matches!(self, VectorGroup::Yd | VectorGroup::Dd)
    }
}

impl FromStr for VectorGroup {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "yy" => Ok(VectorGroup::Yy),
            "dy" => Ok(VectorGroup::Dy),
            "yd" => Ok(VectorGroup::Yd),
            "dd" => Ok(VectorGroup::Dd),
            _ => Err(NetworkError::UnsupportedVectorGroup(s.to_string())),
        }
    }
}

/// Per-winding parameters of a three-phase bank built from single-phase units.
#[derive(Clone, Debug, PartialEq)]
pub struct BankParams {
    /// Winding voltage ratio, primary over secondary.
    pub turns_ratio: f64,
    /// Series impedance per winding in ohm, referred to the secondary.
    pub series_impedance: Complex64,
    /// Magnetizing admittance per winding in siemens, primary side.
    pub magnetizing_admittance: Option<Complex64>,
}

/// Components realizing a transformer bank, to be merged into a network.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Subnetwork {
    pub buses: Vec<Bus>,
    pub linecodes: Vec<LineCode>,
    pub lines: Vec<Line>,
    pub transformers: Vec<IdealTransformer>,
    pub shunts: Vec<Shunt>,
}

fn winding_pairs(delta: bool, map: &[String], id: &str, side: &str) -> Result<Vec<(String, String)>, NetworkError> {
    let need = if delta { 3 } else { 4 };
    if map.len() != need {
        return Err(NetworkError::Invalid {
            id: id.to_string(),
            msg: format!("{side} map needs {need} terminals, got {}", map.len()),
        });
    }
    Ok((0..3)
        .map(|k| {
            let other = if delta { map[(k + 1) % 3].clone() } else { map[3].clone() };
            (map[k].clone(), other)
        })
        .collect())
}

/// Compose a three-phase bank from three ideal single-phase transformers.
///
/// Wye ports take `[a, b, c, n]`, delta ports `[a, b, c]`. A nonzero series
/// impedance adds an internal two-terminal bus per phase and a two-conductor
/// line between it and the secondary.
pub fn assemble_transformer_bank(
    id: &str,
    group: VectorGroup,
    params: &BankParams,
    from_bus: &str,
    to_bus: &str,
    map_from: &[String],
    map_to: &[String],
) -> Result<Subnetwork, NetworkError> {
    if !(params.turns_ratio > 0.0) {
        return Err(NetworkError::Invalid { id: id.to_string(), msg: "turns ratio must be positive".into() });
    }
    let prim = winding_pairs(group.primary_delta(), map_from, id, "primary")?;
    let sec = winding_pairs(group.secondary_delta(), map_to, id, "secondary")?;
    let mut sub = Subnetwork::default();
    let lossy = params.series_impedance != Complex64::new(0.0, 0.0);
    if lossy {
        let z = params.series_impedance / 2.0;
        sub.linecodes.push(LineCode::new(
            &format!("{id}.winding"),
            DMatrix::from_diagonal_element(2, 2, z.re),
            DMatrix::from_diagonal_element(2, 2, z.im),
        ));
    }
    for (k, ((px, py), (sx, sy))) in prim.into_iter().zip(sec).enumerate() {
        let unit = format!("{id}.{}", k + 1);
        let (to, to_map) = if lossy {
            let inner = format!("{unit}.int");
            sub.buses.push(Bus {
                id: inner.clone(),
                terminals: vec![Terminal::new("x"), Terminal::new("y")],
                bounds: Default::default(),
            });
            sub.lines.push(Line {
                id: format!("{unit}.z"),
                from_bus: inner.clone(),
                to_bus: to_bus.to_string(),
                length: 1.0,
                linecode: format!("{id}.winding"),
                map_from: vec!["x".into(), "y".into()],
                map_to: vec![sx, sy],
            });
            (inner, vec!["x".to_string(), "y".to_string()])
        } else {
            (to_bus.to_string(), vec![sx, sy])
        };
        if let Some(y) = params.magnetizing_admittance {
            sub.shunts.push(Shunt {
                id: format!("{unit}.mag"),
                bus: from_bus.to_string(),
                y: DMatrix::from_row_slice(2, 2, &[y, -y, -y, y]),
                map: vec![px.clone(), py.clone()],
            });
        }
        sub.transformers.push(IdealTransformer {
            id: unit,
            from_bus: from_bus.to_string(),
            to_bus: to,
            turns_ratio: params.turns_ratio,
            map_from: vec![px, py],
            map_to: to_map,
        });
    }
    Ok(sub)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn params(z: Complex64) -> BankParams {
        BankParams { turns_ratio: 1.0, series_impedance: z, magnetizing_admittance: None }
    }

    #[test]
    fn lossless_yy_is_three_units() {
        let wye = labels(&["a", "b", "c", "n"]);
        let sub = assemble_transformer_bank("t", VectorGroup::Yy, &params(Complex64::default()), "p", "s", &wye, &wye)
            .unwrap();
        assert_eq!(sub.transformers.len(), 3);
        assert!(sub.lines.is_empty() && sub.buses.is_empty());
        assert!(sub.transformers.iter().all(|t| t.turns_ratio == 1.0));
    }

    #[test]
    fn dy_primary_is_phase_to_phase() {
        let sub = assemble_transformer_bank(
            "t",
            VectorGroup::Dy,
            &params(Complex64::default()),
            "p",
            "s",
            &labels(&["a", "b", "c"]),
            &labels(&["a", "b", "c", "n"]),
        )
        .unwrap();
        let prim: Vec<_> = sub.transformers.iter().map(|t| t.map_from.clone()).collect();
        assert_eq!(prim, vec![labels(&["a", "b"]), labels(&["b", "c"]), labels(&["c", "a"])]);
        assert!(sub.transformers.iter().all(|t| t.map_to[1] == "n"));
    }

    #[test]
    fn series_impedance_adds_lines() {
        let wye = labels(&["a", "b", "c", "n"]);
        let sub =
            assemble_transformer_bank("t", VectorGroup::Yy, &params(Complex64::new(0.1, 0.2)), "p", "s", &wye, &wye)
                .unwrap();
        assert_eq!(sub.lines.len(), 3);
        assert_eq!(sub.buses.len(), 3);
        assert_eq!(sub.linecodes[0].r[(0, 0)], 0.05);
    }

    #[test]
    fn rejects_unknown_group() {
        assert!("Yz".parse::<VectorGroup>().is_err());
    }
}
