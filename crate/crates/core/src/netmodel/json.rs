//! JSON network format.
//!
//! Top level keys: `buses`, `linecodes`, `lines`, `transformers`, `loads`,
//! `generators`, `shunts`, `sources`, each an array of objects. Complex
//! numbers are `[re, im]`, matrices are arrays of rows.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    assemble_transformer_bank, BankParams, Bus, Generator, IdealTransformer, Line, LineCode, Load,
    Network, NetworkError, Shunt, VectorGroup, VoltageSource,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TransformerSpec {
    Ideal(IdealTransformer),
    Bank(BankSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BankSpec {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub vector_group: String,
    pub turns_ratio: f64,
    #[serde(default)]
    pub series_impedance: Complex64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetizing_admittance: Option<Complex64>,
    pub map_from: Vec<String>,
    pub map_to: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct NetworkFile {
    #[serde(default)]
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub linecodes: Vec<LineCode>,
    #[serde(default)]
    pub lines: Vec<Line>,
    #[serde(default)]
    pub transformers: Vec<TransformerSpec>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub shunts: Vec<Shunt>,
    #[serde(default)]
    pub sources: Vec<VoltageSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_multiplicity: Option<f64>,
}

impl NetworkFile {
    /// Build the network, lowering transformer banks and lossy groundings.
    pub fn into_network(self) -> Result<Network, NetworkError> {
        let mut net = Network::new();
        if let Some(k) = self.phase_multiplicity {
            net.phase_multiplicity = k;
        }
        for b in self.buses {
            net.add_bus(b);
        }
        for c in self.linecodes {
            net.add_linecode(c);
        }
        for l in self.lines {
            net.add_line(l);
        }
        for t in self.transformers {
            match t {
                TransformerSpec::Ideal(t) => net.add_transformer(t),
                TransformerSpec::Bank(b) => {
                    let group: VectorGroup = b.vector_group.parse()?;
                    let params = BankParams {
                        turns_ratio: b.turns_ratio,
                        series_impedance: b.series_impedance,
                        magnetizing_admittance: b.magnetizing_admittance,
                    };
                    let sub = assemble_transformer_bank(
                        &b.id, group, &params, &b.from_bus, &b.to_bus, &b.map_from, &b.map_to,
                    )?;
                    net.absorb(sub);
                }
            }
        }
        for d in self.loads {
            net.add_load(d);
        }
        for g in self.generators {
            net.add_generator(g);
        }
        for s in self.shunts {
            net.add_shunt(s);
        }
        for s in self.sources {
            net.add_source(s);
        }
        net.lower_lossy_grounding();
        Ok(net)
    }

    pub fn from_network(net: &Network) -> Self {
        NetworkFile {
            buses: net.buses.values().cloned().collect(),
            linecodes: net.linecodes.values().cloned().collect(),
            lines: net.lines.values().cloned().collect(),
            transformers: net.transformers.values().cloned().map(TransformerSpec::Ideal).collect(),
            loads: net.loads.values().cloned().collect(),
            generators: net.generators.values().cloned().collect(),
            shunts: net.shunts.values().cloned().collect(),
            sources: net.sources.values().cloned().collect(),
            phase_multiplicity: (net.phase_multiplicity != 1.0).then_some(net.phase_multiplicity),
        }
    }
}

pub fn from_str(s: &str) -> Result<Network, NetworkError> {
    serde_json::from_str::<NetworkFile>(s)?.into_network()
}

pub fn from_path(path: &Path) -> Result<Network, NetworkError> {
    from_str(&std::fs::read_to_string(path)?)
}

pub fn to_string(net: &Network) -> Result<String, NetworkError> {
    Ok(serde_json::to_string_pretty(&NetworkFile::from_network(net))?)
}

fn rows_of<T: Copy>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn from_rows<T, E>(rows: Vec<Vec<T>>) -> Result<DMatrix<T>, E>
where
    T: Copy + nalgebra::Scalar,
    E: serde::de::Error,
{
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(E::custom("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub mod real_matrix {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        rows_of(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        from_rows(Vec::<Vec<f64>>::deserialize(d)?)
    }
}

pub mod opt_real_matrix {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(rows_of).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        Option::<Vec<Vec<f64>>>::deserialize(d)?.map(from_rows).transpose()
    }
}

pub mod complex_matrix {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        rows_of(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<Complex64>, D::Error> {
        from_rows(Vec::<Vec<Complex64>>::deserialize(d)?)
    }
}
