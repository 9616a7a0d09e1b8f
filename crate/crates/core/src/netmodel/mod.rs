//! Typed multi-conductor network model.
//!
//! Every component carries an explicit conductor-terminal map: a list of bus
//! terminal labels, one per conductor, in conductor order. Nothing in the
//! crate relies on terminal *positions*; all indexing goes through labels.

mod bank;
mod expand;
pub mod json;
mod validate;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use bank::{assemble_transformer_bank, BankParams, Subnetwork, VectorGroup};
pub use expand::{composite_map, expand_composites};
pub use validate::{validate_network, Diagnostic, Rule};

/// Label used for the neutral terminal throughout the crate.
pub const NEUTRAL: &str = "n";

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("unknown {kind} `{id}` referenced by `{by}`")]
    UnknownReference { kind: &'static str, id: String, by: String },
    #[error("component `{id}`: {msg}")]
    Invalid { id: String, msg: String },
    #[error("unsupported connection for `{id}`: {msg}")]
    UnsupportedConnection { id: String, msg: String },
    #[error("unsupported vector group `{0}`")]
    UnsupportedVectorGroup(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    pub label: String,
    #[serde(default)]
    pub grounded: bool,
    /// Absent with `grounded = true` means a perfect (0 ohm) ground.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding_impedance: Option<Complex64>,
}

impl Terminal {
    pub fn new(label: &str) -> Self {
        Self { label: label.to_string(), grounded: false, grounding_impedance: None }
    }

    pub fn grounded(label: &str) -> Self {
        Self { label: label.to_string(), grounded: true, grounding_impedance: None }
    }

    pub fn is_perfectly_grounded(&self) -> bool {
        self.grounded && self.grounding_impedance.is_none()
    }
}

/// Voltage envelopes attached to a bus. Magnitudes in volts, VUF as a fraction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BusBounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vpn_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vpn_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vpp_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vpp_max: Option<f64>,
    /// Neutral shift limit on |U_n|.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vn_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vuf_max: Option<f64>,
    /// Limit on the negative-sequence magnitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vneg_max: Option<f64>,
}

impl BusBounds {
    pub fn is_empty(&self) -> bool {
        *self == BusBounds::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub terminals: Vec<Terminal>,
    #[serde(default, skip_serializing_if = "BusBounds::is_empty")]
    pub bounds: BusBounds,
}

impl Bus {
    pub fn new(id: &str, labels: &[&str]) -> Self {
        Self {
            id: id.to_string(),
            terminals: labels.iter().map(|l| Terminal::new(l)).collect(),
            bounds: BusBounds::default(),
        }
    }

    pub fn terminal(&self, label: &str) -> Option<&Terminal> {
        self.terminals.iter().find(|t| t.label == label)
    }

    pub fn terminal_mut(&mut self, label: &str) -> Option<&mut Terminal> {
        self.terminals.iter_mut().find(|t| t.label == label)
    }

    pub fn has_terminal(&self, label: &str) -> bool {
        self.terminal(label).is_some()
    }

    /// Terminals other than the neutral, in declaration order.
    pub fn phase_labels(&self) -> impl Iterator<Item = &str> {
        self.terminals.iter().map(|t| t.label.as_str()).filter(|l| *l != NEUTRAL)
    }
}

/// Per-length line parameters. Impedances in ohm/km, admittances in S/km.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineCode {
    pub id: String,
    pub n_conductors: usize,
    #[serde(with = "json::real_matrix")]
    pub r: DMatrix<f64>,
    #[serde(with = "json::real_matrix")]
    pub x: DMatrix<f64>,
    #[serde(default, with = "json::opt_real_matrix", skip_serializing_if = "Option::is_none")]
    pub g_fr: Option<DMatrix<f64>>,
    #[serde(default, with = "json::opt_real_matrix", skip_serializing_if = "Option::is_none")]
    pub b_fr: Option<DMatrix<f64>>,
    #[serde(default, with = "json::opt_real_matrix", skip_serializing_if = "Option::is_none")]
    pub g_to: Option<DMatrix<f64>>,
    #[serde(default, with = "json::opt_real_matrix", skip_serializing_if = "Option::is_none")]
    pub b_to: Option<DMatrix<f64>>,
    /// Per-conductor current rating in ampere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_max: Option<Vec<f64>>,
}

impl LineCode {
    pub fn new(id: &str, r: DMatrix<f64>, x: DMatrix<f64>) -> Self {
        Self {
            id: id.to_string(),
            n_conductors: r.nrows(),
            r,
            x,
            g_fr: None,
            b_fr: None,
            g_to: None,
            b_to: None,
            i_max: None,
        }
    }

    /// Series impedance per km.
    pub fn z(&self) -> DMatrix<Complex64> {
        complex_matrix(&self.r, &self.x)
    }

    fn shunt(g: &Option<DMatrix<f64>>, b: &Option<DMatrix<f64>>, n: usize) -> DMatrix<Complex64> {
        let zero = DMatrix::zeros(n, n);
        complex_matrix(g.as_ref().unwrap_or(&zero), b.as_ref().unwrap_or(&zero))
    }

    pub fn y_fr(&self) -> DMatrix<Complex64> {
        Self::shunt(&self.g_fr, &self.b_fr, self.n_conductors)
    }

    pub fn y_to(&self) -> DMatrix<Complex64> {
        Self::shunt(&self.g_to, &self.b_to, self.n_conductors)
    }

    pub fn has_shunt(&self) -> bool {
        [&self.g_fr, &self.b_fr, &self.g_to, &self.b_to]
            .iter()
            .any(|m| m.as_ref().is_some_and(|m| m.iter().any(|v| *v != 0.0)))
    }
}

pub fn complex_matrix(re: &DMatrix<f64>, im: &DMatrix<f64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// Length in km.
    pub length: f64,
    pub linecode: String,
    pub map_from: Vec<String>,
    pub map_to: Vec<String>,
}

/// Ideal two-winding single-phase transformer, conductors `x` and `y` per side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealTransformer {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub turns_ratio: f64,
    pub map_from: Vec<String>,
    pub map_to: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connection {
    Wye,
    Delta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LoadModel {
    Power,
    Impedance,
    Current,
    Zip,
}

/// A value given either once for every phase element or per element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerElement {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerElement {
    pub fn get(&self, k: usize) -> f64 {
        match self {
            PerElement::Uniform(v) => *v,
            PerElement::Each(v) if v.len() == 1 => v[0],
            PerElement::Each(v) => v[k],
        }
    }

    pub fn len_ok(&self, n: usize) -> bool {
        match self {
            PerElement::Uniform(_) => true,
            PerElement::Each(v) => v.len() == 1 || v.len() == n,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PerElement {
        match self {
            PerElement::Uniform(v) => PerElement::Uniform(f(*v)),
            PerElement::Each(v) => PerElement::Each(v.iter().map(|x| f(*x)).collect()),
        }
    }

    pub fn values(&self, n: usize) -> Vec<f64> {
        (0..n).map(|k| self.get(k)).collect()
    }
}

impl From<f64> for PerElement {
    fn from(v: f64) -> Self {
        PerElement::Uniform(v)
    }
}

impl From<Vec<f64>> for PerElement {
    fn from(v: Vec<f64>) -> Self {
        PerElement::Each(v)
    }
}

/// Number of single-phase elements a component with this connection and map
/// decomposes into.
pub fn element_count(connection: Connection, map_len: usize) -> usize {
    match (connection, map_len) {
        (_, 0 | 1) => 0,
        (_, 2) => 1,
        (Connection::Wye, m) => m - 1,
        (Connection::Delta, m) => m,
    }
}

/// Terminal pairs `(x, y)` of the single-phase elements of a composite.
pub fn element_pairs(connection: Connection, map: &[String]) -> Vec<(String, String)> {
    let m = map.len();
    match (connection, m) {
        (_, 0 | 1) => vec![],
        (_, 2) => vec![(map[0].clone(), map[1].clone())],
        (Connection::Wye, _) => {
            let n = &map[m - 1];
            map[..m - 1].iter().map(|p| (p.clone(), n.clone())).collect()
        }
        (Connection::Delta, _) => (0..m).map(|k| (map[k].clone(), map[(k + 1) % m].clone())).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub id: String,
    pub bus: String,
    pub connection: Connection,
    pub model: LoadModel,
    /// Active power per phase element in W.
    pub p_nom: PerElement,
    /// Reactive power per phase element in var.
    pub q_nom: PerElement,
    /// Nominal element voltage in V.
    #[serde(default)]
    pub u_nom: f64,
    /// Constant impedance, current and power shares of a ZIP load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zip_weights: Option<[f64; 3]>,
    pub map: Vec<String>,
    /// Time-series profile reference, used by snapshot ingestion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    /// Set on elements produced by [`expand_composites`]: id of the composite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl Load {
    pub fn n_elements(&self) -> usize {
        element_count(self.connection, self.map.len())
    }

    pub fn is_elementary(&self) -> bool {
        self.map.len() == 2 && self.model != LoadModel::Zip
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub connection: Connection,
    pub p_min: PerElement,
    pub p_max: PerElement,
    pub q_min: PerElement,
    pub q_max: PerElement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<PerElement>,
    /// Linear cost per W injected.
    #[serde(default)]
    pub cost: f64,
    pub map: Vec<String>,
    /// Generators of a detailed model that this one stands in for.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aggregates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl Generator {
    pub fn n_elements(&self) -> usize {
        element_count(self.connection, self.map.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shunt {
    pub id: String,
    pub bus: String,
    /// Admittance matrix in siemens.
    #[serde(with = "json::complex_matrix")]
    pub y: DMatrix<Complex64>,
    pub map: Vec<String>,
}

/// Fixed voltage phasors at a reference bus; also the grid import point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltageSource {
    pub id: String,
    pub bus: String,
    /// Phasor in volts for every terminal of the bus.
    pub phasors: BTreeMap<String, Complex64>,
    /// Cost per W imported.
    #[serde(default = "default_source_cost")]
    pub cost: f64,
}

fn default_source_cost() -> f64 {
    1.0
}

/// Immutable after construction; build with the public fields or from JSON.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Network {
    pub buses: BTreeMap<String, Bus>,
    pub linecodes: BTreeMap<String, LineCode>,
    pub lines: BTreeMap<String, Line>,
    pub transformers: BTreeMap<String, IdealTransformer>,
    pub loads: BTreeMap<String, Load>,
    pub generators: BTreeMap<String, Generator>,
    pub shunts: BTreeMap<String, Shunt>,
    pub sources: BTreeMap<String, VoltageSource>,
    /// Number of identical phases each modelled element stands for. 1 for
    /// explicit multi-conductor models, 3 for a balanced single-phase equivalent.
    pub phase_multiplicity: f64,
}

impl Network {
    pub fn new() -> Self {
        Self { phase_multiplicity: 1.0, ..Default::default() }
    }

    pub fn add_bus(&mut self, bus: Bus) {
        self.buses.insert(bus.id.clone(), bus);
    }

    pub fn add_linecode(&mut self, code: LineCode) {
        self.linecodes.insert(code.id.clone(), code);
    }

    pub fn add_line(&mut self, line: Line) {
        self.lines.insert(line.id.clone(), line);
    }

    pub fn add_transformer(&mut self, t: IdealTransformer) {
        self.transformers.insert(t.id.clone(), t);
    }

    pub fn add_load(&mut self, load: Load) {
        self.loads.insert(load.id.clone(), load);
    }

    pub fn add_generator(&mut self, g: Generator) {
        self.generators.insert(g.id.clone(), g);
    }

    pub fn add_shunt(&mut self, s: Shunt) {
        self.shunts.insert(s.id.clone(), s);
    }

    pub fn add_source(&mut self, s: VoltageSource) {
        self.sources.insert(s.id.clone(), s);
    }

    /// Merge a transformer-bank subnetwork into this network.
    pub fn absorb(&mut self, sub: Subnetwork) {
        for b in sub.buses {
            self.add_bus(b);
        }
        for c in sub.linecodes {
            self.add_linecode(c);
        }
        for l in sub.lines {
            self.add_line(l);
        }
        for t in sub.transformers {
            self.add_transformer(t);
        }
        for s in sub.shunts {
            self.add_shunt(s);
        }
    }

    pub fn linecode_of(&self, line: &Line) -> Result<&LineCode, NetworkError> {
        self.linecodes.get(&line.linecode).ok_or_else(|| NetworkError::UnknownReference {
            kind: "linecode",
            id: line.linecode.clone(),
            by: line.id.clone(),
        })
    }

    pub fn terminal(&self, bus: &str, label: &str) -> Option<&Terminal> {
        self.buses.get(bus).and_then(|b| b.terminal(label))
    }

    pub fn is_perfectly_grounded(&self, bus: &str, label: &str) -> bool {
        self.terminal(bus, label).is_some_and(Terminal::is_perfectly_grounded)
    }

    /// Replace every lossy grounding impedance by a single-conductor shunt.
    pub fn lower_lossy_grounding(&mut self) {
        let mut shunts = Vec::new();
        for bus in self.buses.values_mut() {
            for t in bus.terminals.iter_mut() {
                if let (true, Some(z)) = (t.grounded, t.grounding_impedance) {
                    shunts.push(Shunt {
                        id: format!("{}.{}.ground", bus.id, t.label),
                        bus: bus.id.clone(),
                        y: DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0) / z),
                        map: vec![t.label.clone()],
                    });
                    t.grounded = false;
                    t.grounding_impedance = None;
                }
            }
        }
        for s in shunts {
            self.add_shunt(s);
        }
    }

    /// Every `(bus, terminal)` some component conductor is attached to.
    pub fn connected_terminals(&self) -> std::collections::BTreeSet<(String, String)> {
        let mut set = std::collections::BTreeSet::new();
        let mut add = |bus: &str, map: &[String]| {
            for t in map {
                set.insert((bus.to_string(), t.clone()));
            }
        };
        for l in self.lines.values() {
            add(&l.from_bus, &l.map_from);
            add(&l.to_bus, &l.map_to);
        }
        for t in self.transformers.values() {
            add(&t.from_bus, &t.map_from);
            add(&t.to_bus, &t.map_to);
        }
        for d in self.loads.values() {
            add(&d.bus, &d.map);
        }
        for g in self.generators.values() {
            add(&g.bus, &g.map);
        }
        for s in self.shunts.values() {
            add(&s.bus, &s.map);
        }
        for s in self.sources.values() {
            if let Some(bus) = self.buses.get(&s.bus) {
                for t in &bus.terminals {
                    set.insert((s.bus.clone(), t.label.clone()));
                }
            }
        }
        set
    }

    /// Buses with at least one load or generator attached.
    pub fn buses_with_injections(&self) -> std::collections::BTreeSet<String> {
        self.loads
            .values()
            .map(|d| d.bus.clone())
            .chain(self.generators.values().map(|g| g.bus.clone()))
            .collect()
    }

    pub fn source_buses(&self) -> std::collections::BTreeSet<String> {
        self.sources.values().map(|s| s.bus.clone()).collect()
    }

    /// Fixed source phasor at a terminal, if any.
    pub fn source_phasor(&self, bus: &str, label: &str) -> Option<Complex64> {
        self.sources.values().find(|s| s.bus == bus).and_then(|s| s.phasors.get(label).copied())
    }
}
