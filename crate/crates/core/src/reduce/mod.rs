//! Network model transformations: Kron reduction, sequence impedances,
//! linecode matching, series-line merging, balanced equivalents and
//! grounded-terminal elimination.

mod balanced;
mod grounding;
mod kron;
mod matching;
mod merge;
pub mod sequence;

pub use balanced::balanced_equivalent;
pub use grounding::eliminate_grounded_terminals;
pub use kron::{kron_network, kron_reduce, schur_eliminate};
pub use matching::{closest, match_linecode, positive_sequence_of, rematch_linecodes};
pub use merge::merge_series_lines;
pub use sequence::{sequence_components, sequence_impedance, vuf, SequenceImpedance};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::netmodel::Network;

/// Decision model fidelity: the detailed four-wire network, its Kron
/// reduction, or the balanced single-phase equivalent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    FourWire,
    Kron,
    Balanced,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::FourWire, Model::Kron, Model::Balanced];

    /// The network seen by this model.
    pub fn apply(self, net: &Network) -> Result<Network, ReduceError> {
        match self {
            Model::FourWire => Ok(net.clone()),
            Model::Kron => kron_network(net),
            Model::Balanced => balanced_equivalent(net),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::FourWire => "fourwire",
            Model::Kron => "kron",
            Model::Balanced => "balanced",
        })
    }
}

impl FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fourwire" | "four-wire" => Ok(Model::FourWire),
            "kron" => Ok(Model::Kron),
            "balanced" => Ok(Model::Balanced),
            _ => Err(format!("unknown model `{s}` (expected fourwire, kron or balanced)")),
        }
    }
}

use crate::netmodel::NetworkError;

#[derive(Debug, thiserror::Error)]
pub enum ReduceError {
    #[error("linecode `{linecode}`: eliminated block is singular")]
    SingularBlock { linecode: String },
    #[error("linecode `{linecode}` has no conductor {index}")]
    NoSuchConductor { linecode: String, index: usize },
    #[error("line `{line}`: neutral conductor maps to a different position on each side")]
    NeutralMismatch { line: String },
    #[error("cannot build a balanced equivalent: {0}")]
    Unbalanceable(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}
