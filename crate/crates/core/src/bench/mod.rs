//! Benchmark cases, setpoint evaluation on the four-wire truth model, and
//! the model × formulation comparison matrix.

mod evaluate;
mod matrix;
mod snapshot;
mod synth;

use std::path::Path;

use crate::netmodel::{json, NetworkError};
use crate::reduce::ReduceError;
use crate::solve::SolveError;

pub use evaluate::{evaluate_setpoints, setpoints_for, violation_pct, Evaluation, Setpoints};
pub use matrix::{run_matrix, Instance, LinearFit, MatrixOptions, ReportRow, ViolationReport};
pub use snapshot::{apply_snapshot, read_profile, read_profiles, Profiles};
pub use synth::{active_envelopes, balanced_bound_active, synthesize_case, Case, CaseSpec, DgCapacity};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("network has no loads")]
    NoLoads,
    #[error("invalid case spec: {0}")]
    Spec(String),
    #[error("no DG capacity up to 1 GW congests the balanced model")]
    NoCongestion,
    #[error("DG sizing failed: {0}")]
    Sizing(String),
    #[error("generator `{0}` has no setpoint in the model solution")]
    Unmapped(String),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Every `*.json` network in `dir`, named by file stem, in name order.
pub fn load_instances(dir: &Path) -> Result<Vec<Instance>, BenchError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")));
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok(Instance { name, network: json::from_path(&p)? })
        })
        .collect()
}
