//! Run options shared by the CLI and the C interface, read from TOML or JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::CaseSpec;
use crate::form::FormulationConfig;
use crate::solve::{SolverOptions, Start};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub solver: SolverOptions,
    pub formulation: FormulationConfig,
    pub start: Start,
    /// Case synthesis for `bench --synthesize`.
    pub case: CaseSpec,
}

impl RunOptions {
    /// TOML unless the file ends in `.json`.
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)
        } else {
            Ok(toml::from_str(&text)?)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_keeps_defaults() {
        let o: RunOptions = toml::from_str("start = \"load-aware\"\n[solver]\nmax_iter = 50\n[formulation.bounds]\nvuf = true\n").unwrap();
        assert_eq!(o.solver.max_iter, 50);
        assert_eq!(o.solver.tol_kkt, SolverOptions::default().tol_kkt);
        assert!(o.formulation.bounds.vuf && o.formulation.bounds.phase_neutral);
        assert_eq!(o.start, Start::LoadAware);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunOptions::from_json("{\"solvr\": {}}").is_err());
    }
}
