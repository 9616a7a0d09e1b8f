use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::form::{Form, Formulation};

use super::{PostReport, Solution, Status};

/// Serializable summary of a solve: terminal voltages, recovered flows and
/// solver telemetry. Voltages are in volts, keyed `bus.terminal`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionReport {
    pub form: Form,
    pub status: Status,
    /// Per-unit objective.
    pub objective: f64,
    /// Objective in cost units per W.
    pub objective_si: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub max_violation: f64,
    pub message: String,
    pub variables: usize,
    pub constraints: usize,
    pub voltages: BTreeMap<String, Complex64>,
    pub recovered: Option<PostReport>,
}

impl SolutionReport {
    pub fn new(f: &Formulation, sol: &Solution) -> Self {
        let voltages = f.voltages(&sol.x).into_iter().map(|((b, t), v)| (format!("{b}.{t}"), v)).collect();
        Self {
            form: f.form,
            status: sol.status,
            objective: sol.objective,
            objective_si: f.objective_si(&sol.x),
            iterations: sol.iterations,
            wall_time: sol.wall_time,
            max_violation: sol.max_violation,
            message: sol.message.clone(),
            variables: f.sys.n_vars(),
            constraints: f.sys.n_cons(),
            voltages,
            recovered: sol.recovered.clone(),
        }
    }
}
