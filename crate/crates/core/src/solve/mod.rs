//! Numerical engines: no-load initialization, Newton power flow on square
//! systems, a primal-dual interior-point solver and post-processing.

mod dense;
pub mod init;
mod ipm;
mod ldl;
mod newton;
mod post;
mod report;

use serde::{Deserialize, Serialize};

use crate::form::{build, BoundSelection, Form, Formulation, FormulationConfig};
use crate::netmodel::Network;
use crate::qcqp::QcqpError;

pub use dense::BunchKaufman;
pub use init::{init_voltages, load_aware_start, noload_voltages, voltage_bases};
pub use ipm::{ipm_solve, ipm_solve_from};
pub use ldl::{Inertia, SparseLdl};
pub use newton::{newton_pf, newton_pf_from};
pub use post::{recover_postprocessing, BusReport, PostReport};
pub use report::SolutionReport;

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("network has no voltage source")]
    NoSource,
    #[error("bus `{0}` is not reachable from a source")]
    UnreachableBus(String),
    #[error("power flow system is not square: {variables} free variables, {equations} equations")]
    NotSquare { variables: usize, equations: usize },
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error(transparent)]
    Qcqp(#[from] QcqpError),
    #[error(transparent)]
    Form(#[from] Box<crate::form::FormError>),
}

impl From<crate::form::FormError> for SolveError {
    fn from(e: crate::form::FormError) -> Self {
        Self::Form(Box::new(e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Scaled KKT tolerance of the interior-point method.
    pub tol_kkt: f64,
    /// Residual tolerance of Newton power flow.
    pub tol_pf: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    pub mu_reduction: f64,
    /// Smallest primal regularization tried during inertia correction.
    pub regularization_min: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol_kkt: 1e-8, tol_pf: 1e-10, max_iter: 500, mu_init: 0.1, mu_reduction: 0.2, regularization_min: 1e-20 }
    }
}

impl SolverOptions {
    pub fn check(&self) -> Result<(), SolveError> {
        let positive = [self.tol_kkt, self.tol_pf, self.mu_init, self.regularization_min];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(SolveError::Options("tolerances and mu_init must be positive".into()));
        }
        if !(self.mu_reduction > 0.0 && self.mu_reduction < 1.0) {
            return Err(SolveError::Options("mu_reduction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    IterationLimit,
    NumericalFailure,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::IterationLimit => "iteration-limit",
            Status::NumericalFailure => "numerical-failure",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    /// Constraint multipliers, one per constraint of the system.
    pub duals: Vec<f64>,
    /// Internal (per-unit) objective at `x`.
    pub objective: f64,
    pub iterations: usize,
    /// Seconds spent in the solver loop.
    pub wall_time: f64,
    /// Largest constraint or bound violation at `x`.
    pub max_violation: f64,
    pub message: String,
    pub recovered: Option<PostReport>,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Starting point of a solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    /// No-load voltages, neutrals at ε, zero currents and powers.
    #[default]
    NoLoad,
    /// See [`load_aware_start`].
    LoadAware,
}

impl std::str::FromStr for Start {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no-load" | "noload" => Ok(Start::NoLoad),
            "load-aware" => Ok(Start::LoadAware),
            _ => Err(format!("unknown start `{s}` (expected no-load or load-aware)")),
        }
    }
}

fn start_point(f: &Formulation, start: Start) -> Result<Vec<f64>, SolveError> {
    match start {
        Start::NoLoad => Ok(f.sys.initial_point()),
        Start::LoadAware => load_aware_start(f),
    }
}

/// Generators with an output range held at their largest active output
/// and the reactive output nearest zero, as a power flow needs fixed
/// injections.
pub fn fix_generators(net: &Network) -> Network {
    let mut out = net.clone();
    for g in out.generators.values_mut() {
        let n = g.n_elements().max(1);
        let p = g.p_max.values(n);
        let q: Vec<f64> = g.q_min.values(n).iter().zip(g.q_max.values(n)).map(|(lo, hi)| 0f64.clamp(*lo, hi)).collect();
        if p != g.p_min.values(n) || q != g.q_max.values(n) || q != g.q_min.values(n) {
            log::info!("power flow holds generator {} at its rated active output", g.id);
        }
        g.p_min = p.clone().into();
        g.p_max = p.into();
        g.q_min = q.clone().into();
        g.q_max = q.into();
        g.s_max = None;
    }
    out
}

/// Power flow: Newton for IVR, an interior-point feasibility solve for ACR.
/// Bounds and costs in `cfg` are ignored; generators go through
/// [`fix_generators`].
pub fn run_pf(net: &Network, form: Form, cfg: &FormulationConfig, opts: &SolverOptions, start: Start) -> Result<(Formulation, Solution), SolveError> {
    let cfg = FormulationConfig { bounds: BoundSelection::none(), zero_objective: true, sign_guards: false, ..cfg.clone() };
    let f = build(&fix_generators(net), form, &cfg)?;
    let x0 = start_point(&f, start)?;
    let sol = match form {
        Form::Ivr => newton_pf_from(&f.sys, &x0, opts)?,
        Form::Acr => ipm_solve_from(&f.sys, &x0, &SolverOptions { tol_kkt: opts.tol_kkt.min(opts.tol_pf), ..opts.clone() })?,
    };
    let sol = recover_postprocessing(&f, sol);
    Ok((f, sol))
}

/// Optimal power flow with the interior-point method.
pub fn run_opf(net: &Network, form: Form, cfg: &FormulationConfig, opts: &SolverOptions, start: Start) -> Result<(Formulation, Solution), SolveError> {
    let f = build(net, form, cfg)?;
    let x0 = start_point(&f, start)?;
    let sol = recover_postprocessing(&f, ipm_solve_from(&f.sys, &x0, opts)?);
    Ok((f, sol))
}
