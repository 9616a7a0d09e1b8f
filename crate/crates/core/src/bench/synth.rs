use serde::{Deserialize, Serialize};

use crate::form::{Form, FormulationConfig};
use crate::netmodel::{Connection, Generator, Network, NEUTRAL};
use crate::qcqp::{Family, Sense};
use crate::reduce::Model;
use crate::solve::{noload_voltages, run_opf, voltage_bases, SolverOptions, Start};

use super::BenchError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DgCapacity {
    /// Rated active power per DG in W.
    Fixed(f64),
    /// Smallest capacity at which the balanced OPF hits a network bound,
    /// found by bisection to `resolution` (relative).
    Congest { resolution: f64 },
}

/// How a benchmark case is built from a base network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseSpec {
    /// A DG goes on every `every`-th load, loads ordered by id.
    pub every: usize,
    /// DG cost as a fraction of the cheapest grid import cost.
    pub cost_ratio: f64,
    pub capacity: DgCapacity,
    /// Phase-to-neutral upper bound in per unit of the no-load voltage,
    /// applied to every bus that has no bound yet.
    pub vpn_max_pu: Option<f64>,
}

impl Default for CaseSpec {
    fn default() -> Self {
        Self { every: 4, cost_ratio: 0.1, capacity: DgCapacity::Congest { resolution: 0.01 }, vpn_max_pu: Some(1.1) }
    }
}

/// A synthesized case and the DG capacity it was built with.
#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub network: Network,
    pub capacity: f64,
    pub dgs: Vec<String>,
}

const ENVELOPES: [Family; 6] =
    [Family::PhaseNeutral, Family::PhasePhase, Family::CurrentRating, Family::NeutralShift, Family::Vuf, Family::NegativeSequence];

/// Add identical single-phase DGs at every `spec.every`-th load and size them.
pub fn synthesize_case(net: &Network, spec: &CaseSpec, opts: &SolverOptions) -> Result<Case, BenchError> {
    if net.loads.is_empty() {
        return Err(BenchError::NoLoads);
    }
    if spec.every == 0 || !(spec.cost_ratio > 0.0 && spec.cost_ratio < 1.0) {
        return Err(BenchError::Spec("`every` must be positive and `cost_ratio` in (0, 1)".into()));
    }
    let mut base = net.clone();
    if let Some(pu) = spec.vpn_max_pu {
        let bases = voltage_bases(net, &noload_voltages(net)?);
        for b in base.buses.values_mut() {
            if b.bounds.vpn_max.is_none() {
                b.bounds.vpn_max = Some(pu * bases[&b.id]);
            }
        }
    }
    let import_cost = net.sources.values().map(|s| s.cost).fold(f64::INFINITY, f64::min);
    let cost = spec.cost_ratio * import_cost;
    let sites: Vec<_> = net.loads.values().skip(spec.every - 1).step_by(spec.every).collect();
    let dgs: Vec<String> = sites.iter().map(|d| format!("dg.{}", d.id)).collect();
    let with_capacity = |p_max: f64| -> Network {
        let mut out = base.clone();
        for (d, id) in sites.iter().zip(&dgs) {
            let phase = d.map.iter().find(|t| *t != NEUTRAL).cloned().unwrap_or_else(|| d.map[0].clone());
            let has_neutral = net.buses[&d.bus].has_terminal(NEUTRAL);
            let map = if has_neutral {
                vec![phase, NEUTRAL.to_string()]
            } else {
                d.map.iter().take(2).cloned().collect()
            };
            out.add_generator(Generator {
                id: id.clone(),
                bus: d.bus.clone(),
                connection: Connection::Wye,
                p_min: 0.0.into(),
                p_max: p_max.into(),
                q_min: 0.0.into(),
                q_max: p_max.into(),
                s_max: None,
                cost,
                map,
                aggregates: vec![],
                parent: None,
            });
        }
        out
    };
    let resolution = match spec.capacity {
        DgCapacity::Fixed(p) => return Ok(Case { network: with_capacity(p), capacity: p, dgs }),
        DgCapacity::Congest { resolution } => resolution,
    };
    let congested = |p: f64| -> Result<bool, BenchError> { balanced_bound_active(&with_capacity(p), opts) };
    let mut lo = 0.0;
    let mut hi = 1000.0;
    while !congested(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return Err(BenchError::NoCongestion);
        }
    }
    while hi - lo > resolution * hi {
        let mid = 0.5 * (lo + hi);
        if congested(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    log::info!("DG capacity {hi:.1} W after bisection");
    Ok(Case { network: with_capacity(hi), capacity: hi, dgs })
}

/// Whether the balanced-model OPF of `net` ends with a network bound active.
pub fn balanced_bound_active(net: &Network, opts: &SolverOptions) -> Result<bool, BenchError> {
    let bal = Model::Balanced.apply(net)?;
    let (f, sol) = run_opf(&bal, Form::Ivr, &FormulationConfig::default(), opts, Start::NoLoad)?;
    if !sol.is_optimal() {
        return Err(BenchError::Sizing(format!("balanced OPF ended {}: {}", sol.status, sol.message)));
    }
    Ok(active_envelopes(&f.sys, &sol.x, 1e-6) > 0)
}

/// Number of envelope rows active within `tol` at `x`.
pub fn active_envelopes(sys: &crate::qcqp::ConstraintSystem, x: &[f64], tol: f64) -> usize {
    sys.constraints
        .iter()
        .filter(|c| c.sense == Sense::Le && ENVELOPES.contains(&c.tag.family) && c.eval(x) >= -tol)
        .count()
}

