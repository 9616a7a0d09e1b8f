use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::form::{Form, FormulationConfig};
use crate::netmodel::{expand_composites, Network};
use crate::solve::{run_pf, PostReport, SolverOptions, Start, Status};

use super::BenchError;

/// Generator setpoints in VA, keyed by elementary generator id of the
/// expanded truth network.
pub type Setpoints = BTreeMap<String, Complex64>;

/// Voltage quality of the truth network under a set of setpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Largest phase-to-neutral magnitude (V) over buses with an upper bound,
    /// or over all buses when none is bounded.
    pub max_pn: f64,
    /// Smallest phase-to-neutral upper bound (V) in the network.
    pub bound: Option<f64>,
    /// `max(0, max_pn / bound - 1) * 100`.
    pub violation_pct: Option<f64>,
    pub max_vuf: f64,
    /// Largest neutral voltage magnitude in V.
    pub max_neutral_shift: f64,
    pub iterations: usize,
}

pub fn violation_pct(max_pn: f64, bound: f64) -> f64 {
    (max_pn / bound - 1.0).max(0.0) * 100.0
}

/// Translate generator powers from a solved model network back to the
/// generators of `truth`. Generators present in both keep their value;
/// aggregated generators of a reduced model are split in proportion to the
/// rated power of the generators they stand for.
pub fn setpoints_for(truth: &Network, model: &Network, report: &PostReport) -> Result<Setpoints, BenchError> {
    let truth = expand_composites(truth)?;
    let k = if model.phase_multiplicity > 0.0 { model.phase_multiplicity } else { 1.0 };
    let origin = |g: &crate::netmodel::Generator| g.parent.clone().unwrap_or_else(|| g.id.clone());
    let mut out = Setpoints::new();
    for g in truth.generators.values() {
        if let Some(s) = report.gen_powers.get(&g.id) {
            out.insert(g.id.clone(), *s * k);
            continue;
        }
        let name = origin(g);
        let agg = model
            .generators
            .values()
            .find(|m| m.aggregates.contains(&name) || m.aggregates.contains(&g.id))
            .ok_or_else(|| BenchError::Unmapped(g.id.clone()))?;
        let total = report.gen_powers.get(&agg.id).ok_or_else(|| BenchError::Unmapped(g.id.clone()))? * k;
        let group: Vec<_> = truth
            .generators
            .values()
            .filter(|h| agg.aggregates.contains(&origin(h)) || agg.aggregates.contains(&h.id))
            .collect();
        let rated: f64 = group.iter().map(|h| h.p_max.get(0)).sum();
        let share = if rated > 0.0 { g.p_max.get(0) / rated } else { 1.0 / group.len() as f64 };
        out.insert(g.id.clone(), total * share);
    }
    Ok(out)
}

/// Fix every generator of `truth` at its setpoint and solve the four-wire
/// power flow.
pub fn evaluate_setpoints(truth: &Network, setpoints: &Setpoints, opts: &SolverOptions) -> Result<Evaluation, BenchError> {
    let mut net = expand_composites(truth)?;
    for g in net.generators.values_mut() {
        let s = setpoints.get(&g.id).ok_or_else(|| BenchError::Unmapped(g.id.clone()))?;
        g.p_min = s.re.into();
        g.p_max = s.re.into();
        g.q_min = s.im.into();
        g.q_max = s.im.into();
        g.s_max = None;
    }
    let (_, sol) = run_pf(&net, Form::Ivr, &FormulationConfig::power_flow(), opts, Start::NoLoad)?;
    if sol.status != Status::Optimal {
        return Err(BenchError::Evaluation(format!("four-wire power flow ended {}: {}", sol.status, sol.message)));
    }
    let rep = sol.recovered.as_ref().expect("power flow attaches a report");
    let bounded: Vec<(&String, f64)> =
        truth.buses.values().filter_map(|b| b.bounds.vpn_max.map(|v| (&b.id, v))).collect();
    let bound = bounded.iter().map(|(_, v)| *v).reduce(f64::min);
    let max_pn = rep
        .buses
        .iter()
        .filter(|(id, _)| bounded.is_empty() || bounded.iter().any(|(b, _)| b == id))
        .map(|(_, r)| r.max_phase_neutral)
        .fold(0.0, f64::max);
    Ok(Evaluation {
        max_pn,
        bound,
        violation_pct: bound.map(|b| violation_pct(max_pn, b)),
        max_vuf: rep.buses.values().filter_map(|r| r.vuf).fold(0.0, f64::max),
        max_neutral_shift: rep.buses.values().map(|r| r.neutral_shift).fold(0.0, f64::max),
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::reduce::Model;
    use crate::solve::run_opf;

    #[test]
    fn violation_is_clipped_at_zero() {
        assert_eq!(violation_pct(250.0, 253.0), 0.0);
        assert!((violation_pct(260.59, 253.0) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn balanced_setpoints_split_by_rating() {
        let truth = fixtures::f2_opf();
        let bal = Model::Balanced.apply(&truth).unwrap();
        let (f, sol) = run_opf(&bal, Form::Ivr, &FormulationConfig::default(), &SolverOptions::default(), Start::NoLoad).unwrap();
        let sp = setpoints_for(&truth, &f.net, sol.recovered.as_ref().unwrap()).unwrap();
        assert_eq!(sp.len(), 2);
        let total: Complex64 = sp.values().sum();
        let model_total: Complex64 = sol.recovered.as_ref().unwrap().gen_powers.values().sum();
        assert!((total - model_total * bal.phase_multiplicity).norm() < 1e-6 * total.norm().max(1.0));
        // equal ratings, equal shares
        assert!((sp["dg3"] - sp["dg4"]).norm() < 1e-9 * total.norm().max(1.0));
    }

    #[test]
    fn unknown_generator_is_unmapped() {
        let truth = fixtures::f1_opf();
        let err = evaluate_setpoints(&truth, &Setpoints::new(), &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, BenchError::Unmapped(id) if id == "dg1"));
    }
}
