//! Formulation builders: IVR (current-voltage) and ACR (power-voltage)
//! rectangular forms of the unbalanced OPF, sharing voltage envelopes.

mod acr;
mod envelopes;
mod ivr;
mod state;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::netmodel::{expand_composites, Network, NetworkError};
use crate::qcqp::{CLin, ConstraintSystem, Family, LinExpr, Part, Quantity, VarKey};
use crate::reduce::eliminate_grounded_terminals;
use crate::solve::init::{init_voltages, voltage_bases, TerminalVoltages};
use crate::solve::SolveError;

pub use acr::{kron_grounding_note, load_groups, GroundingNote};
pub use state::{terminal_current_balance, terminal_power_balance, LineCurrents, NetworkState};

#[derive(Debug, thiserror::Error)]
pub enum FormError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("initialization failed: {0}")]
    Init(#[from] Box<SolveError>),
    #[error("line `{0}`: series impedance is singular")]
    SingularImpedance(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Ivr,
    Acr,
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::Ivr => "ivr",
            Form::Acr => "acr",
        })
    }
}

impl FromStr for Form {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ivr" => Ok(Form::Ivr),
            "acr" => Ok(Form::Acr),
            _ => Err(format!("unknown formulation `{s}` (expected ivr or acr)")),
        }
    }
}

/// Which envelope families are emitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSelection {
    pub phase_neutral: bool,
    pub phase_phase: bool,
    pub vuf: bool,
    pub neutral_shift: bool,
    pub negative_sequence: bool,
    pub current_ratings: bool,
}

impl Default for BoundSelection {
    fn default() -> Self {
        Self {
            phase_neutral: true,
            phase_phase: true,
            vuf: false,
            neutral_shift: false,
            negative_sequence: false,
            current_ratings: true,
        }
    }
}

impl BoundSelection {
    pub fn none() -> Self {
        Self {
            phase_neutral: false,
            phase_phase: false,
            vuf: false,
            neutral_shift: false,
            negative_sequence: false,
            current_ratings: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormulationConfig {
    /// Express total line currents as affine functions of series currents.
    pub series_current_only: bool,
    pub bounds: BoundSelection,
    /// VUF limit at buses with injections when the bus sets none.
    pub default_vuf_max: f64,
    /// Neutral shift limit in volts at buses with injections when unset.
    pub default_neutral_shift: f64,
    /// Negative-sequence limit in volts at buses with injections when unset.
    pub default_vneg_max: Option<f64>,
    /// Initial real part of ungrounded neutral voltages, per unit.
    pub neutral_init: f64,
    /// Power base in VA.
    pub s_base: f64,
    /// Sign guards on constant-current load powers.
    pub sign_guards: bool,
    /// Drop generator and source costs, leaving a feasibility problem.
    pub zero_objective: bool,
}

impl Default for FormulationConfig {
    fn default() -> Self {
        Self {
            series_current_only: false,
            bounds: BoundSelection::default(),
            default_vuf_max: 0.02,
            default_neutral_shift: 5.0,
            default_vneg_max: None,
            neutral_init: 0.01,
            s_base: 1e5,
            sign_guards: true,
            zero_objective: false,
        }
    }
}

impl FormulationConfig {
    /// Equalities only, zero objective: a power-flow problem.
    pub fn power_flow() -> Self {
        Self { bounds: BoundSelection::none(), sign_guards: false, zero_objective: true, ..Self::default() }
    }
}

/// Per-unit bases: one power base, a voltage base per bus.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bases {
    pub s_base: f64,
    pub v_base: BTreeMap<String, f64>,
}

impl Bases {
    pub fn vb(&self, bus: &str) -> f64 {
        self.v_base.get(bus).copied().unwrap_or(1.0)
    }

    pub fn ib(&self, bus: &str) -> f64 {
        self.s_base / self.vb(bus)
    }
}

/// A built formulation: the expanded network, its bases and the system.
#[derive(Clone, Debug)]
pub struct Formulation {
    pub form: Form,
    pub net: Network,
    pub cfg: FormulationConfig,
    pub bases: Bases,
    pub sys: ConstraintSystem,
}

pub(crate) struct Ctx<'a> {
    pub net: &'a Network,
    pub cfg: &'a FormulationConfig,
    pub bases: Bases,
    pub sys: ConstraintSystem,
    pub kcl: BTreeMap<(String, String), CLin>,
    pub init: TerminalVoltages,
    pub objective: LinExpr,
}

impl<'a> Ctx<'a> {
    fn new(net: &'a Network, cfg: &'a FormulationConfig) -> Result<Self, FormError> {
        let init = init_voltages(net, cfg.neutral_init).map_err(Box::new)?;
        let noload = crate::solve::init::noload_voltages(net).map_err(Box::new)?;
        let bases = Bases { s_base: cfg.s_base, v_base: voltage_bases(net, &noload) };
        let mut ctx = Ctx { net, cfg, bases, sys: ConstraintSystem::new(), kcl: BTreeMap::new(), init, objective: LinExpr::default() };
        for (bus, t) in net.connected_terminals() {
            if net.terminal(&bus, &t).is_none() {
                continue;
            }
            let v0 = ctx.init.get(&(bus.clone(), t.clone())).copied().unwrap_or_default() / ctx.bases.vb(&bus);
            ctx.sys.complex_var(Quantity::Voltage { bus: bus.clone(), terminal: t.clone() }, v0);
            ctx.kcl.insert((bus, t), CLin::zero());
        }
        Ok(ctx)
    }

    pub fn k(&self) -> f64 {
        self.net.phase_multiplicity
    }

    /// Voltage of a terminal in per unit.
    pub fn u(&self, bus: &str, t: &str) -> CLin {
        self.sys
            .complex_expr(&Quantity::Voltage { bus: bus.to_string(), terminal: t.to_string() })
            .unwrap_or_default()
    }

    pub fn u_init(&self, bus: &str, t: &str) -> Complex64 {
        self.init.get(&(bus.to_string(), t.to_string())).copied().unwrap_or_default() / self.bases.vb(bus)
    }

    pub fn add_kcl(&mut self, bus: &str, t: &str, e: &CLin) {
        let slot = self.kcl.entry((bus.to_string(), t.to_string())).or_default();
        *slot = &*slot + e;
    }

    fn emit_kcl(&mut self) {
        for ((bus, t), e) in std::mem::take(&mut self.kcl) {
            self.sys.add_complex_eq(e.into(), crate::qcqp::ConstraintTag::at(Family::Kcl, &bus, &t, 0));
        }
    }

    /// Eliminate grounded and source terminals and attach the objective.
    fn finish(mut self, form: Form) -> Formulation {
        self.emit_kcl();
        let net = self.net;
        let mut sys = eliminate_grounded_terminals(&self.sys, net);
        let mut source_terms = Vec::new();
        for s in net.sources.values() {
            let vb = self.bases.vb(&s.bus);
            for (t, v) in &s.phasors {
                source_terms.push((s.bus.clone(), t.clone(), *v / vb, s.cost));
            }
        }
        sys.drop_rows(|tag| {
            tag.family == Family::Kcl
                && source_terms.iter().any(|(b, t, _, _)| *b == tag.id && Some(t) == tag.terminal.as_ref())
        });
        let mut values = BTreeMap::new();
        for (bus, t, v, _) in &source_terms {
            let q = Quantity::Voltage { bus: bus.clone(), terminal: t.clone() };
            if let Some(i) = sys.index_of(&VarKey::new(q.clone(), Part::Re)) {
                values.insert(i, v.re);
            }
            if let Some(i) = sys.index_of(&VarKey::new(q, Part::Im)) {
                values.insert(i, v.im);
            }
        }
        let mut sys = sys.substitute(&values);
        let mut objective = remap_objective(&self.objective, &self.sys, &sys);
        if !self.cfg.zero_objective {
            let k = self.k();
            for (bus, t, v, cost) in &source_terms {
                let row = |r: usize| {
                    sys.dropped.iter().find(|c| {
                        c.tag.family == Family::Kcl && c.tag.id == *bus && c.tag.terminal.as_ref() == Some(t) && c.tag.row == r
                    })
                };
                let (Some(re), Some(im)) = (row(0), row(1)) else { continue };
                let (re, im) = (lin_part(&re.expr), lin_part(&im.expr));
                let p = match form {
                    Form::Ivr => &re.scale(v.re) + &im.scale(v.im),
                    Form::Acr => re,
                };
                objective = &objective + &p.scale(cost * k);
            }
        } else {
            objective = LinExpr::default();
        }
        sys.objective = objective;
        Formulation { form, net: net.clone(), cfg: self.cfg.clone(), bases: self.bases, sys }
    }
}

fn lin_part(e: &crate::qcqp::QuadExpr) -> LinExpr {
    debug_assert!(e.quad.is_empty());
    LinExpr { terms: e.lin.clone(), constant: e.constant }
}

/// Re-express an objective built on the raw system in the reduced one.
fn remap_objective(obj: &LinExpr, raw: &ConstraintSystem, reduced: &ConstraintSystem) -> LinExpr {
    let mut out = LinExpr::constant(obj.constant);
    for &(i, c) in &obj.terms {
        let key = &raw.variables[i].key;
        match reduced.index_of(key) {
            Some(j) => out.terms.push((j, c)),
            None => out.constant += c * reduced.fixed.get(key).copied().unwrap_or(0.0),
        }
    }
    out
}

pub fn build(net: &Network, form: Form, cfg: &FormulationConfig) -> Result<Formulation, FormError> {
    match form {
        Form::Ivr => build_ivr(net, cfg),
        Form::Acr => build_acr(net, cfg),
    }
}

pub fn build_ivr(net: &Network, cfg: &FormulationConfig) -> Result<Formulation, FormError> {
    let net = expand_composites(net)?;
    let mut ctx = Ctx::new(&net, cfg)?;
    ivr::emit(&mut ctx)?;
    envelopes::emit(&mut ctx);
    Ok(ctx.finish(Form::Ivr))
}

pub fn build_acr(net: &Network, cfg: &FormulationConfig) -> Result<Formulation, FormError> {
    let net = expand_composites(net)?;
    let mut ctx = Ctx::new(&net, cfg)?;
    acr::emit(&mut ctx)?;
    envelopes::emit(&mut ctx);
    Ok(ctx.finish(Form::Acr))
}

impl Formulation {
    /// Objective in currency: the internal objective times the power base.
    pub fn objective_si(&self, x: &[f64]) -> f64 {
        self.sys.eval_objective(x) * self.bases.s_base
    }

    /// Terminal voltages in volts at a point.
    pub fn voltages(&self, x: &[f64]) -> BTreeMap<(String, String), Complex64> {
        let mut out = BTreeMap::new();
        for (bus, t) in self.net.connected_terminals() {
            let q = Quantity::Voltage { bus: bus.clone(), terminal: t.clone() };
            if let Some(u) = self.sys.complex_value(&q, x) {
                out.insert((bus.clone(), t), u * self.bases.vb(&bus));
            }
        }
        out
    }

    /// Number of live bus-terminal voltage variables.
    pub fn n_voltage_vars(&self) -> usize {
        self.sys.variables.iter().filter(|v| matches!(v.key.quantity, Quantity::Voltage { .. })).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::qcqp::Sense;

    #[test]
    fn power_flow_system_is_square() {
        for name in ["f1", "f2", "f3", "synthetic30"] {
            let f = build_ivr(&fixtures::by_name(name).unwrap(), &FormulationConfig::power_flow()).unwrap();
            assert_eq!(f.sys.n_eq(), f.sys.n_vars(), "{name}");
            assert!(f.sys.constraints.iter().all(|c| c.sense == Sense::Eq));
        }
    }

    #[test]
    fn grounded_neutral_has_no_variable() {
        let f = build(&fixtures::f3_grounded(), Form::Ivr, &FormulationConfig::default()).unwrap();
        let u = Quantity::Voltage { bus: "m".into(), terminal: "n".into() };
        assert!(!f.sys.has_quantity(&u));
        let f = build(&fixtures::f3(), Form::Ivr, &FormulationConfig::default()).unwrap();
        assert!(f.sys.has_quantity(&u));
    }

    #[test]
    fn bounds_add_envelope_rows() {
        let net = fixtures::f1_opf();
        let with = build(&net, Form::Acr, &FormulationConfig::default()).unwrap();
        let without = build(&net, Form::Acr, &FormulationConfig { bounds: BoundSelection::none(), ..FormulationConfig::default() }).unwrap();
        let pn = |f: &Formulation| f.sys.constraints.iter().filter(|c| c.tag.family == Family::PhaseNeutral).count();
        assert!(pn(&with) > 0);
        assert_eq!(pn(&without), 0);
    }
}
