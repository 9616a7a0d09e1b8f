//! Power-voltage emitters.
//!
//! Component currents are replaced by the power each conductor draws from
//! its terminal, `S = U conj(I)`. Transformer relations follow from the
//! current relations multiplied by conjugated voltages:
//! `U_b S_x + U_a S_y = 0` on each side and `n U_ja S_ix + U_ia S_jx = 0`.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::Serialize;

use crate::netmodel::{expand_composites, Connection, Generator, IdealTransformer, Line, Load, Network, NetworkError, Shunt};
use crate::qcqp::{CLin, CQuad, ComponentKind, ConstraintTag, Family, Quantity, Side};

use super::ivr::{gen_power, load_power, shunt_pu};
use super::{Ctx, FormError};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn flow(ctx: &mut Ctx, kind: ComponentKind, id: &str, side: Side, conductor: usize, init: Complex64) -> CLin {
    ctx.sys.complex_var(Quantity::Flow { kind, id: id.to_string(), side, conductor }, init)
}

pub(super) fn emit(ctx: &mut Ctx) -> Result<(), FormError> {
    let net = ctx.net;
    for l in net.lines.values() {
        emit_line(ctx, l)?;
    }
    for t in net.transformers.values() {
        emit_transformer(ctx, t);
    }
    let groups = load_groups(net);
    let grouped: BTreeSet<&String> = groups.values().flatten().collect();
    for (key, members) in &groups {
        emit_load_group(ctx, key, members);
    }
    for d in net.loads.values() {
        if !grouped.contains(&d.id) {
            emit_load(ctx, d);
        }
    }
    for g in net.generators.values() {
        emit_generator(ctx, g);
    }
    for s in net.shunts.values() {
        emit_shunt(ctx, s);
    }
    Ok(())
}

fn emit_line(ctx: &mut Ctx, l: &Line) -> Result<(), FormError> {
    let code = ctx.net.linecode_of(l)?;
    let n = code.n_conductors;
    let ys = (code.z() * c(l.length)).try_inverse().ok_or_else(|| FormError::SingularImpedance(l.id.clone()))?;
    let yfr = code.y_fr() * c(l.length);
    let yto = code.y_to() * c(l.length);
    let (vi, vj) = (ctx.bases.vb(&l.from_bus), ctx.bases.vb(&l.to_bus));
    let s = ctx.bases.s_base;
    let ui: Vec<CLin> = l.map_from.iter().map(|t| ctx.u(&l.from_bus, t)).collect();
    let uj: Vec<CLin> = l.map_to.iter().map(|t| ctx.u(&l.to_bus, t)).collect();
    let i_max = code.i_max.clone().filter(|_| ctx.cfg.bounds.current_ratings);
    for k in 0..n {
        // Currents in ampere as affine expressions of per-unit voltages.
        let mut i_fr = CLin::zero();
        let mut i_to = CLin::zero();
        for m in 0..n {
            i_fr = &i_fr + &(&ui[m].cscale((yfr[(k, m)] + ys[(k, m)]) * vi) - &uj[m].cscale(ys[(k, m)] * vj));
            i_to = &i_to + &(&uj[m].cscale((yto[(k, m)] + ys[(k, m)]) * vj) - &ui[m].cscale(ys[(k, m)] * vi));
        }
        let s_fr = ui[k].mul_conj(&i_fr).scale(vi / s);
        let s_to = uj[k].mul_conj(&i_to).scale(vj / s);
        let f_fr = flow(ctx, ComponentKind::Line, &l.id, Side::From, k, Complex64::default());
        let f_to = flow(ctx, ComponentKind::Line, &l.id, Side::To, k, Complex64::default());
        ctx.sys.add_complex_eq(&CQuad::from(f_fr.clone()) - &s_fr, ConstraintTag::new(Family::LineFrom, &l.id, k));
        ctx.sys.add_complex_eq(&CQuad::from(f_to.clone()) - &s_to, ConstraintTag::new(Family::LineTo, &l.id, k));
        if let Some(imax) = &i_max {
            for (f, u, bus, side) in [(&f_fr, &ui[k], &l.from_bus, 0), (&f_to, &uj[k], &l.to_bus, 1)] {
                let lim = imax[k] / ctx.bases.ib(bus);
                let e = &f.abs_sqr() - &u.abs_sqr().scale(lim * lim);
                ctx.sys.add_le(e, ConstraintTag::new(Family::CurrentRating, &l.id, 2 * k + side));
            }
        }
        ctx.add_kcl(&l.from_bus, &l.map_from[k], &f_fr);
        ctx.add_kcl(&l.to_bus, &l.map_to[k], &f_to);
    }
    Ok(())
}

fn emit_transformer(ctx: &mut Ctx, t: &IdealTransformer) {
    let (vi, vj) = (ctx.bases.vb(&t.from_bus), ctx.bases.vb(&t.to_bus));
    let mut f = |side, k| flow(ctx, ComponentKind::Transformer, &t.id, side, k, Complex64::default());
    let (sx, sy, rx, ry) = (f(Side::From, 0), f(Side::From, 1), f(Side::To, 0), f(Side::To, 1));
    let (ua, ub) = (ctx.u(&t.from_bus, &t.map_from[0]), ctx.u(&t.from_bus, &t.map_from[1]));
    let (wa, wb) = (ctx.u(&t.to_bus, &t.map_to[0]), ctx.u(&t.to_bus, &t.map_to[1]));
    let tag = |row| ConstraintTag::new(Family::Transformer, &t.id, row);
    ctx.sys.add_complex_eq(&ub.mul(&sx) + &ua.mul(&sy), tag(0));
    ctx.sys.add_complex_eq(&wb.mul(&rx) + &wa.mul(&ry), tag(1));
    ctx.sys.add_complex_eq(&wa.scale(t.turns_ratio * vj / vi).mul(&sx) + &ua.mul(&rx), tag(2));
    let du_i = &ua - &ub;
    let du_j = &wa - &wb;
    ctx.sys.add_complex_eq((&du_i - &du_j.scale(t.turns_ratio * vj / vi)).into(), tag(3));
    ctx.add_kcl(&t.from_bus, &t.map_from[0], &sx);
    ctx.add_kcl(&t.from_bus, &t.map_from[1], &sy);
    ctx.add_kcl(&t.to_bus, &t.map_to[0], &rx);
    ctx.add_kcl(&t.to_bus, &t.map_to[1], &ry);
}

/// Two-terminal element drawing complex power `sd` (per unit) between `x`
/// and `y`. With either terminal grounded the element's power lands on the
/// other terminal directly; otherwise flow variables carry it.
fn two_terminal(ctx: &mut Ctx, kind: ComponentKind, id: &str, bus: &str, x: &str, y: &str, sd: &CLin) {
    let net = ctx.net;
    if net.is_perfectly_grounded(bus, y) {
        ctx.add_kcl(bus, x, sd);
        return;
    }
    if net.is_perfectly_grounded(bus, x) {
        ctx.add_kcl(bus, y, sd);
        return;
    }
    let (ux, uy) = (ctx.u(bus, x), ctx.u(bus, y));
    let sx = flow(ctx, kind, id, Side::From, 0, Complex64::default());
    let sy = flow(ctx, kind, id, Side::From, 1, Complex64::default());
    let family = if kind == ComponentKind::Generator { Family::Generator } else { Family::Load };
    ctx.sys.add_complex_eq(&uy.mul(&sx) + &ux.mul(&sy), ConstraintTag::new(family, id, 1));
    ctx.sys.add_complex_eq(&sd.mul(&ux) - &sx.mul(&(&ux - &uy)), ConstraintTag::new(family, id, 2));
    ctx.add_kcl(bus, x, &sx);
    ctx.add_kcl(bus, y, &sy);
}

fn emit_load(ctx: &mut Ctx, d: &Load) {
    let (x, y) = (&d.map[0], &d.map[1]);
    let uxy = &ctx.u(&d.bus, x) - &ctx.u(&d.bus, y);
    let u0 = ctx.u_init(&d.bus, x) - ctx.u_init(&d.bus, y);
    let sd = load_power(ctx, d, &uxy, u0);
    two_terminal(ctx, ComponentKind::Load, &d.id, &d.bus, x, y, &sd);
}

fn emit_generator(ctx: &mut Ctx, g: &Generator) {
    let sg = gen_power(ctx, g);
    two_terminal(ctx, ComponentKind::Generator, &g.id, &g.bus, &g.map[0], &g.map[1], &-&sg);
}

fn emit_shunt(ctx: &mut Ctx, s: &Shunt) {
    let y = shunt_pu(ctx, s);
    let u: Vec<CLin> = s.map.iter().map(|t| ctx.u(&s.bus, t)).collect();
    for k in 0..s.map.len() {
        let mut i = CLin::zero();
        for (m, um) in u.iter().enumerate() {
            i = &i + &um.cscale(y[(k, m)]);
        }
        let f = flow(ctx, ComponentKind::Shunt, &s.id, Side::From, k, Complex64::default());
        ctx.sys.add_complex_eq(&CQuad::from(f.clone()) - &u[k].mul_conj(&i), ConstraintTag::new(Family::Shunt, &s.id, k));
        ctx.add_kcl(&s.bus, &s.map[k], &f);
    }
}

/// Product of terminal voltages, lowered left to right: each prefix of two
/// or more factors is an auxiliary variable equal to the previous prefix
/// times the next voltage. Prefixes are shared between terms.
fn voltage_product(ctx: &mut Ctx, bus: &str, factors: &[String]) -> (CLin, Complex64) {
    let u0 = ctx.u_init(bus, &factors[0]);
    if factors.len() == 1 {
        return (ctx.u(bus, &factors[0]), u0);
    }
    let q = Quantity::VoltageProduct { bus: bus.to_string(), factors: factors.to_vec() };
    let (prev, prev0) = voltage_product(ctx, bus, &factors[..factors.len() - 1]);
    let last = &factors[factors.len() - 1];
    let init = prev0 * ctx.u_init(bus, last);
    if let Some(v) = ctx.sys.complex_expr(&q) {
        return (v, init);
    }
    let v = ctx.sys.complex_var(q, init);
    let e = &CQuad::from(v.clone()) - &prev.mul(&ctx.u(bus, last));
    ctx.sys.add_complex_eq(e, ConstraintTag::new(Family::Auxiliary, &format!("{bus}:{}", factors.join("*")), 0));
    (v, init)
}

/// Wye load with a live neutral: each element `k` draws `S_k` at its phase
/// terminal (`S_dk U_k = S_k (U_k - U_n)`), the neutral draws `S_w`, and
/// the conjugated current balance of the group, multiplied through by all
/// terminal voltages, ties them together.
fn emit_load_group(ctx: &mut Ctx, key: &str, members: &[String]) {
    let net = ctx.net;
    let first = &net.loads[&members[0]];
    let bus = first.bus.clone();
    let neutral = first.map[1].clone();
    let mut terminals: Vec<String> = members.iter().map(|m| net.loads[m].map[0].clone()).collect();
    terminals.push(neutral.clone());
    let un = ctx.u(&bus, &neutral);
    let mut flows = Vec::new();
    for (k, m) in members.iter().enumerate() {
        let d = &net.loads[m];
        let ux = ctx.u(&bus, &d.map[0]);
        let u0 = ctx.u_init(&bus, &d.map[0]) - ctx.u_init(&bus, &neutral);
        let sd = load_power(ctx, d, &(&ux - &un), u0);
        let sb = flow(ctx, ComponentKind::Load, key, Side::From, k, Complex64::default());
        let e = &sd.mul(&ux) - &sb.mul(&(&ux - &un));
        ctx.sys.add_complex_eq(e, ConstraintTag::new(Family::Load, m, 2));
        ctx.add_kcl(&bus, &d.map[0], &sb);
        flows.push(sb);
    }
    let sw = flow(ctx, ComponentKind::Load, key, Side::From, members.len(), Complex64::default());
    ctx.add_kcl(&bus, &neutral, &sw);
    flows.push(sw);
    let mut sum = CQuad::default();
    for (k, f) in flows.iter().enumerate() {
        let others: Vec<String> =
            terminals.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, t)| t.clone()).collect();
        let (prod, _) = voltage_product(ctx, &bus, &others);
        sum = &sum + &f.mul(&prod);
    }
    ctx.sys.add_complex_eq(sum, ConstraintTag::new(Family::LoadGroup, key, 0));
}

fn group_key(id: &str) -> Option<(String, usize)> {
    let (head, tail) = id.rsplit_once('.')?;
    Some((head.to_string(), tail.parse().ok()?))
}

/// Wye load elements that share a live (not perfectly grounded) neutral
/// and come from the same composite, keyed by composite part id, members
/// in element order.
pub fn load_groups(net: &Network) -> BTreeMap<String, Vec<String>> {
    let mut groups: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    for d in net.loads.values() {
        if d.parent.is_none() || d.connection != Connection::Wye || d.map.len() != 2 {
            continue;
        }
        if net.is_perfectly_grounded(&d.bus, &d.map[1]) || net.is_perfectly_grounded(&d.bus, &d.map[0]) {
            continue;
        }
        if let Some((key, k)) = group_key(&d.id) {
            groups.entry(key).or_default().push((k, d.id.clone()));
        }
    }
    groups
        .into_iter()
        .filter(|(_, m)| m.len() >= 2)
        .filter_map(|(key, mut m)| {
            m.sort();
            let ids: Vec<String> = m.into_iter().map(|(_, id)| id).collect();
            let y = &net.loads[&ids[0]].map[1];
            let same = ids.iter().all(|i| &net.loads[i].map[1] == y);
            let mut xs: Vec<&String> = ids.iter().map(|i| &net.loads[i].map[0]).collect();
            xs.sort();
            xs.dedup();
            (same && xs.len() == ids.len()).then_some((key, ids))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundingNote {
    pub load: String,
    /// Grounded neutral: element flows equal element powers.
    pub simplified: bool,
    /// Real auxiliary variables the quartic lowering needs.
    pub auxiliaries: usize,
}

/// Which loads take the simplified grounded form and which need the
/// quartic lowering, with the auxiliary variable count of each.
pub fn kron_grounding_note(net: &Network) -> Result<Vec<GroundingNote>, NetworkError> {
    let net = expand_composites(net)?;
    let groups = load_groups(&net);
    let grouped: BTreeSet<&String> = groups.values().flatten().collect();
    let mut notes = Vec::new();
    for (key, members) in &groups {
        let mut terminals: Vec<String> = members.iter().map(|m| net.loads[m].map[0].clone()).collect();
        terminals.push(net.loads[&members[0]].map[1].clone());
        let mut prefixes = BTreeSet::new();
        for k in 0..terminals.len() {
            let others: Vec<&String> = terminals.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, t)| t).collect();
            for len in 2..=others.len() {
                prefixes.insert(others[..len].to_vec());
            }
        }
        notes.push(GroundingNote { load: key.clone(), simplified: false, auxiliaries: 2 * prefixes.len() });
    }
    let mut singles: BTreeMap<String, bool> = BTreeMap::new();
    for d in net.loads.values().filter(|d| !grouped.contains(&d.id)) {
        let grounded = net.is_perfectly_grounded(&d.bus, &d.map[1]) || net.is_perfectly_grounded(&d.bus, &d.map[0]);
        let key = d.parent.clone().unwrap_or_else(|| d.id.clone());
        let e = singles.entry(key).or_insert(true);
        *e &= grounded;
    }
    for (load, simplified) in singles {
        notes.push(GroundingNote { load, simplified, auxiliaries: 0 });
    }
    notes.sort_by(|a, b| a.load.cmp(&b.load));
    Ok(notes)
}

