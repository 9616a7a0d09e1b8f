//! Current-voltage emitters.

use num_complex::Complex64;

use crate::netmodel::{Generator, IdealTransformer, Line, Load, LoadModel, Shunt};
use crate::qcqp::{CLin, ConstraintTag, Family, LinExpr, Part, QuadExpr, Quantity, Side, VarKey};

use super::{Ctx, FormError};

pub(super) fn emit(ctx: &mut Ctx) -> Result<(), FormError> {
    let net = ctx.net;
    for l in net.lines.values() {
        emit_line(ctx, l)?;
    }
    for t in net.transformers.values() {
        emit_transformer(ctx, t);
    }
    for d in net.loads.values() {
        emit_load(ctx, d);
    }
    for g in net.generators.values() {
        emit_generator(ctx, g);
    }
    for s in net.shunts.values() {
        emit_shunt(ctx, s);
    }
    Ok(())
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub(super) fn emit_line(ctx: &mut Ctx, l: &Line) -> Result<(), FormError> {
    let code = ctx.net.linecode_of(l)?;
    let n = code.n_conductors;
    let (vi, vj) = (ctx.bases.vb(&l.from_bus), ctx.bases.vb(&l.to_bus));
    let (ibi, ibj) = (ctx.bases.ib(&l.from_bus), ctx.bases.ib(&l.to_bus));
    let z = code.z() * c(l.length);
    let yfr = code.y_fr() * c(l.length);
    let yto = code.y_to() * c(l.length);
    let ui: Vec<CLin> = l.map_from.iter().map(|t| ctx.u(&l.from_bus, t)).collect();
    let uj: Vec<CLin> = l.map_to.iter().map(|t| ctx.u(&l.to_bus, t)).collect();
    let is: Vec<CLin> = (0..n)
        .map(|k| ctx.sys.complex_var(Quantity::SeriesCurrent { line: l.id.clone(), conductor: k }, Complex64::default()))
        .collect();
    for k in 0..n {
        let mut e = &ui[k] - &uj[k].scale(vj / vi);
        for m in 0..n {
            e = &e - &is[m].cscale(z[(k, m)] * ibi / vi);
        }
        ctx.sys.add_complex_eq(e.into(), ConstraintTag::new(Family::LineSeries, &l.id, k));
    }
    let i_max = code.i_max.clone().filter(|_| ctx.cfg.bounds.current_ratings);
    for k in 0..n {
        let mut i_fr = is[k].clone();
        let mut i_to = is[k].scale(-ibi / ibj);
        for m in 0..n {
            i_fr = &i_fr + &ui[m].cscale(yfr[(k, m)] * vi / ibi);
            i_to = &i_to + &uj[m].cscale(yto[(k, m)] * vj / ibj);
        }
        if !ctx.cfg.series_current_only {
            for (side, expr, row) in [(Side::From, &mut i_fr, Family::LineFrom), (Side::To, &mut i_to, Family::LineTo)] {
                let v = ctx.sys.complex_var(
                    Quantity::LineCurrent { line: l.id.clone(), side, conductor: k },
                    Complex64::default(),
                );
                ctx.sys.add_complex_eq((&v - expr).into(), ConstraintTag::new(row, &l.id, k));
                *expr = v;
            }
        }
        if let Some(imax) = &i_max {
            for (expr, ib, side) in [(&i_fr, ibi, 0), (&i_to, ibj, 1)] {
                let lim = imax[k] / ib;
                let e = &expr.abs_sqr() + &LinExpr::constant(-lim * lim);
                ctx.sys.add_le(e, ConstraintTag::new(Family::CurrentRating, &l.id, 2 * k + side));
            }
        }
        ctx.add_kcl(&l.from_bus, &l.map_from[k], &i_fr);
        ctx.add_kcl(&l.to_bus, &l.map_to[k], &i_to);
    }
    Ok(())
}

pub(super) fn emit_transformer(ctx: &mut Ctx, t: &IdealTransformer) {
    let (vi, vj) = (ctx.bases.vb(&t.from_bus), ctx.bases.vb(&t.to_bus));
    let (ibi, ibj) = (ctx.bases.ib(&t.from_bus), ctx.bases.ib(&t.to_bus));
    let mut cur = |side, k| {
        ctx.sys.complex_var(
            Quantity::TransformerCurrent { transformer: t.id.clone(), side, conductor: k },
            Complex64::default(),
        )
    };
    let (ix, iy, jx, jy) = (cur(Side::From, 0), cur(Side::From, 1), cur(Side::To, 0), cur(Side::To, 1));
    let tag = |row| ConstraintTag::new(Family::Transformer, &t.id, row);
    ctx.sys.add_complex_eq((&ix + &iy).into(), tag(0));
    ctx.sys.add_complex_eq((&jx + &jy).into(), tag(1));
    ctx.sys.add_complex_eq((&ix.scale(t.turns_ratio * ibi / ibj) + &jx).into(), tag(2));
    let du_i = &ctx.u(&t.from_bus, &t.map_from[0]) - &ctx.u(&t.from_bus, &t.map_from[1]);
    let du_j = &ctx.u(&t.to_bus, &t.map_to[0]) - &ctx.u(&t.to_bus, &t.map_to[1]);
    ctx.sys.add_complex_eq((&du_i - &du_j.scale(t.turns_ratio * vj / vi)).into(), tag(3));
    ctx.add_kcl(&t.from_bus, &t.map_from[0], &ix);
    ctx.add_kcl(&t.from_bus, &t.map_from[1], &iy);
    ctx.add_kcl(&t.to_bus, &t.map_to[0], &jx);
    ctx.add_kcl(&t.to_bus, &t.map_to[1], &jy);
}

/// Nominal element power in per unit, per modelled phase.
pub(super) fn nominal_power(ctx: &Ctx, d: &Load) -> Complex64 {
    Complex64::new(d.p_nom.get(0), d.q_nom.get(0)) / (ctx.bases.s_base * ctx.k())
}

/// Element power expression for voltage-dependent models, shared by both
/// forms: `P + jQ` variables tied to the element voltage. Constant power
/// returns the nominal constant.
pub(super) fn load_power(ctx: &mut Ctx, d: &Load, uxy: &CLin, u0: Complex64) -> CLin {
    let s = nominal_power(ctx, d);
    let vb = ctx.bases.vb(&d.bus);
    let unom = d.u_nom / vb;
    let tag = |row| ConstraintTag::new(Family::Load, &d.id, row);
    match d.model {
        LoadModel::Power | LoadModel::Zip => CLin::constant(s),
        LoadModel::Impedance => {
            let scale = (u0.norm() / unom).powi(2);
            let sd = ctx.sys.complex_var(Quantity::LoadPower { load: d.id.clone() }, s * scale);
            let m = uxy.abs_sqr();
            // S = conj(Y)|U|^2 with conj(Y) = (P - jQ)^* / U_nom^2
            let g = s.re / (unom * unom);
            let b = -s.im / (unom * unom);
            ctx.sys.add_eq(&QuadExpr::from(sd.re.clone()) - &m.scale(g), tag(10));
            ctx.sys.add_eq(&QuadExpr::from(sd.im.clone()) + &m.scale(b), tag(11));
            sd
        }
        LoadModel::Current => {
            let scale = u0.norm() / unom;
            let sd = ctx.sys.complex_var(Quantity::LoadPower { load: d.id.clone() }, s * scale);
            let um = ctx.sys.free_var(
                VarKey::new(Quantity::VoltageMagSqr { load: d.id.clone() }, Part::Re),
                u0.norm_sqr(),
            );
            let um = LinExpr::var(um);
            ctx.sys.add_eq(&QuadExpr::from(um.clone()) - &uxy.abs_sqr(), tag(12));
            for (row, part, nom) in [(13, &sd.re, s.re), (14, &sd.im, s.im)] {
                if nom == 0.0 {
                    ctx.sys.add_eq(part.clone().into(), tag(row));
                    continue;
                }
                let k = nom / unom;
                ctx.sys.add_eq(&part.square() - &QuadExpr::from(um.scale(k * k)), tag(row));
                if ctx.cfg.sign_guards {
                    ctx.sys.add_le(part.scale(-nom.signum()).into(), tag(row + 2));
                }
            }
            sd
        }
    }
}

pub(super) fn emit_load(ctx: &mut Ctx, d: &Load) {
    let (x, y) = (&d.map[0], &d.map[1]);
    let uxy = &ctx.u(&d.bus, x) - &ctx.u(&d.bus, y);
    let u0 = ctx.u_init(&d.bus, x) - ctx.u_init(&d.bus, y);
    let i = ctx.sys.complex_var(Quantity::LoadCurrent { load: d.id.clone() }, Complex64::default());
    let tag = |row| ConstraintTag::new(Family::Load, &d.id, row);
    match d.model {
        LoadModel::Impedance => {
            let s = nominal_power(ctx, d);
            let unom = d.u_nom / ctx.bases.vb(&d.bus);
            let y_pu = s.conj() / (unom * unom);
            ctx.sys.add_complex_eq((&i - &uxy.cscale(y_pu)).into(), tag(0));
        }
        _ => {
            let sd = load_power(ctx, d, &uxy, u0);
            ctx.sys.add_complex_eq(&uxy.mul_conj(&i) - &sd, tag(0));
        }
    }
    ctx.add_kcl(&d.bus, x, &i);
    ctx.add_kcl(&d.bus, y, &-&i);
}

/// Power variables of a generator element with bounds, cost and S limit.
pub(super) fn gen_power(ctx: &mut Ctx, g: &Generator) -> CLin {
    let scale = ctx.bases.s_base * ctx.k();
    let (pmin, pmax) = (g.p_min.get(0) / scale, g.p_max.get(0) / scale);
    let (qmin, qmax) = (g.q_min.get(0) / scale, g.q_max.get(0) / scale);
    let q = Quantity::GenPower { generator: g.id.clone() };
    let p = ctx.sys.add_var(VarKey::new(q.clone(), Part::Re), pmin, pmax, 0f64.clamp(pmin, pmax));
    let qv = ctx.sys.add_var(VarKey::new(q, Part::Im), qmin, qmax, 0f64.clamp(qmin, qmax));
    let sg = CLin::vars(p, qv);
    if let Some(smax) = &g.s_max {
        let lim = smax.get(0) / scale;
        let e = &sg.abs_sqr() + &LinExpr::constant(-lim * lim);
        ctx.sys.add_le(e, ConstraintTag::new(Family::GeneratorBound, &g.id, 0));
    }
    if !ctx.cfg.zero_objective && g.cost != 0.0 {
        ctx.objective.terms.push((p, g.cost * ctx.k()));
    }
    sg
}

pub(super) fn emit_generator(ctx: &mut Ctx, g: &Generator) {
    let (x, y) = (&g.map[0], &g.map[1]);
    let uxy = &ctx.u(&g.bus, x) - &ctx.u(&g.bus, y);
    let i = ctx.sys.complex_var(Quantity::GenCurrent { generator: g.id.clone() }, Complex64::default());
    let sg = gen_power(ctx, g);
    ctx.sys.add_complex_eq(&uxy.mul_conj(&i) - &sg, ConstraintTag::new(Family::Generator, &g.id, 0));
    ctx.add_kcl(&g.bus, x, &-&i);
    ctx.add_kcl(&g.bus, y, &i);
}

/// Shunt admittance in per unit at the shunt's bus.
pub(super) fn shunt_pu(ctx: &Ctx, s: &Shunt) -> nalgebra::DMatrix<Complex64> {
    let vb = ctx.bases.vb(&s.bus);
    &s.y * c(vb * vb / ctx.bases.s_base)
}

pub(super) fn emit_shunt(ctx: &mut Ctx, s: &Shunt) {
    let y = shunt_pu(ctx, s);
    let u: Vec<CLin> = s.map.iter().map(|t| ctx.u(&s.bus, t)).collect();
    for k in 0..s.map.len() {
        let i = ctx.sys.complex_var(
            Quantity::ShuntCurrent { shunt: s.id.clone(), conductor: k },
            Complex64::default(),
        );
        let mut e = i.clone();
        for (m, um) in u.iter().enumerate() {
            e = &e - &um.cscale(y[(k, m)]);
        }
        ctx.sys.add_complex_eq(e.into(), ConstraintTag::new(Family::Shunt, &s.id, k));
        ctx.add_kcl(&s.bus, &s.map[k], &i);
    }
}
