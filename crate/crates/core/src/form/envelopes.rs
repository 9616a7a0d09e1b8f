//! Voltage envelopes shared by both forms.

use num_complex::Complex64;

use crate::netmodel::NEUTRAL;
use crate::qcqp::{CLin, ConstraintTag, Family, LinExpr, QuadExpr, Quantity, Seq};
use crate::reduce::sequence::alpha;

use super::Ctx;

fn upper(ctx: &mut Ctx, e: &CLin, lim: f64, tag: ConstraintTag) {
    ctx.sys.add_le(&e.abs_sqr() + &LinExpr::constant(-lim * lim), tag);
}

fn lower(ctx: &mut Ctx, e: &CLin, lim: f64, tag: ConstraintTag) {
    ctx.sys.add_le(&QuadExpr::from(LinExpr::constant(lim * lim)) - &e.abs_sqr(), tag);
}

pub(super) fn emit(ctx: &mut Ctx) {
    let net = ctx.net;
    let injections = net.buses_with_injections();
    let connected = net.connected_terminals();
    let b = ctx.cfg.bounds.clone();
    for bus in net.buses.values() {
        let live = |t: &str| connected.contains(&(bus.id.clone(), t.to_string()));
        let phases: Vec<String> = bus.phase_labels().filter(|t| live(t)).map(str::to_string).collect();
        let has_neutral = bus.has_terminal(NEUTRAL) && live(NEUTRAL);
        let un = if has_neutral { ctx.u(&bus.id, NEUTRAL) } else { CLin::zero() };
        let vb = ctx.bases.vb(&bus.id);
        let o = bus.bounds.clone();
        let with_inj = injections.contains(&bus.id);
        if b.phase_neutral {
            for (k, p) in phases.iter().enumerate() {
                let e = &ctx.u(&bus.id, p) - &un;
                if let Some(v) = o.vpn_max {
                    upper(ctx, &e, v / vb, ConstraintTag::at(Family::PhaseNeutral, &bus.id, p, 2 * k));
                }
                if let Some(v) = o.vpn_min {
                    lower(ctx, &e, v / vb, ConstraintTag::at(Family::PhaseNeutral, &bus.id, p, 2 * k + 1));
                }
            }
        }
        if b.phase_phase && phases.len() >= 2 {
            let n = phases.len();
            let pairs: Vec<(usize, usize)> =
                if n == 2 { vec![(0, 1)] } else { (0..n).map(|k| (k, (k + 1) % n)).collect() };
            for (row, (i, j)) in pairs.into_iter().enumerate() {
                let e = &ctx.u(&bus.id, &phases[i]) - &ctx.u(&bus.id, &phases[j]);
                if let Some(v) = o.vpp_max {
                    upper(ctx, &e, v / vb, ConstraintTag::at(Family::PhasePhase, &bus.id, &phases[i], 2 * row));
                }
                if let Some(v) = o.vpp_min {
                    lower(ctx, &e, v / vb, ConstraintTag::at(Family::PhasePhase, &bus.id, &phases[i], 2 * row + 1));
                }
            }
        }
        let grounded_n = net.is_perfectly_grounded(&bus.id, NEUTRAL);
        if b.neutral_shift && has_neutral && !grounded_n {
            let lim = o.vn_max.or(with_inj.then_some(ctx.cfg.default_neutral_shift));
            if let Some(v) = lim {
                upper(ctx, &un, v / vb, ConstraintTag::at(Family::NeutralShift, &bus.id, NEUTRAL, 0));
            }
        }
        if phases.len() < 3 {
            continue;
        }
        let vuf = if b.vuf { o.vuf_max.or(with_inj.then_some(ctx.cfg.default_vuf_max)) } else { None };
        let vneg = if b.negative_sequence { o.vneg_max.or(ctx.cfg.default_vneg_max.filter(|_| with_inj)) } else { None };
        if vuf.is_none() && vneg.is_none() {
            continue;
        }
        let upn: Vec<CLin> = phases[..3].iter().map(|p| &ctx.u(&bus.id, p) - &un).collect();
        let u0n = ctx.u_init(&bus.id, NEUTRAL);
        let u0: Vec<Complex64> = phases[..3].iter().map(|p| ctx.u_init(&bus.id, p) - u0n).collect();
        let a = alpha();
        let mut seq_var = |seq: Seq, w: [Complex64; 3], row: usize| {
            let init = (u0[0] * w[0] + u0[1] * w[1] + u0[2] * w[2]) / 3.0;
            let v = ctx.sys.complex_var(Quantity::Sequence { bus: bus.id.clone(), seq }, init);
            let mut e = v.clone();
            for k in 0..3 {
                e = &e - &upn[k].cscale(w[k] / 3.0);
            }
            ctx.sys.add_complex_eq(e.into(), ConstraintTag::new(Family::Sequence, &bus.id, row));
            v
        };
        let one = Complex64::new(1.0, 0.0);
        let up = seq_var(Seq::Pos, [one, a, a * a], 0);
        let unq = seq_var(Seq::Neg, [one, a * a, a], 1);
        if let Some(f) = vuf {
            let e = &unq.abs_sqr() - &up.abs_sqr().scale(f * f);
            ctx.sys.add_le(e, ConstraintTag::new(Family::Vuf, &bus.id, 0));
        }
        if let Some(v) = vneg {
            upper(ctx, &unq, v / vb, ConstraintTag::new(Family::NegativeSequence, &bus.id, 0));
        }
    }
}
