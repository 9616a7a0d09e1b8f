//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p fourwire --test acceptance`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fourwire::bench::{active_envelopes, run_matrix, Instance, MatrixOptions};
use fourwire::fixtures;
use fourwire::form::{build, terminal_current_balance, Form, Formulation, FormulationConfig};
use fourwire::netmodel::Network;
use fourwire::qcqp::{ConstraintSystem, Family};
use fourwire::reduce::{sequence_components, vuf, Model};
use fourwire::solve::{run_opf, run_pf, Solution, SolverOptions, Start, Status};

type Voltages = BTreeMap<(String, String), Complex64>;

fn fixture(name: &str) -> Network {
    fixtures::by_name(name).unwrap_or_else(|| panic!("no fixture {name}"))
}

fn pf(net: &Network, form: Form, start: Start, opts: &SolverOptions) -> Result<(Formulation, Solution)> {
    let (f, s) = run_pf(net, form, &FormulationConfig::power_flow(), opts, start)?;
    ensure!(s.is_optimal(), "{form} power flow ended {}: {}", s.status, s.message);
    Ok((f, s))
}

fn opf(net: &Network, form: Form) -> Result<(Formulation, Solution)> {
    let (f, s) = run_opf(net, form, &FormulationConfig::default(), &SolverOptions::default(), Start::NoLoad)?;
    ensure!(s.is_optimal(), "{form} OPF ended {}: {}", s.status, s.message);
    Ok((f, s))
}

/// Largest deviation between two voltage sets, relative to the reference
/// magnitude, or to `floor` where the reference is smaller than that.
fn max_relative_deviation(reference: &Voltages, other: &Voltages, floor: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (k, v) in reference {
        let w = other.get(k).with_context(|| format!("terminal {}.{} missing", k.0, k.1))?;
        worst = worst.max((v - w).norm() / v.norm().max(floor));
    }
    Ok(worst)
}

fn pf_cross_validation() -> Result<String> {
    let t0 = Instant::now();
    let opts = SolverOptions::default();
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for name in ["f1", "f2", "f3", "synthetic30"] {
        let net = fixture(name);
        let (fi, si) = pf(&net, Form::Ivr, Start::NoLoad, &opts)?;
        let (fa, sa) = pf(&net, Form::Acr, Start::LoadAware, &opts)?;
        let dev = max_relative_deviation(&fi.voltages(&si.x), &fa.voltages(&sa.x), 1e-6 * 230.0)?;
        worst = worst.max(dev);
        parts.push(format!("{name} {dev:.1e}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure!(worst <= 1e-7, "max relative deviation {worst:.2e} > 1e-7 ({})", parts.join(", "));
    ensure!(secs < 5.0, "took {secs:.2} s");
    Ok(format!("max rel. deviation {worst:.1e} ({}), {secs:.2} s", parts.join(", ")))
}

fn kron_equivalence() -> Result<String> {
    let opts = SolverOptions { tol_pf: 1e-12, ..SolverOptions::default() };
    let four = fixture("kron-eq");
    let kron = Model::Kron.apply(&four)?;
    let (f4, s4) = pf(&four, Form::Ivr, Start::NoLoad, &opts)?;
    let (fk, sk) = pf(&kron, Form::Ivr, Start::NoLoad, &opts)?;
    let v4 = f4.voltages(&s4.x);
    let vk = fk.voltages(&sk.x);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for ((bus, t), v) in &vk {
        let w = v4.get(&(bus.clone(), t.clone())).with_context(|| format!("{bus}.{t} missing in four-wire"))?;
        worst = worst.max((v - w).norm() / fk.bases.vb(bus));
        n += 1;
    }
    ensure!(n > 0, "no phase terminals compared");
    ensure!(worst <= 1e-10, "phase voltages differ by {worst:.2e} pu");
    Ok(format!("{n} phase terminals, max difference {worst:.1e} pu"))
}

fn relaxation_inclusion() -> Result<String> {
    let mut worst: f64 = 0.0;
    for name in fixtures::NAMES {
        let net = fixture(name);
        let (fi, si) = opf(&net, Form::Ivr)?;
        let fa = build(&net, Form::Acr, &FormulationConfig::default())?;
        let xa = fa.point_from_state(&fi.state_from_point(&si.x));
        let v = fa.sys.max_violation(&xa)?;
        ensure!(v <= 1e-8, "{name}: mapped IVR optimum violates ACR by {v:.2e}");
        worst = worst.max(v);
    }
    Ok(format!("{} fixtures, max ACR violation {worst:.1e}", fixtures::NAMES.len()))
}

fn kcl_residual(sys: &ConstraintSystem, x: &[f64], bus: &str, t: &str) -> Result<f64> {
    let r = sys.eval_residuals(x)?;
    let rows: Vec<f64> = sys
        .constraints
        .iter()
        .zip(&r)
        .filter(|(c, _)| c.tag.family == Family::Kcl && c.tag.id == bus && c.tag.terminal.as_deref() == Some(t))
        .map(|(_, v)| *v)
        .collect();
    ensure!(!rows.is_empty(), "no KCL rows at {bus}.{t}");
    Ok(rows.iter().map(|v| v * v).sum::<f64>().sqrt())
}

fn nonphysical_grounding() -> Result<String> {
    let opts = SolverOptions::default();
    let cfg = FormulationConfig::power_flow();
    let (fg, sg) = pf(&fixture("f3-grounded"), Form::Ivr, Start::NoLoad, &opts)?;
    let state = fg.state_from_point(&sg.x);

    let f3 = fixture("f3");
    let fa = build(&f3, Form::Acr, &cfg)?;
    let xa = fa.point_from_state(&state);
    let viol = fa.sys.max_violation(&xa)?;
    ensure!(viol <= 1e-8, "point is not ACR-feasible: violation {viol:.2e}");
    let un = fa.voltages(&xa).get(&("m".into(), "n".into())).copied().context("no neutral at m")?;
    ensure!(un.norm() < 1e-8, "|U_n(m)| = {:.2e} V", un.norm());
    let mismatch = terminal_current_balance(&fa.net, &fa.state_from_point(&xa))
        .get(&("m".into(), "n".into()))
        .copied()
        .context("no balance at m.n")?
        .norm();
    ensure!(mismatch > 0.1, "neutral KCL mismatch only {mismatch:.3e} A");

    let fi = build(&f3, Form::Ivr, &cfg)?;
    let xi = fi.point_from_state(&state);
    let resid = kcl_residual(&fi.sys, &xi, "m", "n")? * fi.bases.ib("m");
    ensure!(resid > 0.1, "IVR residual only {resid:.3e} A");
    Ok(format!(
        "ACR violation {viol:.1e}, |U_n(m)| = {:.1e} V, neutral mismatch {mismatch:.2} A, IVR residual {resid:.2} A",
        un.norm()
    ))
}

fn violation_ordering() -> Result<String> {
    let inst = Instance { name: "f2-opf".into(), network: fixture("f2-opf") };
    let opts = MatrixOptions { timing: false, ..MatrixOptions::default() };
    let report = run_matrix(&[inst], &[Form::Ivr], &Model::ALL, &opts);
    let pct = |m: Model| -> Result<f64> {
        let r = report.cell("f2-opf", m, Form::Ivr).context("missing cell")?;
        ensure!(r.eval_status == "ok", "{m}: status {} eval {} ({})", r.status, r.eval_status, r.message);
        r.violation_pct.context("no bound")
    };
    let (fw, kr, bal) = (pct(Model::FourWire)?, pct(Model::Kron)?, pct(Model::Balanced)?);
    let line = format!("four-wire {fw:.2e} %, Kron {kr:.3} %, balanced {bal:.3} %");
    ensure!(fw <= 1e-6, "four-wire violation too large: {line}");
    ensure!(kr > 0.0, "Kron-reduced shows no violation: {line}");
    ensure!(bal >= kr, "balanced below Kron-reduced: {line}");
    Ok(line)
}

fn kron_form_agreement() -> Result<String> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for name in fixtures::NAMES {
        let net = Model::Kron.apply(&fixture(name))?;
        let (_, si) = opf(&net, Form::Ivr).with_context(|| name.to_string())?;
        let (_, sa) = opf(&net, Form::Acr).with_context(|| name.to_string())?;
        let d = (si.objective - sa.objective).abs();
        ensure!(d <= 1e-6, "{name}: IVR {} vs ACR {}", si.objective, sa.objective);
        worst = worst.max(d);
        n += 1;
    }
    Ok(format!("{n} Kron-reduced fixtures, max objective gap {worst:.1e}"))
}

/// Column `j` of the Lagrangian Hessian by central differences of
/// `J(x)ᵀλ`; the objective gradient cancels.
fn fd_hessian(sys: &ConstraintSystem, x: &[f64], lambda: &[f64], h: f64) -> Vec<Vec<f64>> {
    let c = sys.compile();
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let gp = c.jacobian(&xp).tmul_vec(lambda);
        xp[j] = x[j] - h;
        let gm = c.jacobian(&xp).tmul_vec(lambda);
        xp[j] = x[j];
        cols.push(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    cols
}

fn hessian_certificate() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let net = fixture("f2-opf");
    let mut parts = Vec::new();
    for form in [Form::Ivr, Form::Acr] {
        let f = build(&net, form, &FormulationConfig::default())?;
        let sys = &f.sys;
        let lambda: Vec<f64> = (0..sys.n_cons()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let points: Vec<Vec<f64>> =
            (0..2).map(|_| (0..sys.n_vars()).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();

        // The analytic Hessian is assembled once per multiplier vector; any
        // dependence on the point would show up as a difference here.
        let h1 = sys.eval_lagrangian_hessian(&lambda)?;
        let _ = sys.eval_jacobian(&points[0])?;
        let h2 = sys.eval_lagrangian_hessian(&lambda)?;
        ensure!(h1 == h2, "{form}: analytic Hessian differs between points");
        let dense = h1.to_dense_symmetric();
        let scale = dense.iter().fold(1.0f64, |m, v| m.max(v.abs()));

        let mut worst: f64 = 0.0;
        for x in &points {
            let fd = fd_hessian(sys, x, &lambda, 1e-2);
            for (j, col) in fd.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    worst = worst.max((v - dense[(i, j)]).abs() / scale);
                }
            }
        }
        ensure!(worst <= 1e-6, "{form}: finite-difference Hessian off by {worst:.2e} relative");
        parts.push(format!("{form} n={} nnz={} fd {worst:.1e}", sys.n_vars(), h1.nnz()));
    }
    Ok(format!("bitwise equal; {}", parts.join(", ")))
}

fn variable_ratio() -> Result<String> {
    let cfg = FormulationConfig::default();
    let mut parts = Vec::new();
    for n in [2, 3, 6, 10, 25] {
        let net = fixtures::chain(n);
        let four = build(&net, Form::Ivr, &cfg)?.n_voltage_vars();
        let kron = build(&Model::Kron.apply(&net)?, Form::Ivr, &cfg)?.n_voltage_vars();
        ensure!(kron > 0 && 3 * four == 4 * kron, "chain({n}): {four} / {kron}");
        parts.push(format!("{four}/{kron}"));
    }
    Ok(format!("ratio 4/3 exactly: {}", parts.join(", ")))
}

fn sequence_oracle() -> Result<String> {
    let a = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
    let one = Complex64::new(1.0, 0.0);
    let m = [[one, one, one], [one, a, a * a], [one, a * a, a]];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut phasor = |scale: f64| Complex64::from_polar(rng.random_range(0.0..scale), rng.random_range(-PI..PI));

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let v = [phasor(400.0), phasor(400.0), phasor(400.0)];
        let got = sequence_components(v[0], v[1], v[2]);
        let size = v.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for (row, g) in m.iter().zip(got) {
            let want = (row[0] * v[0] + row[1] * v[1] + row[2] * v[2]) / 3.0;
            worst = worst.max((g - want).norm() / size);
        }
    }
    ensure!(worst <= 1e-12, "sequence components off by {worst:.2e}");

    let mut worst_vuf: f64 = 0.0;
    for _ in 0..100 {
        let u = phasor(400.0) + Complex64::new(1.0, 0.0);
        worst_vuf = worst_vuf.max(vuf(u, u * a * a, u * a));
    }
    ensure!(worst_vuf <= 1e-14, "balanced VUF {worst_vuf:.2e}");
    Ok(format!("max deviation {worst:.1e}, balanced VUF {worst_vuf:.1e}"))
}

fn solver_soundness() -> Result<String> {
    let mut checked = 0;
    for name in fixtures::NAMES {
        for model in Model::ALL {
            let Ok(net) = model.apply(&fixture(name)) else { continue };
            for form in [Form::Ivr, Form::Acr] {
                let (f, s) = run_opf(&net, form, &FormulationConfig::default(), &SolverOptions::default(), Start::NoLoad)?;
                if s.status == Status::Optimal {
                    let v = f.sys.max_violation(&s.x)?;
                    ensure!(v <= 1e-8, "{name}/{model}/{form}: optimal with violation {v:.2e}");
                    checked += 1;
                }
            }
        }
    }
    ensure!(checked > 0, "no optimal results to check");

    let cap = SolverOptions::default().max_iter;
    ensure!(cap == 500, "default iteration cap is {cap}");
    let short = SolverOptions { max_iter: 3, ..SolverOptions::default() };
    let (_, s) = run_opf(&fixture("f2-opf"), Form::Acr, &FormulationConfig::default(), &short, Start::NoLoad)?;
    ensure!(s.status == Status::IterationLimit && s.iterations <= 3, "3-iteration cap gave {} after {}", s.status, s.iterations);

    let mut heavy = fixture("f1-opf");
    for d in heavy.loads.values_mut() {
        d.p_nom = d.p_nom.map(|p| p * 1000.0);
        d.q_nom = d.q_nom.map(|q| q * 1000.0);
    }
    let (_, s) = run_opf(&heavy, Form::Ivr, &FormulationConfig::default(), &SolverOptions::default(), Start::NoLoad)?;
    ensure!(s.status != Status::Optimal, "overloaded feeder reported optimal");
    ensure!(s.iterations <= cap, "{} iterations exceed the cap", s.iterations);
    Ok(format!("{checked} optimal OPFs re-verified; cap 500; overloaded feeder ends {} after {}", s.status, s.iterations))
}

/// Bisection on the DG output until the bound is met with equality, using
/// power flows only.
fn envelope_oracle(net: &Network, bus: &str, bound: f64) -> Result<(f64, fourwire::form::NetworkState)> {
    let opts = SolverOptions { tol_pf: 1e-12, ..SolverOptions::default() };
    let at = |p: f64| -> Result<(f64, fourwire::form::NetworkState)> {
        let mut n = net.clone();
        let g = n.generators.get_mut("dg1").context("no dg1")?;
        g.p_min = p.into();
        g.p_max = p.into();
        g.q_min = 0.0.into();
        g.q_max = 0.0.into();
        let (f, s) = pf(&n, Form::Ivr, Start::NoLoad, &opts)?;
        let vmax = s.recovered.as_ref().context("no report")?.buses[bus].max_phase_neutral;
        Ok((vmax, f.state_from_point(&s.x)))
    };
    let (mut lo, mut hi) = (0.0, net.generators["dg1"].p_max.get(0));
    if at(hi)?.0 <= bound {
        bail!("bound not reachable at full output");
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if at(mid)?.0 > bound {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, at(lo)?.1))
}

fn envelope_activation() -> Result<String> {
    let net = fixture("f1-opf");
    let bound = net.buses["b1"].bounds.vpn_max.context("no bound")?;
    let (f, s) = opf(&net, Form::Ivr)?;
    let active = f
        .sys
        .constraints
        .iter()
        .filter(|c| c.tag.family == Family::PhaseNeutral && c.eval(&s.x) >= -1e-6)
        .count();
    ensure!(active >= 1, "no phase-to-neutral bound active");
    ensure!(active_envelopes(&f.sys, &s.x, 1e-6) >= active);

    let (p, state) = envelope_oracle(&net, "b1", bound)?;
    let oracle = f.sys.eval_objective(&f.point_from_state(&state));
    let gap = (oracle - s.objective).abs();
    ensure!(gap <= 1e-6, "objective {} vs oracle {oracle} (gap {gap:.2e})", s.objective);
    Ok(format!("{active} active bound(s); DG {:.1} W; objective {:.9} vs oracle {oracle:.9} (gap {gap:.1e})", p, s.objective))
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Result<String>); 11] = [
        ("power flow cross-validation", pf_cross_validation),
        ("Kron equivalence", kron_equivalence),
        ("relaxation inclusion", relaxation_inclusion),
        ("non-physical grounding", nonphysical_grounding),
        ("violation ordering", violation_ordering),
        ("Kron-reduced IVR/ACR agreement", kron_form_agreement),
        ("quadratic-structure certificate", hessian_certificate),
        ("variable-count ratio", variable_ratio),
        ("sequence/VUF oracle", sequence_oracle),
        ("solver soundness", solver_soundness),
        ("envelope activation", envelope_activation),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(anyhow::anyhow!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {e:#} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
