//! Primal-dual interior-point method for quadratically constrained
//! programs with a linear objective.
//!
//! Inequalities `g(x) <= 0` become `g(x) + s = 0` with `s >= 0`; all bounds
//! enter a logarithmic barrier. Each iteration solves the regularized KKT
//! system `[[W + Σ + δw I, J'], [J, -δc I]]`, raising `δw` until the inertia
//! is `(n, m, 0)`, and steps along an ℓ1-merit line search with a
//! second-order correction.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::qcqp::{Compiled, ConstraintSystem, Sense};

use super::dense::BunchKaufman;
use super::ldl::{Inertia, SparseLdl};
use super::{Solution, SolveError, SolverOptions, Status};

const DENSE_BELOW: usize = 200;
const KAPPA_EPS: f64 = 10.0;
const TAU_MIN: f64 = 0.99;
const ARMIJO: f64 = 1e-4;
const ZERO_PIVOT: f64 = 1e-13;

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Problem<'a> {
    sys: &'a ConstraintSystem,
    comp: Compiled,
    nx: usize,
    m: usize,
    ny: usize,
    /// Slack index in `y` of each inequality row.
    slack: Vec<Option<usize>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    grad: Vec<f64>,
    row_scale: Vec<f64>,
    obj_scale: f64,
    /// Lower-triangle KKT pattern: Hessian, y diagonal, Jacobian, slack
    /// columns, constraint diagonal.
    pattern: Vec<(usize, usize)>,
    n_hess: usize,
    n_jac: usize,
}

impl<'a> Problem<'a> {
    fn new(sys: &'a ConstraintSystem, x0: &[f64]) -> Self {
        let comp = sys.compile();
        let nx = sys.n_vars();
        let m = sys.n_cons();
        let mut slack = vec![None; m];
        let mut ny = nx;
        for (k, c) in sys.constraints.iter().enumerate() {
            if c.sense == Sense::Le {
                slack[k] = Some(ny);
                ny += 1;
            }
        }
        let mut lo: Vec<f64> = sys.variables.iter().map(|v| v.lower).collect();
        let mut hi: Vec<f64> = sys.variables.iter().map(|v| v.upper).collect();
        lo.resize(ny, 0.0);
        hi.resize(ny, f64::INFINITY);
        let mut grad = vec![0.0; ny];
        for &(i, c) in &sys.objective.terms {
            grad[i] += c;
        }
        let gmax = norm_inf(&grad);
        let obj_scale = if gmax > 100.0 { 100.0 / gmax } else { 1.0 };
        for g in grad.iter_mut() {
            *g *= obj_scale;
        }
        let jac = comp.jacobian(x0);
        let row_scale: Vec<f64> = (0..m)
            .map(|k| {
                let rmax = jac.row(k).fold(0.0f64, |a, (_, v)| a.max(v.abs()));
                if rmax > 100.0 {
                    100.0 / rmax
                } else {
                    1.0
                }
            })
            .collect();
        let hess = comp.hessian(&vec![0.0; m]);
        let mut pattern = Vec::new();
        for r in 0..nx {
            for p in hess.indptr[r]..hess.indptr[r + 1] {
                pattern.push((r, hess.indices[p]));
            }
        }
        let n_hess = pattern.len();
        pattern.extend((0..ny).map(|i| (i, i)));
        for k in 0..m {
            for p in jac.indptr[k]..jac.indptr[k + 1] {
                pattern.push((ny + k, jac.indices[p]));
            }
        }
        let n_jac = jac.nnz();
        for (k, s) in slack.iter().enumerate() {
            if let Some(s) = s {
                pattern.push((ny + k, *s));
            }
        }
        pattern.extend((0..m).map(|k| (ny + k, ny + k)));
        Self { sys, comp, nx, m, ny, slack, lo, hi, grad, row_scale, obj_scale, pattern, n_hess, n_jac }
    }

    fn constraints(&self, y: &[f64]) -> Vec<f64> {
        let x = &y[..self.nx];
        (0..self.m)
            .map(|k| {
                let s = self.slack[k].map_or(0.0, |i| y[i]);
                self.row_scale[k] * (self.sys.constraints[k].eval(x) + s)
            })
            .collect()
    }

    /// Scaled Jacobian values in pattern order (x part, then slacks).
    fn jacobian(&self, y: &[f64]) -> (Vec<f64>, crate::qcqp::Csr) {
        let mut jac = self.comp.jacobian(&y[..self.nx]);
        for k in 0..self.m {
            for p in jac.indptr[k]..jac.indptr[k + 1] {
                jac.data[p] *= self.row_scale[k];
            }
        }
        let slack_vals: Vec<f64> =
            (0..self.m).filter(|k| self.slack[*k].is_some()).map(|k| self.row_scale[k]).collect();
        (slack_vals, jac)
    }

    fn jt_mul(&self, jac: &crate::qcqp::Csr, lambda: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ny];
        for k in 0..self.m {
            for (j, v) in jac.row(k) {
                out[j] += v * lambda[k];
            }
            if let Some(s) = self.slack[k] {
                out[s] += self.row_scale[k] * lambda[k];
            }
        }
        out
    }

    fn barrier(&self, y: &[f64], mu: f64) -> f64 {
        let mut phi = dot(&self.grad, y);
        for i in 0..self.ny {
            if self.lo[i].is_finite() {
                phi -= mu * (y[i] - self.lo[i]).ln();
            }
            if self.hi[i].is_finite() {
                phi -= mu * (self.hi[i] - y[i]).ln();
            }
        }
        phi
    }

    fn barrier_grad(&self, y: &[f64], mu: f64) -> Vec<f64> {
        (0..self.ny)
            .map(|i| {
                let mut g = self.grad[i];
                if self.lo[i].is_finite() {
                    g -= mu / (y[i] - self.lo[i]);
                }
                if self.hi[i].is_finite() {
                    g += mu / (self.hi[i] - y[i]);
                }
                g
            })
            .collect()
    }

    /// Largest step in (0, 1] keeping `v + a dv` at least `(1 - tau)` of
    /// its distance to the bounds.
    fn max_step(&self, y: &[f64], dy: &[f64], tau: f64) -> f64 {
        let mut a: f64 = 1.0;
        for i in 0..self.ny {
            if dy[i] < 0.0 && self.lo[i].is_finite() {
                a = a.min(-tau * (y[i] - self.lo[i]) / dy[i]);
            }
            if dy[i] > 0.0 && self.hi[i].is_finite() {
                a = a.min(tau * (self.hi[i] - y[i]) / dy[i]);
            }
        }
        a
    }
}

fn dual_step(z: &[f64], dz: &[f64], tau: f64) -> f64 {
    let mut a: f64 = 1.0;
    for (zi, di) in z.iter().zip(dz) {
        if *di < 0.0 {
            a = a.min(-tau * zi / di);
        }
    }
    a
}

/// KKT values with their factor; the sparse factor lives with the caller.
struct Kkt {
    dense: Option<Box<BunchKaufman>>,
    values: Vec<f64>,
}

impl Kkt {
    fn solve(&self, sparse: &Option<SparseLdl>, pattern: &[(usize, usize)], rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.raw_solve(sparse, &mut x);
        // Two steps of iterative refinement against the factored matrix.
        for _ in 0..2 {
            let mut r = rhs.to_vec();
            for (&(i, j), v) in pattern.iter().zip(&self.values) {
                r[i] -= v * x[j];
                if i != j {
                    r[j] -= v * x[i];
                }
            }
            if norm_inf(&r) <= 1e-14 * norm_inf(rhs).max(1.0) {
                break;
            }
            self.raw_solve(sparse, &mut r);
            for (xi, ri) in x.iter_mut().zip(&r) {
                *xi += ri;
            }
        }
        x
    }

    fn raw_solve(&self, sparse: &Option<SparseLdl>, b: &mut [f64]) {
        match (&self.dense, sparse) {
            (Some(f), _) => f.solve(b),
            (None, Some(f)) => f.solve(b),
            (None, None) => unreachable!("no factorization"),
        }
    }
}

fn factorize(pattern: &[(usize, usize)], values: Vec<f64>, dim: usize, sparse: &mut Option<SparseLdl>) -> (Kkt, Inertia) {
    if let Some(ldl) = sparse.as_mut() {
        let inertia = ldl.factor(&values, ZERO_PIVOT);
        return (Kkt { dense: None, values }, inertia);
    }
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for (&(i, j), v) in pattern.iter().zip(&values) {
        a[(i, j)] += v;
        if i != j {
            a[(j, i)] += v;
        }
    }
    let f = BunchKaufman::factor(&a, ZERO_PIVOT);
    let inertia = f.inertia;
    (Kkt { dense: Some(Box::new(f)), values }, inertia)
}

pub fn ipm_solve(sys: &ConstraintSystem, opts: &SolverOptions) -> Result<Solution, SolveError> {
    ipm_solve_from(sys, &sys.initial_point(), opts)
}

/// Interior-point solve from a given starting point. Variables with equal
/// bounds are eliminated before solving.
pub fn ipm_solve_from(sys: &ConstraintSystem, x0: &[f64], opts: &SolverOptions) -> Result<Solution, SolveError> {
    opts.check()?;
    if x0.len() != sys.n_vars() {
        return Err(crate::qcqp::QcqpError::DimensionMismatch { expected: sys.n_vars(), got: x0.len() }.into());
    }
    let fixed: BTreeMap<usize, f64> =
        sys.variables.iter().enumerate().filter(|(_, v)| v.lower == v.upper).map(|(i, v)| (i, v.lower)).collect();
    if fixed.is_empty() {
        return run(sys, x0, opts);
    }
    let reduced = sys.substitute(&fixed);
    let keep: Vec<usize> = (0..sys.n_vars()).filter(|i| !fixed.contains_key(i)).collect();
    let x0r: Vec<f64> = keep.iter().map(|&i| x0[i]).collect();
    let sol = run(&reduced, &x0r, opts)?;
    let mut x = x0.to_vec();
    for (&i, &v) in &fixed {
        x[i] = v;
    }
    for (k, &i) in keep.iter().enumerate() {
        x[i] = sol.x[k];
    }
    // Multipliers of rows removed by the substitution are zero.
    let mut duals = vec![0.0; sys.n_cons()];
    let mut it = reduced.constraints.iter().zip(&sol.duals).peekable();
    for (k, c) in sys.constraints.iter().enumerate() {
        if let Some((rc, d)) = it.peek() {
            if rc.tag == c.tag {
                duals[k] = **d;
                it.next();
            }
        }
    }
    let max_violation = sys.max_violation(&x)?;
    let mut status = sol.status;
    let mut message = sol.message;
    if status == Status::Optimal && max_violation > opts.tol_kkt {
        status = Status::Infeasible;
        message = format!("eliminated rows violated by {max_violation:.3e}");
    }
    Ok(Solution { status, objective: sys.eval_objective(&x), x, duals, max_violation, message, ..sol })
}

fn run(sys: &ConstraintSystem, x0: &[f64], opts: &SolverOptions) -> Result<Solution, SolveError> {
    let start = Instant::now();
    let p = Problem::new(sys, x0);
    let (nx, ny, m) = (p.nx, p.ny, p.m);
    let dim = ny + m;

    // Starting point pushed into the interior of the bounds.
    let mut y = vec![0.0; ny];
    y[..nx].copy_from_slice(x0);
    for k in 0..m {
        if let Some(s) = p.slack[k] {
            y[s] = (-sys.constraints[k].eval(x0)).max(0.0);
        }
    }
    for i in 0..ny {
        let (l, u) = (p.lo[i], p.hi[i]);
        let mut pl = if l.is_finite() { 1e-2 * l.abs().max(1.0) } else { 0.0 };
        let mut pu = if u.is_finite() { 1e-2 * u.abs().max(1.0) } else { 0.0 };
        if l.is_finite() && u.is_finite() {
            pl = pl.min(1e-2 * (u - l));
            pu = pu.min(1e-2 * (u - l));
        }
        if l.is_finite() {
            y[i] = y[i].max(l + pl);
        }
        if u.is_finite() {
            y[i] = y[i].min(u - pu);
        }
    }
    let has_lo: Vec<bool> = p.lo.iter().map(|v| v.is_finite()).collect();
    let has_hi: Vec<bool> = p.hi.iter().map(|v| v.is_finite()).collect();
    let n_bounds = has_lo.iter().chain(&has_hi).filter(|b| **b).count();
    let mut zl: Vec<f64> = has_lo.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
    let mut zu: Vec<f64> = has_hi.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
    let mut lambda = vec![0.0; m];
    let mut mu = opts.mu_init;
    let mu_min = opts.tol_kkt / 10.0;
    let mut tau = TAU_MIN.max(1.0 - mu);
    let mut nu = 1.0;
    let mut delta_last: f64 = 0.0;
    let mut sparse = if ny >= DENSE_BELOW { Some(SparseLdl::analyze(dim, &p.pattern)) } else { None };
    let mut failures = 0;
    let mut message = String::new();
    let mut status = Status::IterationLimit;
    let mut iterations = 0;

    let unscale_duals = |lambda: &[f64]| -> Vec<f64> {
        lambda.iter().zip(&p.row_scale).map(|(l, d)| l * d / p.obj_scale).collect()
    };

    while iterations <= opts.max_iter {
        let c = p.constraints(&y);
        let (slack_vals, jac) = p.jacobian(&y);
        let jtl = p.jt_mul(&jac, &lambda);
        let rd: Vec<f64> = (0..ny).map(|i| p.grad[i] + jtl[i] - zl[i] + zu[i]).collect();
        let primal = norm_inf(&c);
        let errors = |mu: f64| {
            let mut compl: f64 = 0.0;
            for i in 0..ny {
                if has_lo[i] {
                    compl = compl.max(((y[i] - p.lo[i]) * zl[i] - mu).abs());
                }
                if has_hi[i] {
                    compl = compl.max(((p.hi[i] - y[i]) * zu[i] - mu).abs());
                }
            }
            let zsum: f64 = zl.iter().chain(&zu).map(|v| v.abs()).sum();
            let lsum: f64 = lambda.iter().map(|v| v.abs()).sum();
            let sd = ((lsum + zsum) / ((m + n_bounds).max(1) as f64)).max(100.0) / 100.0;
            let sc = (zsum / (n_bounds.max(1) as f64)).max(100.0) / 100.0;
            (norm_inf(&rd) / sd).max(primal).max(compl / sc)
        };
        let e0 = errors(0.0);
        if !e0.is_finite() {
            status = Status::NumericalFailure;
            message = format!("non-finite KKT error at iteration {iterations}");
            break;
        }
        if e0 <= opts.tol_kkt && sys.max_violation(&y[..nx])? <= opts.tol_kkt {
            status = Status::Optimal;
            message = format!("converged, scaled KKT error {e0:.3e}");
            break;
        }
        if iterations == opts.max_iter {
            message = format!("no convergence in {} iterations, KKT error {e0:.3e}", opts.max_iter);
            break;
        }
        if norm_inf(&lambda) > 1e12 && primal > 1e-6 {
            status = Status::Infeasible;
            message = format!("multipliers diverge with infeasibility {primal:.3e}");
            break;
        }
        while mu > mu_min && errors(mu) <= KAPPA_EPS * mu {
            mu = (opts.mu_reduction * mu).max(mu_min);
            tau = TAU_MIN.max(1.0 - mu);
        }

        // KKT matrix values in pattern order.
        let hess = p.comp.hessian(&lambda.iter().zip(&p.row_scale).map(|(l, d)| l * d).collect::<Vec<_>>());
        let sigma: Vec<f64> = (0..ny)
            .map(|i| {
                let mut s = 0.0;
                if has_lo[i] {
                    s += zl[i] / (y[i] - p.lo[i]);
                }
                if has_hi[i] {
                    s += zu[i] / (p.hi[i] - y[i]);
                }
                s
            })
            .collect();
        let build = |dw: f64, dc: f64| -> Vec<f64> {
            let mut v = Vec::with_capacity(p.pattern.len());
            v.extend_from_slice(&hess.data);
            debug_assert_eq!(v.len(), p.n_hess);
            v.extend(sigma.iter().map(|s| s + dw));
            debug_assert_eq!(jac.data.len(), p.n_jac);
            v.extend_from_slice(&jac.data);
            v.extend_from_slice(&slack_vals);
            v.extend(std::iter::repeat_n(-dc, m));
            v
        };
        let want = Inertia { positive: ny, negative: m, zero: 0 };
        let (mut kkt, mut inertia) = factorize(&p.pattern, build(0.0, 0.0), dim, &mut sparse);
        let mut dc = 0.0;
        if inertia != want {
            if inertia.zero > 0 {
                dc = 1e-8 * mu.powf(0.25);
            }
            let mut dw =
                if delta_last == 0.0 { 1e-4f64.max(opts.regularization_min) } else { (delta_last / 3.0).max(opts.regularization_min) };
            let dw0 = dw;
            loop {
                let (k2, i2) = factorize(&p.pattern, build(dw, dc), dim, &mut sparse);
                kkt = k2;
                inertia = i2;
                if inertia == want {
                    delta_last = dw;
                    break;
                }
                // Zero pivots or a runaway δw point at dependent constraint
                // rows; regularize them and start over.
                if dc == 0.0 && (inertia.zero > 0 || dw > 1e8) {
                    dc = 1e-8 * mu.powf(0.25).max(1e-2);
                    dw = dw0;
                    continue;
                }
                dw *= if delta_last == 0.0 { 100.0 } else { 8.0 };
                if dw > 1e40 {
                    break;
                }
            }
            if inertia != want {
                status = Status::NumericalFailure;
                message = format!("inertia correction failed at iteration {iterations}");
                log::debug!("inertia {inertia:?}, wanted {want:?}, dc {dc:.1e}");
                break;
            }
        }

        let bgrad = p.barrier_grad(&y, mu);
        let mut rhs = vec![0.0; dim];
        for i in 0..ny {
            rhs[i] = -(bgrad[i] + jtl[i]);
        }
        for k in 0..m {
            rhs[ny + k] = -c[k];
        }
        let sol = kkt.solve(&sparse, &p.pattern, &rhs);
        let dy = sol[..ny].to_vec();
        let dl = sol[ny..].to_vec();
        if dy.iter().chain(&dl).any(|v| !v.is_finite()) {
            status = Status::NumericalFailure;
            message = format!("non-finite step at iteration {iterations}");
            break;
        }

        // Merit line search.
        let lmax = lambda.iter().zip(&dl).fold(0.0f64, |a, (l, d)| a.max((l + d).abs()));
        if nu < lmax {
            nu = lmax * 1.1 + 1e-6;
        }
        let c1 = |c: &[f64]| c.iter().map(|v| v.abs()).sum::<f64>();
        let merit0 = p.barrier(&y, mu) + nu * c1(&c);
        let slope = dot(&bgrad, &dy) - nu * c1(&c);
        let amax = p.max_step(&y, &dy, tau);
        let mut alpha = amax;
        let mut step_dy = dy.clone();
        let mut step_dl = dl.clone();
        let mut accepted = false;
        let trial = |d: &[f64], a: f64| -> (Vec<f64>, f64) {
            let yt: Vec<f64> = y.iter().zip(d).map(|(v, dv)| v + a * dv).collect();
            let mt = p.barrier(&yt, mu) + nu * c1(&p.constraints(&yt));
            (yt, mt)
        };
        let mut first = true;
        while alpha >= 1e-12 {
            let (_, mt) = trial(&dy, alpha);
            if mt.is_finite() && mt <= merit0 + ARMIJO * alpha * slope.min(0.0) {
                accepted = true;
                break;
            }
            if first && alpha == amax {
                first = false;
                // Second-order correction for the constraint curvature.
                let (yt, _) = trial(&dy, alpha);
                let ct = p.constraints(&yt);
                let mut rs = rhs.clone();
                for k in 0..m {
                    rs[ny + k] = -(alpha * c[k] + ct[k]);
                }
                let soc = kkt.solve(&sparse, &p.pattern, &rs);
                let d_soc = soc[..ny].to_vec();
                let a_soc = p.max_step(&y, &d_soc, tau);
                let (_, ms) = trial(&d_soc, a_soc);
                if ms.is_finite() && ms <= merit0 + ARMIJO * alpha * slope.min(0.0) {
                    step_dy = d_soc;
                    step_dl = soc[ny..].to_vec();
                    alpha = a_soc;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            failures += 1;
            alpha = amax;
            step_dy = dy.clone();
            step_dl = dl.clone();
            log::debug!("ipm iteration {iterations}: line search failed, taking full step");
            if failures >= 10 {
                status = if primal > 1e-6 { Status::Infeasible } else { Status::NumericalFailure };
                message = format!("restoration failed at iteration {iterations}, infeasibility {primal:.3e}");
                break;
            }
        } else {
            failures = 0;
        }

        // Bound multiplier steps from the accepted primal direction.
        let dzl: Vec<f64> = (0..ny)
            .map(|i| if has_lo[i] { mu / (y[i] - p.lo[i]) - zl[i] - zl[i] / (y[i] - p.lo[i]) * step_dy[i] } else { 0.0 })
            .collect();
        let dzu: Vec<f64> = (0..ny)
            .map(|i| if has_hi[i] { mu / (p.hi[i] - y[i]) - zu[i] + zu[i] / (p.hi[i] - y[i]) * step_dy[i] } else { 0.0 })
            .collect();
        let az = dual_step(&zl, &dzl, tau).min(dual_step(&zu, &dzu, tau));
        for i in 0..ny {
            y[i] += alpha * step_dy[i];
        }
        for k in 0..m {
            lambda[k] += alpha * step_dl[k];
        }
        const KS: f64 = 1e10;
        for i in 0..ny {
            if has_lo[i] {
                let s = y[i] - p.lo[i];
                zl[i] = (zl[i] + az * dzl[i]).clamp(mu / (KS * s), KS * mu / s);
            }
            if has_hi[i] {
                let s = p.hi[i] - y[i];
                zu[i] = (zu[i] + az * dzu[i]).clamp(mu / (KS * s), KS * mu / s);
            }
        }
        log::debug!(
            "ipm iteration {iterations}: mu {mu:.1e}, kkt {e0:.3e}, infeasibility {primal:.3e}, step {alpha:.3e}, reg {}",
            if inertia == want { delta_last } else { 0.0 }
        );
        iterations += 1;
    }
    let x = y[..nx].to_vec();
    let max_violation = sys.max_violation(&x)?;
    if status == Status::Optimal && max_violation > opts.tol_kkt {
        status = Status::NumericalFailure;
    }
    Ok(Solution {
        status,
        objective: sys.eval_objective(&x),
        duals: unscale_duals(&lambda),
        x,
        iterations,
        wall_time: start.elapsed().as_secs_f64(),
        max_violation,
        message,
        recovered: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcqp::{ConstraintTag, Family, LinExpr, Part, Quantity, VarKey};

    fn key(i: usize) -> VarKey {
        VarKey::new(Quantity::LoadCurrent { load: format!("v{i}") }, Part::Re)
    }

    #[test]
    fn bound_active_linear_program() {
        let mut s = ConstraintSystem::new();
        let p = s.add_var(key(0), 0.0, 5.0, 0.0);
        s.objective = LinExpr { terms: vec![(p, -1.0)], constant: 0.0 };
        let sol = ipm_solve(&s, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.x[0] - 5.0).abs() < 1e-7);
    }

    #[test]
    fn minimizes_over_disc() {
        // min x + y on x^2 + y^2 <= 1: optimum at -(1, 1)/sqrt(2)
        let mut s = ConstraintSystem::new();
        let a = s.free_var(key(0), 0.0);
        let b = s.free_var(key(1), 0.0);
        let disc = &(&LinExpr::var(a).square() + &LinExpr::var(b).square()) + &LinExpr::constant(-1.0);
        s.add_le(disc, ConstraintTag::new(Family::Auxiliary, "disc", 0));
        s.objective = &LinExpr::var(a) + &LinExpr::var(b);
        let sol = ipm_solve(&s, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal, "{}", sol.message);
        let h = -(0.5f64.sqrt());
        assert!((sol.x[0] - h).abs() < 1e-7 && (sol.x[1] - h).abs() < 1e-7);
        assert!((sol.duals[0] - 0.5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn nonconvex_equality() {
        // min x on the unit circle: optimum (-1, 0)
        let mut s = ConstraintSystem::new();
        let a = s.free_var(key(0), 0.3);
        let b = s.free_var(key(1), 0.9);
        let circle = &(&LinExpr::var(a).square() + &LinExpr::var(b).square()) + &LinExpr::constant(-1.0);
        s.add_eq(circle, ConstraintTag::new(Family::Auxiliary, "c", 0));
        s.objective = LinExpr::var(a);
        let sol = ipm_solve(&s, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal, "{}", sol.message);
        assert!((sol.x[0] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut s = ConstraintSystem::new();
        let a = s.free_var(key(0), 0.3);
        let b = s.free_var(key(1), 0.9);
        let circle = &(&LinExpr::var(a).square() + &LinExpr::var(b).square()) + &LinExpr::constant(-1.0);
        s.add_eq(circle, ConstraintTag::new(Family::Auxiliary, "c", 0));
        s.objective = LinExpr::var(a);
        let opts = SolverOptions { max_iter: 1, ..Default::default() };
        let sol = ipm_solve(&s, &opts).unwrap();
        assert_eq!(sol.status, Status::IterationLimit);
    }

    #[test]
    fn infeasible_problem_is_not_optimal() {
        let mut s = ConstraintSystem::new();
        let a = s.free_var(key(0), 0.5);
        let e = &LinExpr::var(a).square() + &LinExpr::constant(1.0);
        s.add_le(e, ConstraintTag::new(Family::Auxiliary, "c", 0));
        let sol = ipm_solve(&s, &SolverOptions::default()).unwrap();
        assert_ne!(sol.status, Status::Optimal);
    }
}
