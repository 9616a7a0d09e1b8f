use std::collections::BTreeMap;
use std::time::Instant;

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};

use crate::qcqp::{ConstraintSystem, Sense};

use super::{Solution, SolveError, SolverOptions, Status};

fn norm2(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn norm_inf(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Damped Newton on the equality rows of a square system, starting from
/// the system's initial point. Variables with equal bounds are held at
/// that value. Inequality rows are ignored.
pub fn newton_pf(sys: &ConstraintSystem, opts: &SolverOptions) -> Result<Solution, SolveError> {
    newton_pf_from(sys, &sys.initial_point(), opts)
}

pub fn newton_pf_from(sys: &ConstraintSystem, x0: &[f64], opts: &SolverOptions) -> Result<Solution, SolveError> {
    opts.check()?;
    let start = Instant::now();
    let mut x = x0.to_vec();
    let mut fixed = BTreeMap::new();
    for (i, v) in sys.variables.iter().enumerate() {
        if v.lower == v.upper {
            fixed.insert(i, v.lower);
            x[i] = v.lower;
        }
    }
    let free: Vec<usize> = (0..sys.n_vars()).filter(|i| !fixed.contains_key(i)).collect();
    let mut col = vec![usize::MAX; sys.n_vars()];
    for (k, &i) in free.iter().enumerate() {
        col[i] = k;
    }
    let rows: Vec<usize> = (0..sys.n_cons()).filter(|&k| sys.constraints[k].sense == Sense::Eq).collect();
    if rows.len() < sys.n_cons() {
        log::warn!("newton power flow ignores {} inequality rows", sys.n_cons() - rows.len());
    }
    if rows.len() != free.len() {
        return Err(SolveError::NotSquare { variables: free.len(), equations: rows.len() });
    }
    let n = free.len();
    let compiled = sys.compile();
    let residual = |x: &[f64]| -> Vec<f64> { rows.iter().map(|&k| sys.constraints[k].eval(x)).collect() };
    let mut r = residual(&x);
    let finish = |x: Vec<f64>, status, iterations, message: String| {
        let max_violation = sys.max_violation(&x).unwrap_or(f64::INFINITY);
        Solution {
            status,
            objective: sys.eval_objective(&x),
            duals: vec![0.0; sys.n_cons()],
            x,
            iterations,
            wall_time: start.elapsed().as_secs_f64(),
            max_violation,
            message,
            recovered: None,
        }
    };
    for iteration in 0..=opts.max_iter {
        let rmax = norm_inf(&r);
        if !rmax.is_finite() {
            return Ok(finish(x, Status::NumericalFailure, iteration, "residual is not finite".into()));
        }
        if rmax <= opts.tol_pf {
            return Ok(finish(x, Status::Optimal, iteration, format!("converged, max residual {rmax:.3e}")));
        }
        if iteration == opts.max_iter {
            break;
        }
        let jac = compiled.jacobian(&x);
        let mut triplets = Vec::with_capacity(jac.nnz());
        for (row, &k) in rows.iter().enumerate() {
            for (j, v) in jac.row(k) {
                if col[j] != usize::MAX && v != 0.0 {
                    triplets.push(Triplet::new(row, col[j], v));
                }
            }
        }
        let singular = SolveError::SingularJacobian { iteration };
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).map_err(|_| singular)?;
        let lu = a.sp_lu().map_err(|_| SolveError::SingularJacobian { iteration })?;
        let mut rhs = faer::Mat::<f64>::from_fn(n, 1, |i, _| -r[i]);
        lu.solve_in_place(rhs.as_mut());
        let dx: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::SingularJacobian { iteration });
        }
        let r0 = norm2(&r);
        let mut alpha = 1.0;
        loop {
            let mut trial = x.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] += alpha * dx[k];
            }
            let rt = residual(&trial);
            let nt = norm2(&rt);
            if nt.is_finite() && nt < r0 {
                x = trial;
                r = rt;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-8 {
                let msg = format!("line search failed at iteration {iteration}, residual {:.3e}", norm_inf(&r));
                return Ok(finish(x, Status::NumericalFailure, iteration, msg));
            }
        }
        log::debug!("newton iteration {iteration}: step {alpha}, residual {:.3e}", norm_inf(&r));
    }
    let msg = format!("no convergence in {} iterations, residual {:.3e}", opts.max_iter, norm_inf(&r));
    Ok(finish(x, Status::IterationLimit, opts.max_iter, msg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcqp::{ConstraintTag, Family, LinExpr, Part, Quantity, VarKey};

    fn key(i: usize) -> VarKey {
        VarKey::new(Quantity::LoadCurrent { load: format!("v{i}") }, Part::Re)
    }

    #[test]
    fn solves_circle_line_intersection() {
        let mut s = ConstraintSystem::new();
        let a = s.free_var(key(0), 1.0);
        let b = s.free_var(key(1), 0.5);
        let circle = &(&LinExpr::var(a).square() + &LinExpr::var(b).square()) + &LinExpr::constant(-1.0);
        s.add_eq(circle, ConstraintTag::new(Family::Auxiliary, "c", 0));
        s.add_eq((&LinExpr::var(a) - &LinExpr::var(b)).into(), ConstraintTag::new(Family::Auxiliary, "l", 0));
        let sol = newton_pf(&s, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let h = 0.5f64.sqrt();
        assert!((sol.x[0] - h).abs() < 1e-12 && (sol.x[1] - h).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_square() {
        let mut s = ConstraintSystem::new();
        s.free_var(key(0), 1.0);
        assert!(matches!(newton_pf(&s, &SolverOptions::default()), Err(SolveError::NotSquare { .. })));
    }

    #[test]
    fn infeasible_system_is_not_reported_converged() {
        let mut s = ConstraintSystem::new();
        let a = s.free_var(key(0), 1.0);
        let e = &LinExpr::var(a).square() + &LinExpr::constant(1.0);
        s.add_eq(e, ConstraintTag::new(Family::Auxiliary, "c", 0));
        match newton_pf(&s, &SolverOptions::default()) {
            Ok(sol) => assert_ne!(sol.status, Status::Optimal),
            Err(e) => assert!(matches!(e, SolveError::SingularJacobian { .. })),
        }
    }
}
