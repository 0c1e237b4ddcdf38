//! Direct KKT solves: the equality-only fast path and active-set polishing.

use nalgebra::{DMatrix, DVector};

use crate::problem::{inf_norm, QpProblem, QpSolution, QpStatus};

const POLISH_DELTA: f64 = 1e-9;
const REFINE_STEPS: usize = 5;

/// Solves `[P + δI, Aᵀ; A, −δI] [x; y] = rhs` with iterative refinement
/// against the unregularized system.
fn solve_kkt(p: &DMatrix<f64>, a: &DMatrix<f64>, rhs: &DVector<f64>, delta: f64) -> Option<DVector<f64>> {
    let n = p.nrows();
    let m = a.nrows();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(p);
    if m > 0 {
        k.view_mut((n, 0), (m, n)).copy_from(a);
        k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    }
    let exact = k.clone();
    for i in 0..n {
        k[(i, i)] += delta;
    }
    for i in n..n + m {
        k[(i, i)] -= delta;
    }
    let lu = k.lu();
    let mut sol = lu.solve(rhs)?;
    for _ in 0..REFINE_STEPS {
        let r = rhs - &exact * &sol;
        let corr = lu.solve(&r)?;
        sol += corr;
    }
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Equality-constrained QP via one KKT solve. Returns `None` when the KKT
/// system is singular or the result misses tolerance (caller falls back
/// to ADMM, which can also certify unboundedness).
pub(crate) fn solve_equality_only(problem: &QpProblem, tol: f64) -> Option<QpSolution> {
    let n = problem.num_vars();
    let m = problem.num_eq();
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-&problem.linear));
    rhs.rows_mut(n, m).copy_from(&problem.eq_rhs);
    let sol = solve_kkt(&problem.hessian, &problem.eq_matrix, &rhs, 0.0)?;
    let x = sol.rows(0, n).into_owned();
    let y = sol.rows(n, m).into_owned();
    let r = problem.kkt_residuals(&x, &y, &DVector::zeros(0));
    let scale = 1.0 + inf_norm(problem.linear.as_slice()).max(inf_norm(problem.eq_rhs.as_slice()));
    if r.stationarity > tol * scale || r.equality > tol * scale {
        return None;
    }
    Some(QpSolution {
        x,
        eq_multipliers: y,
        ineq_multipliers: DVector::zeros(0),
        status: QpStatus::Optimal,
        iterations: 0,
        primal_residual: r.equality,
        dual_residual: r.stationarity,
        polished: false,
    })
}

/// Unscaled `(primal, dual)` residuals of `l <= A x <= u` form.
pub(crate) fn residuals(
    problem: &QpProblem,
    a: &DMatrix<f64>,
    l: &[f64],
    u: &[f64],
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> (f64, f64) {
    let ax = a * x;
    let mut prim: f64 = 0.0;
    for i in 0..ax.len() {
        let z = ax[i].clamp(l[i], u[i]);
        prim = prim.max((ax[i] - z).abs());
    }
    let grad = &problem.hessian * x + &problem.linear + a.tr_mul(y);
    (prim, inf_norm(grad.as_slice()))
}

/// Guesses the active set from an ADMM iterate and solves the reduced
/// equality-constrained KKT system exactly.
pub(crate) fn polish(
    problem: &QpProblem,
    a: &DMatrix<f64>,
    l: &[f64],
    u: &[f64],
    x: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>, f64, f64)> {
    let n = problem.num_vars();
    let m = a.nrows();
    let mut active = Vec::new();
    let mut target = Vec::new();
    for i in 0..m {
        if l[i] == u[i] {
            active.push(i);
            target.push(l[i]);
        } else if u[i].is_finite() && u[i] - z[i] < y[i] {
            active.push(i);
            target.push(u[i]);
        } else if l[i].is_finite() && z[i] - l[i] < -y[i] {
            active.push(i);
            target.push(l[i]);
        }
    }
    let _ = x;
    let k = active.len();
    let mut a_act = DMatrix::zeros(k, n);
    for (r, &i) in active.iter().enumerate() {
        a_act.row_mut(r).copy_from(&a.row(i));
    }
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-&problem.linear));
    for (r, t) in target.iter().enumerate() {
        rhs[n + r] = *t;
    }
    let sol = solve_kkt(&problem.hessian, &a_act, &rhs, POLISH_DELTA)?;
    let xp = sol.rows(0, n).into_owned();
    let mut yp = DVector::zeros(m);
    for (r, &i) in active.iter().enumerate() {
        let yi = sol[n + r];
        // Multiplier signs must agree with the bound that is active.
        if l[i] != u[i] {
            if target[r] == u[i] && yi < -1e-9 {
                return None;
            }
            if target[r] == l[i] && yi > 1e-9 {
                return None;
            }
        }
        yp[i] = yi;
    }
    let (rp, rd) = residuals(problem, a, l, u, &xp, &yp);
    Some((xp, yp, rp, rd))
}
