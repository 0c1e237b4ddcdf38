//! Over-relaxed ADMM in the operator-splitting form
//!
//! ```text
//! minimize ½ xᵀ P x + qᵀ x   subject to   l <= A x <= u
//! ```
//!
//! with Ruiz equilibration, residual-balancing step-size adaptation,
//! infeasibility certificates and active-set polishing.

use nalgebra::{DMatrix, DVector};

use crate::kkt;
use crate::problem::{inf_norm, QpProblem, QpSolution, QpStatus};
use crate::scaling::{dot, ruiz, Dense, Scaled};
use crate::QpError;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation parameter in (0, 2).
    pub alpha: f64,
    pub adaptive_rho: bool,
    pub adaptive_rho_interval: usize,
    pub check_interval: usize,
    pub scaling_iterations: usize,
    pub polish: bool,
    pub infeasibility_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 2000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho: true,
            adaptive_rho_interval: 25,
            check_interval: 5,
            scaling_iterations: 10,
            polish: true,
            infeasibility_tol: 1e-5,
        }
    }
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_SCALE: f64 = 1e3;

#[derive(Debug, Clone)]
struct WarmStart {
    n: usize,
    m: usize,
    x: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Reusable solver. Keeps the last solution as a warm start for the next
/// problem of identical dimensions.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    pub settings: Settings,
    warm: Option<WarmStart>,
}

/// Cold-start convenience wrapper.
pub fn solve(problem: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    let mut solver = QpSolver::new(Settings {
        tol,
        max_iter,
        ..Settings::default()
    });
    solver.solve(problem)
}

impl QpSolver {
    pub fn new(settings: Settings) -> Self {
        Self {
            settings,
            warm: None,
        }
    }

    pub fn reset_warm_start(&mut self) {
        self.warm = None;
    }

    pub fn solve(&mut self, problem: &QpProblem) -> Result<QpSolution, QpError> {
        problem.validate()?;
        if problem.num_ineq() == 0 {
            if let Some(sol) = kkt::solve_equality_only(problem, self.settings.tol) {
                self.remember(problem, &sol, self.settings.rho);
                return Ok(sol);
            }
        }
        let (sol, rho) = self.solve_admm(problem);
        self.remember(problem, &sol, rho);
        Ok(sol)
    }

    fn remember(&mut self, problem: &QpProblem, sol: &QpSolution, rho: f64) {
        if !sol.x.iter().all(|v| v.is_finite()) {
            self.warm = None;
            return;
        }
        let n = problem.num_vars();
        let m = problem.num_eq() + problem.num_ineq();
        let mut z = vec![0.0; m];
        let mut y = vec![0.0; m];
        let ax = stacked_mul(problem, &sol.x);
        let (l, u) = bounds(problem);
        for i in 0..m {
            z[i] = ax[i].clamp(l[i], u[i]);
            y[i] = if i < problem.num_eq() {
                sol.eq_multipliers[i]
            } else {
                sol.ineq_multipliers[i - problem.num_eq()]
            };
        }
        self.warm = Some(WarmStart {
            n,
            m,
            x: sol.x.as_slice().to_vec(),
            z,
            y,
            rho,
        });
    }

    fn solve_admm(&self, problem: &QpProblem) -> (QpSolution, f64) {
        let s = &self.settings;
        let n = problem.num_vars();
        let n_eq = problem.num_eq();
        let m = n_eq + problem.num_ineq();
        let (l, u) = bounds(problem);
        let a = stacked(problem);
        let scaled = ruiz(
            Dense::from_nalgebra(&problem.hessian),
            problem.linear.as_slice().to_vec(),
            Dense::from_nalgebra(&a),
            l.clone(),
            u.clone(),
            s.scaling_iterations,
        );
        let Scaled {
            p,
            q,
            a: ah,
            l: lh,
            u: uh,
            d,
            e,
            c,
        } = &scaled;

        let mut x = vec![0.0; n];
        let mut z = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut rho_base = s.rho;
        if let Some(w) = self.warm.as_ref().filter(|w| w.n == n && w.m == m) {
            for j in 0..n {
                x[j] = w.x[j] / d[j];
            }
            for i in 0..m {
                z[i] = (w.z[i] * e[i]).clamp(lh[i], uh[i]);
                y[i] = c * w.y[i] / e[i];
            }
            rho_base = w.rho;
        }

        let mut rho = rho_vector(rho_base, lh, uh);
        let mut factor = factorize(p, ah, &rho, s.sigma);

        let mut xt = vec![0.0; n];
        let mut zt = vec![0.0; m];
        let mut rhs = vec![0.0; n];
        let mut tmp_m = vec![0.0; m];
        let mut x_prev = vec![0.0; n];
        let mut y_prev = vec![0.0; m];
        let mut work_n = vec![0.0; n];
        let mut work_n2 = vec![0.0; n];

        let mut status = QpStatus::MaxIterations;
        let mut iterations = 0;
        let mut prim_res = f64::INFINITY;
        let mut dual_res = f64::INFINITY;

        for k in 1..=s.max_iter {
            iterations = k;
            x_prev.copy_from_slice(&x);
            y_prev.copy_from_slice(&y);

            for i in 0..m {
                tmp_m[i] = rho[i] * z[i] - y[i];
            }
            ah.tr_mul_vec(&tmp_m, &mut rhs);
            for j in 0..n {
                rhs[j] += s.sigma * x[j] - q[j];
            }
            xt.copy_from_slice(&rhs);
            chol_solve(&factor, &mut xt);
            ah.mul_vec(&xt, &mut zt);
            for j in 0..n {
                x[j] = s.alpha * xt[j] + (1.0 - s.alpha) * x[j];
            }
            for i in 0..m {
                let zr = s.alpha * zt[i] + (1.0 - s.alpha) * z[i];
                let zn = (zr + y[i] / rho[i]).clamp(lh[i], uh[i]);
                y[i] += rho[i] * (zr - zn);
                z[i] = zn;
            }

            let check = k % s.check_interval == 0 || k == s.max_iter;
            if !check {
                continue;
            }

            // Residuals in unscaled units.
            ah.mul_vec(&x, &mut tmp_m);
            let mut r_prim: f64 = 0.0;
            let mut ax_norm: f64 = 0.0;
            let mut z_norm: f64 = 0.0;
            for i in 0..m {
                r_prim = r_prim.max(((tmp_m[i] - z[i]) / e[i]).abs());
                ax_norm = ax_norm.max((tmp_m[i] / e[i]).abs());
                z_norm = z_norm.max((z[i] / e[i]).abs());
            }
            p.mul_vec(&x, &mut work_n);
            ah.tr_mul_vec(&y, &mut work_n2);
            let mut r_dual: f64 = 0.0;
            let mut px_norm: f64 = 0.0;
            let mut aty_norm: f64 = 0.0;
            let mut q_norm: f64 = 0.0;
            for j in 0..n {
                let scale = 1.0 / (c * d[j]);
                r_dual = r_dual.max(((work_n[j] + q[j] + work_n2[j]) * scale).abs());
                px_norm = px_norm.max((work_n[j] * scale).abs());
                aty_norm = aty_norm.max((work_n2[j] * scale).abs());
                q_norm = q_norm.max((q[j] * scale).abs());
            }
            prim_res = r_prim;
            dual_res = r_dual;
            let eps_prim = s.tol + s.tol * ax_norm.max(z_norm);
            let eps_dual = s.tol + s.tol * px_norm.max(aty_norm).max(q_norm);
            if r_prim <= eps_prim && r_dual <= eps_dual {
                status = QpStatus::Optimal;
                break;
            }

            if primal_infeasible(ah, lh, uh, d, e, &y, &y_prev, s.infeasibility_tol) {
                status = QpStatus::Infeasible;
                break;
            }
            if dual_infeasible(p, q, ah, lh, uh, d, e, *c, &x, &x_prev, s.infeasibility_tol) {
                status = QpStatus::Unbounded;
                break;
            }

            if s.adaptive_rho && k % s.adaptive_rho_interval == 0 {
                // Residual balancing on scaled quantities.
                let mut rp: f64 = 0.0;
                let mut axs: f64 = 0.0;
                let mut zs: f64 = 0.0;
                for i in 0..m {
                    rp = rp.max((tmp_m[i] - z[i]).abs());
                    axs = axs.max(tmp_m[i].abs());
                    zs = zs.max(z[i].abs());
                }
                let mut rd: f64 = 0.0;
                let mut pxs: f64 = 0.0;
                let mut atys: f64 = 0.0;
                let mut qs: f64 = 0.0;
                for j in 0..n {
                    rd = rd.max((work_n[j] + q[j] + work_n2[j]).abs());
                    pxs = pxs.max(work_n[j].abs());
                    atys = atys.max(work_n2[j].abs());
                    qs = qs.max(q[j].abs());
                }
                let num = rp / axs.max(zs).max(1e-30);
                let den = rd / pxs.max(atys).max(qs).max(1e-30);
                if den > 0.0 && num > 0.0 {
                    let new_rho = (rho_base * (num / den).sqrt()).clamp(RHO_MIN, RHO_MAX);
                    if new_rho > 5.0 * rho_base || new_rho < 0.2 * rho_base {
                        rho_base = new_rho;
                        rho = rho_vector(rho_base, lh, uh);
                        factor = factorize(p, ah, &rho, s.sigma);
                    }
                }
            }
        }

        // Unscale.
        let mut x_u = DVector::zeros(n);
        for j in 0..n {
            x_u[j] = x[j] * d[j];
        }
        let mut y_u = DVector::zeros(m);
        let mut z_u = DVector::zeros(m);
        for i in 0..m {
            y_u[i] = y[i] * e[i] / c;
            z_u[i] = z[i] / e[i];
        }

        let mut polished = false;
        if matches!(status, QpStatus::Optimal | QpStatus::MaxIterations) && s.polish {
            if let Some((xp, yp, rp, rd)) = kkt::polish(problem, &a, &l, &u, &x_u, &z_u, &y_u) {
                let better = (rp <= prim_res.max(s.tol) && rd <= dual_res.max(s.tol))
                    || (rp <= s.tol && rd <= s.tol);
                if better {
                    x_u = xp;
                    y_u = yp;
                    prim_res = rp;
                    dual_res = rd;
                    polished = true;
                    if rp <= s.tol && rd <= s.tol {
                        status = QpStatus::Optimal;
                    }
                }
            }
        }
        if status == QpStatus::Optimal && !polished {
            let (rp, rd) = kkt::residuals(problem, &a, &l, &u, &x_u, &y_u);
            prim_res = rp;
            dual_res = rd;
        }

        let eq_multipliers = DVector::from_iterator(n_eq, y_u.iter().take(n_eq).copied());
        let ineq_multipliers =
            DVector::from_iterator(m - n_eq, y_u.iter().skip(n_eq).map(|v| v.max(0.0)));
        let sol = QpSolution {
            x: x_u,
            eq_multipliers,
            ineq_multipliers,
            status,
            iterations,
            primal_residual: prim_res,
            dual_residual: dual_res,
            polished,
        };
        (sol, rho_base)
    }
}

/// `[A; C]`
pub(crate) fn stacked(problem: &QpProblem) -> DMatrix<f64> {
    let n = problem.num_vars();
    let n_eq = problem.num_eq();
    let m = n_eq + problem.num_ineq();
    let mut a = DMatrix::zeros(m, n);
    if n_eq > 0 {
        a.rows_mut(0, n_eq).copy_from(&problem.eq_matrix);
    }
    if problem.num_ineq() > 0 {
        a.rows_mut(n_eq, problem.num_ineq())
            .copy_from(&problem.ineq_matrix);
    }
    a
}

fn stacked_mul(problem: &QpProblem, x: &DVector<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(problem.num_eq() + problem.num_ineq());
    if problem.num_eq() > 0 {
        out.extend((&problem.eq_matrix * x).iter());
    }
    if problem.num_ineq() > 0 {
        out.extend((&problem.ineq_matrix * x).iter());
    }
    out
}

pub(crate) fn bounds(problem: &QpProblem) -> (Vec<f64>, Vec<f64>) {
    let mut l = Vec::with_capacity(problem.num_eq() + problem.num_ineq());
    let mut u = Vec::with_capacity(problem.num_eq() + problem.num_ineq());
    for &b in problem.eq_rhs.iter() {
        l.push(b);
        u.push(b);
    }
    for &d in problem.ineq_rhs.iter() {
        l.push(f64::NEG_INFINITY);
        u.push(d);
    }
    (l, u)
}

fn rho_vector(rho: f64, l: &[f64], u: &[f64]) -> Vec<f64> {
    l.iter()
        .zip(u)
        .map(|(&lo, &hi)| {
            if lo == hi {
                rho * RHO_EQ_SCALE
            } else if lo.is_infinite() && hi.is_infinite() {
                RHO_MIN
            } else {
                rho
            }
        })
        .collect()
}

struct Factor {
    n: usize,
    /// Lower-triangular Cholesky factor, row-major.
    l: Vec<f64>,
}

fn factorize(p: &Dense, a: &Dense, rho: &[f64], sigma: f64) -> Factor {
    let n = p.rows;
    let mut k = vec![0.0; n * n];
    k.copy_from_slice(&p.data);
    for i in 0..a.rows {
        let row = a.row(i);
        let r = rho[i];
        for (j1, &a1) in row.iter().enumerate() {
            if a1 == 0.0 {
                continue;
            }
            let ra1 = r * a1;
            let krow = &mut k[j1 * n..(j1 + 1) * n];
            for (kv, &a2) in krow.iter_mut().zip(row) {
                *kv += ra1 * a2;
            }
        }
    }
    let mut reg = sigma;
    loop {
        let mut m = k.clone();
        for j in 0..n {
            m[j * n + j] += reg;
        }
        if cholesky_in_place(&mut m, n) {
            return Factor { n, l: m };
        }
        // P slightly indefinite from round-off; regularize harder.
        reg = (reg * 10.0).max(1e-10);
    }
}

fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    true
}

fn chol_solve(f: &Factor, b: &mut [f64]) {
    let n = f.n;
    let l = &f.l;
    for i in 0..n {
        let s = dot(&l[i * n..i * n + i], &b[..i]);
        b[i] = (b[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

#[allow(clippy::too_many_arguments)]
fn primal_infeasible(
    a: &Dense,
    l: &[f64],
    u: &[f64],
    d: &[f64],
    e: &[f64],
    y: &[f64],
    y_prev: &[f64],
    eps: f64,
) -> bool {
    let m = y.len();
    if m == 0 {
        return false;
    }
    let dy: Vec<f64> = y.iter().zip(y_prev).map(|(a, b)| a - b).collect();
    let dy_norm = dy
        .iter()
        .zip(e)
        .fold(0.0_f64, |acc, (v, ei)| acc.max((v * ei).abs()));
    if dy_norm < 1e-30 {
        return false;
    }
    let mut support = 0.0;
    for i in 0..m {
        if dy[i] > 0.0 {
            if u[i].is_infinite() {
                return false;
            }
            support += u[i] * dy[i];
        } else if dy[i] < 0.0 {
            if l[i].is_infinite() {
                return false;
            }
            support += l[i] * dy[i];
        }
    }
    if support >= -eps * dy_norm {
        return false;
    }
    let mut aty = vec![0.0; a.cols];
    a.tr_mul_vec(&dy, &mut aty);
    let aty_norm = aty
        .iter()
        .zip(d)
        .fold(0.0_f64, |acc, (v, dj)| acc.max((v / dj).abs()));
    aty_norm <= eps * dy_norm
}

#[allow(clippy::too_many_arguments)]
fn dual_infeasible(
    p: &Dense,
    q: &[f64],
    a: &Dense,
    l: &[f64],
    u: &[f64],
    d: &[f64],
    e: &[f64],
    c: f64,
    x: &[f64],
    x_prev: &[f64],
    eps: f64,
) -> bool {
    let n = x.len();
    let dx: Vec<f64> = x.iter().zip(x_prev).map(|(a, b)| a - b).collect();
    let dx_norm = dx
        .iter()
        .zip(d)
        .fold(0.0_f64, |acc, (v, dj)| acc.max((v * dj).abs()));
    if dx_norm < 1e-30 {
        return false;
    }
    if dot(q, &dx) / c >= -eps * dx_norm {
        return false;
    }
    let mut pdx = vec![0.0; n];
    p.mul_vec(&dx, &mut pdx);
    let pdx_norm = pdx
        .iter()
        .zip(d)
        .fold(0.0_f64, |acc, (v, dj)| acc.max((v / (c * dj)).abs()));
    if pdx_norm > eps * dx_norm {
        return false;
    }
    let mut adx = vec![0.0; a.rows];
    a.mul_vec(&dx, &mut adx);
    for i in 0..a.rows {
        let v = adx[i] / e[i];
        let tol = eps * dx_norm;
        let lower_ok = l[i].is_infinite() || v >= -tol;
        let upper_ok = u[i].is_infinite() || v <= tol;
        if !(lower_ok && upper_ok) {
            return false;
        }
    }
    inf_norm(&pdx).is_finite()
}
