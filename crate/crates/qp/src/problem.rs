//! Problem and solution containers.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::QpError;

/// Dense convex QP:
///
/// ```text
/// minimize    ½ xᵀ H x + gᵀ x
/// subject to  A x  = b
///             C x <= d
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
}

impl QpProblem {
    /// Unconstrained problem with `n = linear.len()` variables.
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>) -> Self {
        let n = linear.len();
        Self {
            hessian,
            linear,
            eq_matrix: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
            ineq_matrix: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
        }
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.eq_matrix = a;
        self.eq_rhs = b;
        self
    }

    pub fn with_inequalities(mut self, c: DMatrix<f64>, d: DVector<f64>) -> Self {
        self.ineq_matrix = c;
        self.ineq_rhs = d;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq_rhs.len()
    }

    /// Checks dimensions, finiteness and Hessian symmetry (within 1e-10).
    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.num_vars();
        if self.hessian.nrows() != n || self.hessian.ncols() != n {
            return Err(QpError::Dimension(format!(
                "hessian is {}x{}, expected {n}x{n}",
                self.hessian.nrows(),
                self.hessian.ncols()
            )));
        }
        if self.eq_matrix.ncols() != n || self.eq_matrix.nrows() != self.eq_rhs.len() {
            return Err(QpError::Dimension(format!(
                "equality block is {}x{} with rhs {}",
                self.eq_matrix.nrows(),
                self.eq_matrix.ncols(),
                self.eq_rhs.len()
            )));
        }
        if self.ineq_matrix.ncols() != n || self.ineq_matrix.nrows() != self.ineq_rhs.len() {
            return Err(QpError::Dimension(format!(
                "inequality block is {}x{} with rhs {}",
                self.ineq_matrix.nrows(),
                self.ineq_matrix.ncols(),
                self.ineq_rhs.len()
            )));
        }
        let finite = self.hessian.iter().all(|v| v.is_finite())
            && self.linear.iter().all(|v| v.is_finite())
            && self.eq_matrix.iter().all(|v| v.is_finite())
            && self.eq_rhs.iter().all(|v| v.is_finite())
            && self.ineq_matrix.iter().all(|v| v.is_finite())
            && self.ineq_rhs.iter().all(|v| !v.is_nan());
        if !finite {
            return Err(QpError::NonFinite);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let a = self.hessian[(i, j)];
                let b = self.hessian[(j, i)];
                if (a - b).abs() > 1e-10 * (1.0 + a.abs().max(b.abs())) {
                    return Err(QpError::AsymmetricHessian { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    /// KKT residuals of a candidate primal/dual pair.
    pub fn kkt_residuals(
        &self,
        x: &DVector<f64>,
        eq_multipliers: &DVector<f64>,
        ineq_multipliers: &DVector<f64>,
    ) -> KktResiduals {
        let mut grad = &self.hessian * x + &self.linear;
        if self.num_eq() > 0 {
            grad += self.eq_matrix.tr_mul(eq_multipliers);
        }
        if self.num_ineq() > 0 {
            grad += self.ineq_matrix.tr_mul(ineq_multipliers);
        }
        let stationarity = inf_norm(grad.as_slice());
        let equality = if self.num_eq() > 0 {
            inf_norm((&self.eq_matrix * x - &self.eq_rhs).as_slice())
        } else {
            0.0
        };
        let mut inequality: f64 = 0.0;
        let mut complementarity: f64 = 0.0;
        let mut dual_sign: f64 = 0.0;
        if self.num_ineq() > 0 {
            let cx = &self.ineq_matrix * x;
            for i in 0..self.num_ineq() {
                let d = self.ineq_rhs[i];
                let mu = ineq_multipliers[i];
                dual_sign = dual_sign.max(-mu);
                if d.is_finite() {
                    let slack = d - cx[i];
                    inequality = inequality.max(-slack);
                    complementarity = complementarity.max((mu * slack).abs());
                } else {
                    complementarity = complementarity.max(mu.abs());
                }
            }
        }
        KktResiduals {
            stationarity,
            equality,
            inequality,
            complementarity,
            dual_sign,
        }
    }

    /// Human-readable dump for debugging solver failures.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# qp n={} n_eq={} n_ineq={}",
            self.num_vars(),
            self.num_eq(),
            self.num_ineq()
        );
        dump_matrix(&mut s, "H", &self.hessian);
        dump_vector(&mut s, "g", &self.linear);
        dump_matrix(&mut s, "A", &self.eq_matrix);
        dump_vector(&mut s, "b", &self.eq_rhs);
        dump_matrix(&mut s, "C", &self.ineq_matrix);
        dump_vector(&mut s, "d", &self.ineq_rhs);
        s
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_text())
    }
}

fn dump_matrix(s: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(s, "{name} {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
}

fn dump_vector(s: &mut String, name: &str, v: &DVector<f64>) {
    let _ = writeln!(s, "{name} {}", v.len());
    let row: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
    let _ = writeln!(s, "{}", row.join(" "));
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Infinity-norm KKT residuals. All entries are non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub equality: f64,
    /// Largest violation of `C x <= d`.
    pub inequality: f64,
    /// Largest `|μᵢ · (d − C x)ᵢ|`.
    pub complementarity: f64,
    /// Largest negative inequality multiplier magnitude.
    pub dual_sign: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.equality)
            .max(self.inequality)
            .max(self.complementarity)
            .max(self.dual_sign)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    /// The constraints admit no solution.
    Infeasible,
    /// The objective is unbounded below on the feasible set.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub eq_multipliers: DVector<f64>,
    /// Non-negative at optimality.
    pub ineq_multipliers: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub polished: bool,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}
