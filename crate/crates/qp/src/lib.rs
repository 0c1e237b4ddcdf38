//! Dense convex quadratic programming.
//!
//! Problems of the form `min ½xᵀHx + gᵀx s.t. Ax = b, Cx <= d` are solved
//! with an over-relaxed ADMM (diagonal Ruiz preconditioning, residual
//! balancing of the penalty, warm starts) followed by an active-set
//! polish. Equality-only problems take a direct KKT path.

mod admm;
mod kkt;
mod problem;
mod scaling;

pub use admm::{solve, QpSolver, Settings};
pub use problem::{KktResiduals, QpProblem, QpSolution, QpStatus};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("problem data contains NaN or infinite entries")]
    NonFinite,
    #[error("hessian is not symmetric at ({row}, {col})")]
    AsymmetricHessian { row: usize, col: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector, DMatrix, DVector};

    #[test]
    fn unconstrained_identity() {
        let p = QpProblem::new(DMatrix::identity(2, 2), dvector![-1.0, -1.0]);
        let sol = solve(&p, 1e-6, 2000).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_lower_bound() {
        // min ½x² s.t. −x <= −1
        let p = QpProblem::new(dmatrix![1.0], dvector![0.0])
            .with_inequalities(dmatrix![-1.0], dvector![-1.0]);
        let sol = solve(&p, 1e-6, 2000).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-9, "{}", sol.x[0]);
        assert!((sol.ineq_multipliers[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_primal_infeasibility() {
        // x <= −1 and −x <= −1
        let p = QpProblem::new(dmatrix![1.0], dvector![0.0])
            .with_inequalities(dmatrix![1.0; -1.0], dvector![-1.0, -1.0]);
        let sol = solve(&p, 1e-6, 2000).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let p = QpProblem::new(DMatrix::zeros(1, 1), dvector![1.0])
            .with_inequalities(dmatrix![1.0], dvector![5.0]);
        let sol = solve(&p, 1e-6, 2000).unwrap();
        assert_eq!(sol.status, QpStatus::Unbounded);
    }

    #[test]
    fn rejects_bad_input() {
        let p = QpProblem::new(dmatrix![1.0, 2.0; 0.0, 1.0], dvector![0.0, 0.0]);
        assert!(matches!(solve(&p, 1e-6, 10), Err(QpError::AsymmetricHessian { .. })));
        let p = QpProblem::new(DMatrix::identity(2, 2), dvector![f64::NAN, 0.0]);
        assert_eq!(solve(&p, 1e-6, 10), Err(QpError::NonFinite));
        let p = QpProblem::new(DMatrix::identity(3, 3), DVector::zeros(2));
        assert!(matches!(solve(&p, 1e-6, 10), Err(QpError::Dimension(_))));
    }

    #[test]
    fn max_iterations_reports_best_iterate() {
        let p = QpProblem::new(DMatrix::identity(2, 2), dvector![-1.0, -1.0])
            .with_inequalities(dmatrix![1.0, 1.0], dvector![1.0]);
        let mut solver = QpSolver::new(Settings {
            max_iter: 1,
            polish: false,
            ..Settings::default()
        });
        let sol = solver.solve(&p).unwrap();
        assert_eq!(sol.status, QpStatus::MaxIterations);
        assert!(sol.x.iter().all(|v| v.is_finite()));
    }
}
