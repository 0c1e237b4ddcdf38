//! Projects a point onto a box intersected with a plane and prints the
//! solution, active constraints and KKT residuals.
//!
//! `cargo run --release -p resloco-qp --example box_qp`

use nalgebra::{DMatrix, DVector};
use resloco_qp::{solve, QpProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // min ½‖x − p‖²  s.t.  x₀ + x₁ + x₂ = 1,  −0.2 ≤ xᵢ ≤ 0.6.
    let p = DVector::from_vec(vec![0.9, 0.5, -0.7]);
    let h = DMatrix::identity(3, 3);
    let g = -&p;
    let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
    let b = DVector::from_element(1, 1.0);
    let mut c = DMatrix::zeros(6, 3);
    let mut d = DVector::zeros(6);
    for i in 0..3 {
        c[(2 * i, i)] = 1.0;
        d[2 * i] = 0.6;
        c[(2 * i + 1, i)] = -1.0;
        d[2 * i + 1] = 0.2;
    }
    let problem = QpProblem::new(h, g).with_equalities(a, b).with_inequalities(c.clone(), d.clone());
    let sol = solve(&problem, 1e-9, 4000)?;
    println!("status {:?} after {} iterations", sol.status, sol.iterations);
    println!("x = {:.6?}", sol.x.as_slice());
    let slack = &d - &c * &sol.x;
    for i in 0..6 {
        if slack[i] < 1e-6 {
            println!("active: row {i}, multiplier {:.4}", sol.ineq_multipliers[i]);
        }
    }
    println!("{:?}", problem.kkt_residuals(&sol.x, &sol.eq_multipliers, &sol.ineq_multipliers));
    Ok(())
}
