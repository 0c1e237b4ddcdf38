//! Composite-rigid-body mass matrix, recursive Newton-Euler inverse
//! dynamics and forward dynamics.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::contact::{contact_jacobian, ContactWrench, NC};
use crate::kinematics::{cross_force, Kinematics, Mat9, Vec9};
use crate::model::{dof_body, RobotModel, NB, NJ, NQ};
use crate::state::SimState;
use crate::SimError;

/// Spatial inertia at the world origin of a body with CoM `c`.
pub(crate) fn spatial_inertia(m: f64, inertia: f64, c: &Vector2<f64>) -> Matrix3<f64> {
    Matrix3::new(
        inertia + m * c.norm_squared(),
        -m * c.y,
        m * c.x,
        -m * c.y,
        m,
        0.0,
        m * c.x,
        0.0,
        m,
    )
}

fn body_inertias(model: &RobotModel, kin: &Kinematics) -> [Matrix3<f64>; NB] {
    std::array::from_fn(|b| {
        let l = &model.links[b];
        spatial_inertia(l.mass, l.inertia, &kin.com_of(model, b))
    })
}

pub(crate) fn mass_matrix_kin(model: &RobotModel, kin: &Kinematics) -> Mat9 {
    let mut composite = body_inertias(model, kin);
    for b in (1..NB).rev() {
        let p = model.links[b].parent.unwrap();
        let c = composite[b];
        composite[p] += c;
    }
    let mut m = Mat9::zeros();
    for i in 0..NQ {
        let bi = dof_body(i);
        let f = composite[bi] * kin.subspace[i];
        for j in 0..=i {
            if kin.supports[bi][j] {
                let v = kin.subspace[j].dot(&f);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
    }
    m
}

/// Joint-space inertia matrix M(q).
pub fn mass_matrix(model: &RobotModel, q: &Vec9) -> Mat9 {
    mass_matrix_kin(model, &Kinematics::at_rest(model, q))
}

pub(crate) fn inverse_dynamics_kin(model: &RobotModel, kin: &Kinematics, qdd: &Vec9) -> Vec9 {
    let inertia = body_inertias(model, kin);
    let lift = Vector3::new(0.0, 0.0, model.gravity);
    let mut force = [Vector3::zeros(); NB];
    for b in 0..NB {
        let mut a = lift + kin.bias[b];
        for dof in 0..NQ {
            if kin.supports[b][dof] {
                a += kin.subspace[dof] * qdd[dof];
            }
        }
        let v = &kin.velocity[b];
        force[b] = inertia[b] * a + cross_force(v, &(inertia[b] * v));
    }
    for b in (1..NB).rev() {
        let p = model.links[b].parent.unwrap();
        let f = force[b];
        force[p] += f;
    }
    Vec9::from_fn(|i, _| kin.subspace[i].dot(&force[dof_body(i)]))
}

/// Generalized force producing `q̈` from `(q, q̇)` without contacts or
/// passive joint terms: `M q̈ + h(q, q̇)`.
pub fn inverse_dynamics(model: &RobotModel, q: &Vec9, qd: &Vec9, qdd: &Vec9) -> Vec9 {
    inverse_dynamics_kin(model, &Kinematics::new(model, q, qd), qdd)
}

/// Coriolis, centrifugal and gravity terms h(q, q̇).
pub fn bias_forces(model: &RobotModel, q: &Vec9, qd: &Vec9) -> Vec9 {
    inverse_dynamics(model, q, qd, &Vec9::zeros())
}

/// Joint damping and regularized dry friction as generalized forces
/// (opposing motion; zero on base rows).
pub fn passive_forces(model: &RobotModel, qd: &Vec9) -> Vec9 {
    let mut f = Vec9::zeros();
    for (i, j) in model.joints.iter().enumerate() {
        let v = qd[3 + i];
        f[3 + i] = -j.damping * v - j.friction * (v / model.friction_eps).tanh();
    }
    f
}

/// Derivative of `-passive_forces` with respect to joint velocity
/// (diagonal, non-negative).
pub(crate) fn passive_damping(model: &RobotModel, qd: &Vec9) -> [f64; NJ] {
    std::array::from_fn(|i| {
        let j = &model.joints[i];
        let x = qd[3 + i] / model.friction_eps;
        let sech = 1.0 / x.cosh();
        j.damping + j.friction * sech * sech / model.friction_eps
    })
}

/// Selection map from actuated torques to generalized forces.
pub fn actuation(tau: &[f64; NJ]) -> Vec9 {
    let mut f = Vec9::zeros();
    f.rows_mut(3, NJ).copy_from_slice(tau);
    f
}

/// Solves `M q̈ = S τ + Jᵀ f + passive − h`.
pub fn forward_dynamics(
    model: &RobotModel,
    state: &SimState,
    tau: &[f64; NJ],
    contacts: &[ContactWrench; NC],
) -> Result<Vec9, SimError> {
    let kin = Kinematics::new(model, &state.q, &state.qd);
    let m = mass_matrix_kin(model, &kin);
    let mut rhs = actuation(tau) + passive_forces(model, &state.qd) - inverse_dynamics_kin(model, &kin, &Vec9::zeros());
    for (k, c) in contacts.iter().enumerate() {
        if c.normal != 0.0 || c.tangential != 0.0 {
            let j = contact_jacobian(model, &kin, k);
            rhs += j.transpose() * Vector2::new(c.tangential, c.normal);
        }
    }
    let chol = m.cholesky().ok_or(SimError::SingularMassMatrix)?;
    Ok(chol.solve(&rhs))
}

/// Total potential energy Σ m g z_com.
pub fn potential_energy(model: &RobotModel, q: &Vec9) -> f64 {
    let kin = Kinematics::at_rest(model, q);
    (0..NB)
        .map(|b| model.links[b].mass * model.gravity * kin.com_of(model, b).y)
        .sum()
}

/// ½ q̇ᵀ M q̇ from spatial velocities.
pub fn kinetic_energy(model: &RobotModel, q: &Vec9, qd: &Vec9) -> f64 {
    let kin = Kinematics::new(model, q, qd);
    let inertia = body_inertias(model, &kin);
    (0..NB)
        .map(|b| 0.5 * kin.velocity[b].dot(&(inertia[b] * kin.velocity[b])))
        .sum()
}
