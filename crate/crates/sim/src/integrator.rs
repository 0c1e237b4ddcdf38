//! Fixed-step time integration.
//!
//! Each step is a kick-drift-kick (velocity Verlet) update. The kicks treat
//! the dissipative terms (contact damping, tangential viscosity, joint
//! damping and the tanh friction slope) linearly implicitly so stiff
//! contacts and the sharp friction regularization stay stable at 1 ms.

use nalgebra::Vector2;

use crate::contact::{contact_forces, contact_jacobian, ContactWrench, Terrain, NC};
use crate::dynamics::{actuation, inverse_dynamics_kin, mass_matrix_kin, passive_damping, passive_forces};
use crate::kinematics::{Kinematics, Vec9};
use crate::model::{RobotModel, NJ};
use crate::state::SimState;
use crate::SimError;

/// Default physics step [s].
pub const DEFAULT_DT: f64 = 1e-3;

struct Kick {
    qd: Vec9,
    contacts: [ContactWrench; NC],
}

/// `v + h·M⁻¹F(q, v⁺)` with the dissipative part of `F` linearized about
/// `eval` (the velocity at which forces are sampled).
fn kick(
    model: &RobotModel,
    terrain: &Terrain,
    q: &Vec9,
    v: &Vec9,
    eval: &Vec9,
    tau: &[f64; NJ],
    h: f64,
) -> Result<Kick, SimError> {
    let kin = Kinematics::new(model, q, eval);
    let mut lhs = mass_matrix_kin(model, &kin);
    let mut rhs = actuation(tau) + passive_forces(model, eval) - inverse_dynamics_kin(model, &kin, &Vec9::zeros());
    let mut damping = nalgebra::SMatrix::<f64, 9, 9>::zeros();
    for (i, d) in passive_damping(model, eval).iter().enumerate() {
        damping[(3 + i, 3 + i)] = *d;
    }
    let forces = contact_forces(model, &kin, terrain);
    let mut jacobians = [None; NC];
    for (k, (w, gains)) in forces.iter().enumerate() {
        if !w.is_active() {
            continue;
        }
        let j = contact_jacobian(model, &kin, k);
        jacobians[k] = Some(j);
        rhs += j.transpose() * Vector2::new(w.tangential, w.normal);
        let jt = j.row(0);
        let jn = j.row(1);
        damping += (jt.transpose() * jt) * gains[0] + (jn.transpose() * jn) * gains[1];
    }
    // F(v⁺) ≈ F(eval) − B (v⁺ − eval), with v⁺ = v + Δv.
    rhs += damping * (eval - v);
    lhs += damping * h;
    let chol = lhs.cholesky().ok_or(SimError::SingularMassMatrix)?;
    let dv = chol.solve(&(rhs * h));
    let next = v + dv;
    // Report the linearized forces the kick actually applied.
    let mut contacts = forces.map(|(w, _)| w);
    for (k, c) in contacts.iter_mut().enumerate() {
        if let Some(j) = &jacobians[k] {
            let dv_point = j * (next - eval);
            c.tangential -= forces[k].1[0] * dv_point.x;
            c.normal -= forces[k].1[1] * dv_point.y;
        }
    }
    Ok(Kick { qd: next, contacts })
}

/// Advances the state by `dt` with the given joint torques (saturated to the
/// model limits). The actuation buffer is carried over untouched.
pub fn step(
    state: &SimState,
    model: &RobotModel,
    terrain: &Terrain,
    tau: &[f64; NJ],
    dt: f64,
) -> Result<SimState, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::InvalidStep(dt));
    }
    let tau = model.clamp_torques(tau);
    let half = kick(model, terrain, &state.q, &state.qd, &state.qd, &tau, 0.5 * dt)?;
    let q = state.q + half.qd * dt;
    // Sample the second kick's forces at the extrapolated end velocity so
    // velocity-dependent terms stay second-order accurate.
    let predicted = half.qd * 2.0 - state.qd;
    let end = kick(model, terrain, &q, &half.qd, &predicted, &tau, 0.5 * dt)?;
    let next = SimState {
        q,
        qd: end.qd,
        t: state.t + dt,
        contact_active: end.contacts.map(|c| c.is_active()),
        contact_forces: std::array::from_fn(|k| {
            let (a, b) = (&half.contacts[k], &end.contacts[k]);
            ContactWrench {
                normal: 0.5 * (a.normal + b.normal),
                tangential: 0.5 * (a.tangential + b.tangential),
                position: b.position,
            }
        }),
        actuation: state.actuation.clone(),
    };
    if !next.is_finite() {
        return Err(SimError::Diverged { t: next.t });
    }
    Ok(next)
}

/// Integrates for `duration` using the buffered torques, splitting steps
/// at command release times so each command takes effect exactly on time.
pub fn advance(
    state: &SimState,
    model: &RobotModel,
    terrain: &Terrain,
    duration: f64,
    dt: f64,
) -> Result<SimState, SimError> {
    let end = state.t + duration;
    let mut s = state.clone();
    s.actuation.release_due(s.t);
    // Absorb round-off so a 5 ms period never leaves a sliver step.
    let eps = 1e-9 * dt;
    while end - s.t > eps {
        let mut h = dt.min(end - s.t);
        if let Some(r) = s.actuation.next_release() {
            if r - s.t > eps {
                h = h.min(r - s.t);
            }
        }
        let tau = s.actuation.applied;
        let mut next = step(&s, model, terrain, &tau, h)?;
        if (end - next.t).abs() <= eps {
            next.t = end;
        }
        next.actuation.release_due(next.t + eps);
        s = next;
    }
    Ok(s)
}
