//! Controller in the loop with the simulator: 200 Hz control, 1 kHz
//! physics, torques held between ticks.

use nalgebra::{Vector2, Vector3};
use resloco_control::{
    build_wbc_qp, DcmSample, GaitParams, GaitScheduler, Measured, Reference, Support, TickStatus, WbcGains,
    WholeBodyController,
};
use resloco_sim::{com_state, dcm, foot_pose, standing_pose, step, RobotModel, SimState, Terrain, Vec9};

const PERIOD: f64 = 5e-3;
const DT: f64 = 1e-3;

fn standing(model: &RobotModel) -> SimState {
    let q = standing_pose(model, [0.0, 0.0], 0.0, 0.05, model.com_height).unwrap();
    SimState::new(q, Vec9::zeros())
}

fn hold_reference(model: &RobotModel, state: &SimState, target: Vector2<f64>) -> Reference {
    let kin = state.kinematics(model);
    Reference {
        dcm: DcmSample {
            xi: target,
            xi_dot: Vector2::zeros(),
            vrp: target,
        },
        support: Support::Double,
        swing: None,
        feet: [foot_pose(model, &kin, 0), foot_pose(model, &kin, 1)],
    }
}

fn advance(model: &RobotModel, terrain: &Terrain, state: SimState, tau: &[f64; 6]) -> SimState {
    let mut s = state;
    for _ in 0..(PERIOD / DT).round() as usize {
        s = step(&s, model, terrain, tau, DT).unwrap();
    }
    s
}

#[test]
fn dcm_error_decays_at_the_commanded_rate() {
    let model = RobotModel::nominal();
    let terrain = Terrain::flat(1.0);
    let mut state = standing(&model);
    let xi = Vector2::from(dcm(&model, &state));
    let e0 = Vector2::new(-0.02, 0.0);
    let reference = hold_reference(&model, &state, xi - e0);
    let mut wbc = WholeBodyController::new(WbcGains::default());
    let k = wbc.gains.k_xi[0];
    let mut worst: f64 = 0.0;
    while state.t < 2.0 - 1e-9 {
        let out = wbc.tick(&Measured { model: &model, q: &state.q, qd: &state.qd }, &reference, terrain.friction);
        if state.t >= 0.5 - 1e-9 {
            let e = Vector2::from(out.errors.e_xi);
            worst = worst.max((e - e0 * (-k * state.t).exp()).norm() / e0.norm());
        }
        state = advance(&model, &terrain, state, &out.tau);
    }
    assert!(worst < 0.01, "relative deviation {worst}");
}

#[test]
fn stands_five_seconds_with_small_dcm_error() {
    let model = RobotModel::nominal();
    let terrain = Terrain::flat(1.0);
    let mut state = standing(&model);
    let reference = hold_reference(&model, &state, Vector2::from(dcm(&model, &state)));
    let x0 = com_state(&model, &state).0;
    let mut wbc = WholeBodyController::new(WbcGains::default());
    while state.t < 5.0 - 1e-9 {
        let out = wbc.tick(&Measured { model: &model, q: &state.q, qd: &state.qd }, &reference, terrain.friction);
        assert!(out.errors.dcm_norm() < 0.01);
        assert_eq!(out.status, TickStatus::Optimal);
        state = advance(&model, &terrain, state, &out.tau);
        if (state.t - 2.0).abs() < 1e-9 {
            let x = com_state(&model, &state).0;
            assert!((x[0] - x0[0]).hypot(x[1] - x0[1]) < 0.01);
        }
    }
}

fn walk(model: &RobotModel, command: f64, duration: f64) -> (Vec<[f64; 6]>, f64, SimState) {
    let terrain = Terrain::flat(1.0);
    let gait = GaitParams::default();
    let mut state = standing(model);
    let kin = state.kinematics(model);
    let stance = [foot_pose(model, &kin, 0), foot_pose(model, &kin, 1)];
    let xi0 = Vector2::from(dcm(model, &state));
    let mut sched = GaitScheduler::new(gait, terrain.clone(), stance, 0, xi0, 0.0, command).unwrap();
    let mut wbc = WholeBodyController::new(WbcGains::default());
    let mut taus = Vec::new();
    let mut sum = 0.0;
    let ticks = (duration / PERIOD).round() as usize;
    for _ in 0..ticks {
        sched.update(state.t, command).unwrap();
        let r = sched.reference(state.t);
        let out = wbc.tick(&Measured { model, q: &state.q, qd: &state.qd }, &r, terrain.friction);
        assert!(out.errors.dcm_norm() < 0.2, "fell at t = {}", state.t);
        sum += out.errors.dcm_norm();
        taus.push(out.tau);
        state = advance(model, &terrain, state, &out.tau);
    }
    (taus, sum / ticks as f64, state)
}

#[test]
fn walks_at_commanded_speed() {
    let model = RobotModel::nominal();
    let (taus, mean, state) = walk(&model, 0.2, 5.0);
    assert!(mean < 0.03, "mean DCM error {mean}");
    // Net progress roughly matches the command after the start-up step.
    assert!(state.q[0] > 0.5, "travelled {}", state.q[0]);
    let limits = model.torque_limits();
    for tau in &taus {
        for (t, l) in tau.iter().zip(limits) {
            assert!(t.abs() <= l);
        }
    }
}

#[test]
fn controller_is_bitwise_deterministic() {
    let model = RobotModel::nominal();
    let bits = |taus: Vec<[f64; 6]>| taus.iter().flat_map(|t| t.map(f64::to_bits)).collect::<Vec<_>>();
    let a = bits(walk(&model, -0.15, 1.5).0);
    let b = bits(walk(&model, -0.15, 1.5).0);
    assert_eq!(a, b);
}

#[test]
fn qp_solution_satisfies_dynamics_cone_and_force_task() {
    let model = RobotModel::nominal();
    let mut state = standing(&model);
    state.qd[0] = 0.03;
    state.qd[3] = -0.03 / 0.8;
    let xi = Vector2::from(dcm(&model, &state));
    let reference = hold_reference(&model, &state, xi + Vector2::new(0.01, 0.0));
    let gains = WbcGains::default();
    let m = Measured { model: &model, q: &state.q, qd: &state.qd };
    let p = build_wbc_qp(&m, &reference, [true, true], &gains, 0.8).unwrap();
    let sol = resloco_qp::QpSolver::new(resloco_qp::Settings::default()).solve(&p.qp).unwrap();
    assert!(sol.is_optimal());
    let x = &sol.x;
    let eq = &p.qp.eq_matrix * x - &p.qp.eq_rhs;
    assert!(eq.rows(0, 9).amax() < 1e-6);
    for k in 0..4 {
        let (fx, fz) = (x[9 + 2 * k], x[10 + 2 * k]);
        assert!(fz >= -1e-9 && fx.abs() <= 0.8 * fz + 1e-9);
    }
    // Achieved CoM force from q̈ versus the commanded force.
    let kin = state.kinematics(&model);
    let (jc, bias) = kin.com_jacobian(&model);
    let qdd = Vec9::from_fn(|i, _| x[i]);
    let achieved = (jc * qdd + bias) * model.mass();
    assert!((achieved - p.com_force).amax() < 1e-3, "{achieved} vs {}", p.com_force);
}

#[test]
fn fallbacks_reuse_then_gravity_compensate() {
    let model = RobotModel::nominal();
    let state = standing(&model);
    let m = Measured { model: &model, q: &state.q, qd: &state.qd };
    let good = hold_reference(&model, &state, Vector2::from(dcm(&model, &state)));
    let mut bad = good;
    bad.dcm.xi = Vector2::new(f64::NAN, 0.7);
    let mut wbc = WholeBodyController::new(WbcGains::default());
    let first = wbc.tick(&m, &good, 0.8);
    assert_eq!(first.status, TickStatus::Optimal);
    let reused = wbc.tick(&m, &bad, 0.8);
    assert_eq!(reused.status, TickStatus::Reused);
    assert_eq!(reused.tau, first.tau);
    let grav = wbc.tick(&m, &bad, 0.8);
    assert_eq!(grav.status, TickStatus::GravityCompensation);
    assert_eq!(grav.tau, resloco_control::gravity_compensation(&model, &state.q));
    assert_eq!(wbc.failures, 2);

    let mut flight = good;
    flight.support = Support::Double;
    assert!(build_wbc_qp(&m, &flight, [false, false], &wbc.gains, 0.8).is_none());
    let _ = Vector3::<f64>::zeros();
}
