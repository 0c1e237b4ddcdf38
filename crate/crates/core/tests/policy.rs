use proptest::prelude::*;

use resloco::policy::{
    build_observation, build_privileged, compute_reward, ActionMap, ObservationInputs, ObservationScales, PrivilegedInputs,
    RewardParams, OBS_DIM, PRIVILEGED_DIM,
};
use resloco::randomization::NoisyState;
use resloco_control::TrackingErrors;
use resloco_sim::{RobotModel, Vec9, NJ};

fn zero_errors() -> TrackingErrors {
    TrackingErrors::default()
}

#[test]
fn perfect_tracking_earns_every_weight() {
    let p = RewardParams::default();
    let tau = [3.0, -1.0, 2.0, 0.5, 4.0, -2.0];
    let r = compute_reward(&zero_errors(), &tau, &tau, &tau, &p, false);
    assert!((r.total() - 31.01).abs() < 1e-12, "{}", r.total());
    assert_eq!(r.termination, 0.0);
}

#[test]
fn dcm_term_at_ten_centimetres() {
    let p = RewardParams::default();
    let e = TrackingErrors {
        e_xi: [0.06, -0.08],
        ..Default::default()
    };
    let tau = [0.0; NJ];
    let r = compute_reward(&e, &tau, &tau, &tau, &p, false);
    assert!((r.dcm - 20.0 * (-1.0f64).exp()).abs() < 1e-9);
}

#[test]
fn termination_adds_the_penalty() {
    let p = RewardParams::default();
    let tau = [0.0; NJ];
    let alive = compute_reward(&zero_errors(), &tau, &tau, &tau, &p, false);
    let dead = compute_reward(&zero_errors(), &tau, &tau, &tau, &p, true);
    assert_eq!(dead.termination, -20.0);
    assert_eq!(dead.total() - alive.total(), -20.0);
}

#[test]
fn torque_term_uses_distance_to_oracle() {
    let p = RewardParams::default();
    let tau = [0.0; NJ];
    let mut oracle = [0.0; NJ];
    oracle[0] = 30.0;
    oracle[4] = 40.0;
    let r = compute_reward(&zero_errors(), &tau, &tau, &oracle, &p, false);
    assert!((r.torque - 5.0 * (-0.5f64).exp()).abs() < 1e-12);
}

fn arr6(range: f64) -> impl Strategy<Value = [f64; NJ]> {
    prop::array::uniform6(-range..range)
}

proptest! {
    #[test]
    fn reward_terms_lie_within_their_weights(
        e_xi in prop::array::uniform2(-0.5f64..0.5),
        e_foot in prop::array::uniform3(-0.5f64..0.5),
        e_rot in -1.0f64..1.0,
        tau in arr6(200.0),
        prev in arr6(200.0),
        oracle in arr6(200.0),
    ) {
        let p = RewardParams::default();
        let e = TrackingErrors { e_xi, e_foot, e_rot };
        let r = compute_reward(&e, &tau, &prev, &oracle, &p, false);
        for (v, w) in [(r.dcm, 20.0), (r.foot, 5.0), (r.torso, 1.0), (r.torque, 5.0), (r.smooth, 0.01)] {
            prop_assert!(v > 0.0 && v <= w, "{v} outside (0, {w}]");
        }
        prop_assert!(r.total() > 0.0 && r.total() <= 31.01 + 1e-12);
    }

    #[test]
    fn residual_torque_stays_inside_the_bound(u in prop::collection::vec(-50.0f64..50.0, NJ)) {
        let map = ActionMap::new(&RobotModel::nominal(), 0.5);
        let tau = map.torque(&u);
        let limits = RobotModel::nominal().torque_limits();
        for i in 0..NJ {
            prop_assert!(tau[i].abs() <= 0.5 * limits[i]);
        }
    }

    #[test]
    fn privileged_observation_extends_the_actor_observation(
        q in prop::array::uniform9(-1.0f64..1.0),
        qd in prop::array::uniform9(-3.0f64..3.0),
        tb in arr6(50.0),
        tp in arr6(50.0),
        to in arr6(50.0),
    ) {
        let limits = RobotModel::nominal().torque_limits();
        let s = ObservationScales::default();
        let est = NoisyState { q: Vec9::from(q), qd: Vec9::from(qd) };
        let e = TrackingErrors { e_xi: [0.01, -0.02], e_foot: [0.0, 0.01, 0.1], e_rot: 0.0 };
        let obs = build_observation(&ObservationInputs { est: &est, tau_base: &tb, tau_prev: &tp, errors: &e }, &limits, &s);
        let truth = (Vec9::from(q).map(|x| x * 0.9), Vec9::from(qd));
        let privi = build_privileged(
            &obs,
            &PrivilegedInputs { q: &truth.0, qd: &truth.1, tau_oracle: &to, errors: &e },
            &limits,
            &s,
        );
        prop_assert_eq!(obs.len(), OBS_DIM);
        prop_assert_eq!(privi.len(), PRIVILEGED_DIM);
        prop_assert_eq!(&privi[..OBS_DIM], &obs[..]);
    }
}

#[test]
fn observation_layout_at_episode_start() {
    let model = RobotModel::nominal();
    let limits = model.torque_limits();
    let s = ObservationScales::default();
    let q = Vec9::from([0.0, 0.9, 0.0, 0.1, -0.2, 0.1, 0.3, -0.6, 0.3]);
    let est = NoisyState { q, qd: Vec9::zeros() };
    let tau_b = [10.0, -20.0, 5.0, 10.0, -20.0, 5.0];
    let obs = build_observation(
        &ObservationInputs {
            est: &est,
            tau_base: &tau_b,
            tau_prev: &[0.0; NJ],
            errors: &zero_errors(),
        },
        &limits,
        &s,
    );
    assert_eq!(obs.len(), 29);
    assert_eq!(&obs[..6], &[0.1, -0.2, 0.1, 0.3, -0.6, 0.3]);
    assert!(obs[6..12].iter().all(|&x| x == 0.0));
    for i in 0..NJ {
        assert_eq!(obs[12 + i], tau_b[i] / limits[i]);
    }
    // τ_{t−1} is zero at t = 0.
    assert!(obs[18..24].iter().all(|&x| x == 0.0));
    assert!(obs[24..].iter().all(|&x| x == 0.0));
}
