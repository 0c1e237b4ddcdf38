use std::time::Instant;

use nalgebra::{SMatrix, SVector, Vector2, Vector3};
use proptest::prelude::*;
use resloco_control::{
    dcm_backward_pass, export_plan_csv, plan_footsteps, swing_trajectory, vrp_waypoints, GaitParams, GaitScheduler,
    Support, VrpPlan,
};
use resloco_sim::Terrain;

fn two_step_plan(command: f64) -> (VrpPlan, GaitParams) {
    let gait = GaitParams {
        n_steps: 2,
        ..GaitParams::default()
    };
    let stance = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.0, 0.0, 0.0)];
    let steps = plan_footsteps(stance, 0, command, &gait, &Terrain::flat(1.0)).unwrap();
    let plan = vrp_waypoints(stance, &steps, Vector2::new(0.05, 0.7), &gait);
    (plan, gait)
}

/// Piecewise-linear VRP read straight off the waypoint list.
fn vrp_at(plan: &VrpPlan, t: f64) -> Vector2<f64> {
    let mut start = 0.0;
    for (i, d) in plan.durations.iter().enumerate() {
        if t <= start + d || i + 1 == plan.durations.len() {
            let s = ((t - start) / d).clamp(0.0, 1.0);
            return plan.waypoints[i] * (1.0 - s) + plan.waypoints[i + 1] * s;
        }
        start += d;
    }
    unreachable!()
}

#[test]
fn closed_form_matches_rk4_on_six_phase_plan() {
    let started = Instant::now();
    let (plan, gait) = two_step_plan(0.2);
    assert_eq!(plan.num_phases(), 6);
    let traj = dcm_backward_pass(&plan, &gait);
    let b = gait.b();

    // Integrate ξ̇ = (ξ − v)/b backward from the terminal condition, the
    // stable direction of the ODE.
    let h = 1e-4;
    let horizon = plan.horizon();
    let n = (horizon / h).round() as usize;
    let f = |t: f64, xi: Vector2<f64>| (xi - vrp_at(&plan, t)) / b;
    let mut xi = *plan.waypoints.last().unwrap();
    let mut worst: f64 = 0.0;
    for k in (1..=n).rev() {
        let t = k as f64 * h;
        let k1 = f(t, xi);
        let k2 = f(t - 0.5 * h, xi - k1 * (0.5 * h));
        let k3 = f(t - 0.5 * h, xi - k2 * (0.5 * h));
        let k4 = f(t - h, xi - k3 * h);
        xi -= (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let tt = (k - 1) as f64 * h;
        worst = worst.max((traj.eval(tt).xi - xi).amax());
    }
    assert!(worst < 1e-6, "max deviation {worst:e}");
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn reference_is_continuous_at_phase_boundaries() {
    let (plan, gait) = two_step_plan(0.3);
    let traj = dcm_backward_pass(&plan, &gait);
    for i in 0..traj.phases.len() - 1 {
        let left = traj.eval_in_phase(i, traj.phases[i].duration);
        let right = traj.eval_in_phase(i + 1, 0.0);
        assert!((left.xi - right.xi).amax() < 1e-10);
        assert!((left.vrp - right.vrp).amax() < 1e-12);
    }
    let end = traj.phases.last().unwrap();
    let last = traj.eval_in_phase(traj.phases.len() - 1, end.duration);
    assert!((last.xi - plan.waypoints.last().unwrap()).amax() < 1e-12);
}

#[test]
fn reference_derivative_matches_finite_differences() {
    let (plan, gait) = two_step_plan(-0.2);
    let traj = dcm_backward_pass(&plan, &gait);
    let h = 1e-6;
    for p in &traj.phases {
        for s in [0.1, 0.37, 0.5, 0.81] {
            let t = p.start + s * p.duration;
            let fd = (traj.eval(t + h).xi - traj.eval(t - h).xi) / (2.0 * h);
            let sample = traj.eval(t);
            assert!((fd - sample.xi_dot).amax() < 1e-6);
            // ODE residual of the closed form.
            assert!((sample.xi_dot - (sample.xi - sample.vrp) / traj.b).amax() < 1e-9);
        }
    }
}

#[test]
fn coefficients_reproduce_closed_form() {
    let (plan, gait) = two_step_plan(0.1);
    let traj = dcm_backward_pass(&plan, &gait);
    for (i, p) in traj.phases.iter().enumerate() {
        for s in [0.0, 0.25, 0.5, 1.0] {
            let t = s * p.duration;
            let (a, bb, g) = p.coefficients(t, traj.b);
            let xi = p.v0 * a + p.v_end * bb + p.xi_end * g;
            assert!((xi - traj.eval_in_phase(i, t).xi).amax() < 1e-12);
        }
    }
}

#[test]
fn swing_polynomial_matches_linear_system_oracle() {
    let start = Vector3::new(-0.1, 0.0, 0.0);
    let target = Vector3::new(0.22, 0.03, 0.05);
    let (big_t, apex) = (0.6, 0.05);
    let tr = swing_trajectory(start, target, big_t, apex);
    for axis in 0..3 {
        let mid = if axis == 1 {
            0.5 * (start[axis] + target[axis]) + apex
        } else {
            0.5 * (start[axis] + target[axis])
        };
        // Rows: p(0), p'(0), p''(0), p(T), p'(T), p''(T), p(T/2).
        let mut a = SMatrix::<f64, 7, 7>::zeros();
        let rhs = SVector::<f64, 7>::from_column_slice(&[start[axis], 0.0, 0.0, target[axis], 0.0, 0.0, mid]);
        for j in 0..7 {
            let jf = j as f64;
            let pw = |t: f64, k: i32| if k < 0 { 0.0 } else { t.powi(k) };
            a[(0, j)] = pw(0.0, j as i32);
            a[(1, j)] = jf * pw(0.0, j as i32 - 1);
            a[(2, j)] = jf * (jf - 1.0) * pw(0.0, j as i32 - 2);
            a[(3, j)] = pw(big_t, j as i32);
            a[(4, j)] = jf * pw(big_t, j as i32 - 1);
            a[(5, j)] = jf * (jf - 1.0) * pw(big_t, j as i32 - 2);
            a[(6, j)] = pw(0.5 * big_t, j as i32);
        }
        let c = a.lu().solve(&rhs).unwrap();
        for j in 0..7 {
            assert!((c[j] - tr.coeffs[axis][j]).abs() < 1e-8 * (1.0 + c[j].abs()), "axis {axis} coeff {j}");
        }
    }
    let (p, v, acc) = tr.eval(big_t);
    assert!((p - target).amax() < 1e-12 && v.amax() < 1e-10 && acc.amax() < 1e-8);
}

fn scheduler(command: f64) -> GaitScheduler {
    let stance = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.0, 0.0, 0.0)];
    GaitScheduler::new(
        GaitParams::default(),
        Terrain::flat(1.0),
        stance,
        0,
        Vector2::new(0.05, 0.7),
        0.0,
        command,
    )
    .unwrap()
}

#[test]
fn replanning_keeps_reference_continuous() {
    let mut s = scheduler(0.2);
    let cycle = s.gait.cycle();
    let mut sides = Vec::new();
    for k in 1..8 {
        let t = k as f64 * cycle;
        let before = s.reference(t - 1e-9).dcm.xi;
        let command = if k % 2 == 0 { 0.3 } else { -0.1 };
        assert!(s.update(t, command).unwrap());
        let after = s.reference(t).dcm.xi;
        assert!((before - after).amax() < 1e-6);
        sides.push(s.plan().footsteps[0].side);
        assert_eq!(s.reference(t + 0.5 * s.gait.t_ds).support, Support::Double);
    }
    // Swing foot alternates from plan to plan.
    assert!(sides.windows(2).all(|w| w[0] != w[1]));
}

#[test]
fn replanning_is_deterministic() {
    let run = || {
        let mut s = scheduler(0.1);
        let mut out = Vec::new();
        for k in 0..2000 {
            let t = k as f64 * 5e-3;
            s.update(t, 0.25 * (k as f64 * 1e-3).sin()).unwrap();
            let r = s.reference(t);
            out.push((r.dcm.xi.x.to_bits(), r.dcm.xi.y.to_bits(), r.feet[0].x.to_bits()));
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn plan_export_has_one_row_per_sample() {
    let s = scheduler(0.2);
    let mut buf = Vec::new();
    export_plan_csv(s.plan(), 0.01, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows = (s.plan().dcm.horizon() / 0.01).round() as usize + 1;
    assert_eq!(text.lines().count(), rows + 1);
}

proptest! {
    #[test]
    fn closed_form_satisfies_ode_and_terminal_condition(
        xs in prop::collection::vec(-0.5f64..0.5, 4..8),
        zs in prop::collection::vec(0.6f64..0.8, 8),
        durations in prop::collection::vec(0.1f64..0.9, 8),
    ) {
        let n = xs.len() - 1;
        let plan = VrpPlan {
            waypoints: (0..=n).map(|i| Vector2::new(xs[i], zs[i])).collect(),
            durations: durations[..n].to_vec(),
            support: vec![Support::Double; n],
        };
        let gait = GaitParams::default();
        let traj = dcm_backward_pass(&plan, &gait);
        let end = traj.horizon();
        prop_assert!((traj.eval_in_phase(n - 1, plan.durations[n - 1]).xi - plan.waypoints[n]).amax() < 1e-12);
        for k in 1..20 {
            let t = end * k as f64 / 20.0;
            let s = traj.eval(t);
            let h = 1e-6;
            let fd = (traj.eval(t + h).xi - traj.eval(t - h).xi) / (2.0 * h);
            let boundary = traj.phases.iter().any(|p| (p.start - t).abs() < 2.0 * h);
            if !boundary {
                prop_assert!((fd - (s.xi - s.vrp) / traj.b).amax() < 1e-5);
            }
        }
    }
}
