//! Closed-loop walking on flat ground with the nominal model.
//!
//! `cargo run --release -p resloco-control --example walk -- 0.2 6`

use nalgebra::Vector2;
use resloco_control::{GaitParams, GaitScheduler, Measured, WbcGains, WholeBodyController};
use resloco_sim::{foot_pose, standing_pose, step, RobotModel, SimState, Terrain, Vec9};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let command = args.first().copied().unwrap_or(0.2);
    let duration = args.get(1).copied().unwrap_or(6.0);

    let model = RobotModel::nominal();
    let terrain = Terrain::flat(0.8);
    let gait = GaitParams::default();
    let q = standing_pose(&model, [0.0, 0.0], 0.0, gait.foot_center, model.com_height).expect("pose");
    let mut state = SimState::new(q, Vec9::zeros());
    let kin = state.kinematics(&model);
    let stance = [foot_pose(&model, &kin, 0), foot_pose(&model, &kin, 1)];
    let xi0 = Vector2::from(resloco_sim::dcm(&model, &state));
    let mut scheduler = GaitScheduler::new(gait, terrain.clone(), stance, 0, xi0, 0.0, command).expect("plan");
    let mut wbc = WholeBodyController::new(WbcGains::default());

    // 200 Hz control, 1 kHz physics, torques held between ticks.
    let period = 5e-3;
    let dt = 1e-3;
    let steps = (duration / period).round() as usize;
    let mut sum = 0.0;
    let mut worst: f64 = 0.0;
    for k in 0..steps {
        scheduler.update(state.t, command).expect("replan");
        let reference = scheduler.reference(state.t);
        let out = wbc.tick(&Measured { model: &model, q: &state.q, qd: &state.qd }, &reference, terrain.friction);
        let e = out.errors.dcm_norm();
        sum += e;
        worst = worst.max(e);
        if k % 20 == 0 {
            println!(
                "t={:5.2} x={:+.3} z={:.3} pitch={:+.3} e_xi={:.4} e_foot={:.4} {:?}",
                state.t,
                state.q[0],
                state.q[1],
                state.q[2],
                e,
                out.errors.foot_norm(),
                out.status
            );
        }
        for _ in 0..5 {
            state = match step(&state, &model, &terrain, &out.tau, dt) {
                Ok(s) => s,
                Err(err) => {
                    println!("simulation failed: {err}");
                    return;
                }
            };
        }
    }
    println!(
        "mean e_xi {:.4} m, max {:.4} m, base x {:.3} m, fallbacks {}",
        sum / steps as f64,
        worst,
        state.q[0],
        wbc.failures
    );
}
