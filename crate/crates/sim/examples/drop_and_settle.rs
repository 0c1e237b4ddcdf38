//! Drops the robot from 5 cm onto flat ground while a joint PD loop holds
//! the standing posture, and optionally writes the state trace as CSV.
//!
//! `cargo run --release -p resloco-sim --example drop_and_settle -- [out.csv]`

use resloco_sim::{com_state, standing_pose, step, RobotModel, SimState, Terrain, TraceWriter, Vec9, DEFAULT_DT, NJ};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = RobotModel::nominal();
    let terrain = Terrain::flat(1.0);
    let mut q = standing_pose(&model, [-0.05, 0.05], 0.0, 0.05, model.com_height)?;
    q[1] += 0.05;
    let q0 = q;
    let limits = model.torque_limits();
    let mut state = SimState::new(q, Vec9::zeros());
    let mut trace = match std::env::args().nth(1) {
        Some(path) => Some(TraceWriter::new(std::fs::File::create(path)?)?),
        None => None,
    };
    for k in 0..=600 {
        if k % 50 == 0 {
            let (c, v) = com_state(&model, &state);
            let normal: f64 = state.contact_forces.iter().map(|f| f.normal).sum();
            println!(
                "t={:.2} s  com z={:.4} m  vz={:+.3} m/s  contacts={:?}  normal force={normal:.1} N",
                state.t, c[1], v[1], state.contact_active
            );
        }
        if let Some(w) = &mut trace {
            w.record(&model, &terrain, &state)?;
        }
        let tau: [f64; NJ] = std::array::from_fn(|j| {
            let i = j + 3;
            (400.0 * (q0[i] - state.q[i]) - 20.0 * state.qd[i]).clamp(-limits[j], limits[j])
        });
        state = step(&state, &model, &terrain, &tau, DEFAULT_DT)?;
    }
    if let Some(w) = &mut trace {
        w.flush()?;
    }
    Ok(())
}
