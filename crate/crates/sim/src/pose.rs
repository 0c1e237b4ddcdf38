//! Standing configurations by inverse kinematics.

use nalgebra::Vector2;

use crate::kinematics::{Kinematics, Vec9};
use crate::model::RobotModel;
use crate::SimError;

/// Hip and knee angles placing the ankle at `d` relative to the hip for an
/// upright torso. The knee bends forward (negative knee angle).
fn leg_ik(model: &RobotModel, d: Vector2<f64>) -> Option<(f64, f64)> {
    let l1 = -model.links[2].joint[1];
    let l2 = -model.links[3].joint[1];
    let r = d.norm();
    if r >= l1 + l2 || r <= (l1 - l2).abs() {
        return None;
    }
    let cos_knee = (r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    let knee = -cos_knee.clamp(-1.0, 1.0).acos();
    // Absolute direction of the hip-to-ankle vector measured from straight down.
    let phi = d.x.atan2(-d.y);
    let hip = phi - (l2 * knee.sin()).atan2(l1 + l2 * knee.cos());
    Some((hip, knee))
}

/// Double-support pose with both soles flat on z = `ground` at ankle
/// positions `foot_x`, torso upright, CoM horizontally at `com_x` and
/// `com_height` above the ground.
pub fn standing_pose(
    model: &RobotModel,
    foot_x: [f64; 2],
    ground: f64,
    com_x: f64,
    com_height: f64,
) -> Result<Vec9, SimError> {
    let ankle_z = ground - model.foot.heel[1];
    let build = |hip: Vector2<f64>| -> Option<Vec9> {
        let mut q = Vec9::zeros();
        q[0] = hip.x;
        q[1] = hip.y;
        for (side, fx) in foot_x.iter().enumerate() {
            let (h, k) = leg_ik(model, Vector2::new(fx - hip.x, ankle_z - hip.y))?;
            q[3 + 3 * side] = h;
            q[4 + 3 * side] = k;
            q[5 + 3 * side] = -(h + k);
        }
        Some(q)
    };
    let com = |q: &Vec9| Kinematics::at_rest(model, q).com(model).0;
    let target = Vector2::new(com_x, ground + com_height);
    let mut hip = target;
    for _ in 0..50 {
        let q = build(hip).ok_or(SimError::Unreachable)?;
        let err = target - com(&q);
        if err.amax() < 1e-12 {
            return Ok(q);
        }
        // CoM moves almost rigidly with the hip; a fixed-point update converges.
        hip += err;
    }
    Err(SimError::Unreachable)
}
