//! VRP waypoints over the previewed footsteps.

use nalgebra::Vector2;

use crate::gait::{FootPose, Footstep, GaitParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Double,
    /// Single support on the given foot (0 left, 1 right).
    Single(usize),
}

impl Support {
    /// Which feet carry load.
    pub fn stance(self) -> [bool; 2] {
        match self {
            Support::Double => [true, true],
            Support::Single(s) => [s == 0, s == 1],
        }
    }

    pub fn swing_foot(self) -> Option<usize> {
        match self {
            Support::Double => None,
            Support::Single(s) => Some(1 - s),
        }
    }
}

/// `n` waypoints and the `n − 1` phases between them.
#[derive(Debug, Clone, PartialEq)]
pub struct VrpPlan {
    pub waypoints: Vec<Vector2<f64>>,
    pub durations: Vec<f64>,
    pub support: Vec<Support>,
}

impl VrpPlan {
    pub fn num_phases(&self) -> usize {
        self.durations.len()
    }

    pub fn horizon(&self) -> f64 {
        self.durations.iter().sum()
    }
}

/// VRP waypoint above the centre of a foot.
pub fn waypoint(pose: &FootPose, gait: &GaitParams) -> Vector2<f64> {
    Vector2::new(pose.x + gait.foot_center, pose.y + gait.com_height)
}

/// Phases: an initial double support from `start` onto the support foot,
/// then per footstep a single support followed by a double support onto
/// the landing. The last double support ends above the midpoint of the
/// final two feet, where a hold phase brings the DCM to rest.
pub fn vrp_waypoints(
    stance: [FootPose; 2],
    footsteps: &[Footstep],
    start: Vector2<f64>,
    gait: &GaitParams,
) -> VrpPlan {
    let mut feet = stance;
    let first = footsteps.first().map_or(1, |f| f.side);
    let mut support = 1 - first;
    let mut plan = VrpPlan {
        waypoints: vec![start, waypoint(&feet[support], gait)],
        durations: vec![gait.t_ds],
        support: vec![Support::Double],
    };
    for (k, step) in footsteps.iter().enumerate() {
        let here = waypoint(&feet[support], gait);
        plan.waypoints.push(here);
        plan.durations.push(gait.t_ss);
        plan.support.push(Support::Single(support));
        feet[step.side] = step.pose;
        let next = if k + 1 == footsteps.len() {
            (waypoint(&feet[0], gait) + waypoint(&feet[1], gait)) * 0.5
        } else {
            waypoint(&step.pose, gait)
        };
        plan.waypoints.push(next);
        plan.durations.push(gait.t_ds);
        plan.support.push(Support::Double);
        support = step.side;
    }
    let last = *plan.waypoints.last().unwrap();
    plan.waypoints.push(last);
    plan.durations.push(gait.cycle());
    plan.support.push(Support::Double);
    plan
}
