//! Gait parameters and the footstep stepper.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use resloco_sim::Terrain;

use crate::PlanError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitParams {
    /// Single-support duration T_ss [s].
    pub t_ss: f64,
    /// Double-support duration T_ds [s].
    pub t_ds: f64,
    /// Bound on the distance between consecutive footsteps [m].
    pub step_bound: f64,
    /// CoM height Δz [m].
    pub com_height: f64,
    pub gravity: f64,
    /// Swing apex above the mean of lift-off and landing heights [m].
    pub apex: f64,
    /// Number of previewed footsteps.
    pub n_steps: usize,
    /// Largest accepted |command| [m/s].
    pub max_speed: f64,
    /// Foot centre ahead of the ankle [m]; VRP waypoints sit above it.
    pub foot_center: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            t_ss: 0.6,
            t_ds: 0.2,
            step_bound: 0.3,
            com_height: 0.7,
            gravity: 9.81,
            apex: 0.05,
            n_steps: 3,
            max_speed: 0.4,
            foot_center: 0.05,
        }
    }
}

impl GaitParams {
    /// DCM time constant b = sqrt(Δz / g).
    pub fn b(&self) -> f64 {
        (self.com_height / self.gravity).sqrt()
    }

    /// One step cycle, T_ss + T_ds.
    pub fn cycle(&self) -> f64 {
        self.t_ss + self.t_ds
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.t_ss > 0.0 && self.t_ds > 0.0) {
            return Err(PlanError::InvalidGait("durations must be positive".into()));
        }
        if self.n_steps < 2 {
            return Err(PlanError::InvalidGait("n_steps must be at least 2".into()));
        }
        if !(self.com_height > 0.0 && self.gravity > 0.0 && self.step_bound > 0.0 && self.max_speed >= 0.0) {
            return Err(PlanError::InvalidGait("heights, gravity and bounds must be positive".into()));
        }
        Ok(())
    }
}

/// Foot pose `(ankle x, sole z, pitch)`.
pub type FootPose = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footstep {
    /// 0 left, 1 right.
    pub side: usize,
    pub pose: FootPose,
}

/// Landing pose on the terrain at ankle position `x`.
pub fn landing_pose(x: f64, terrain: &Terrain) -> FootPose {
    FootPose::new(x, terrain.height(x), terrain.slope(x).atan())
}

/// `n_steps` alternating landings starting with `first_swing`. Each landing
/// is one step length `clamp(v·(T_ss+T_ds), ±bound)` ahead of the current
/// stance foot, so a zero command brings the feet together and steps in
/// place.
pub fn plan_footsteps(
    stance: [FootPose; 2],
    first_swing: usize,
    command: f64,
    gait: &GaitParams,
    terrain: &Terrain,
) -> Result<Vec<Footstep>, PlanError> {
    if !command.is_finite() || command.abs() > gait.max_speed {
        return Err(PlanError::CommandOutOfRange {
            command,
            max: gait.max_speed,
        });
    }
    let step = (command * gait.cycle()).clamp(-gait.step_bound, gait.step_bound);
    let mut x = [stance[0].x, stance[1].x];
    let mut side = first_swing;
    let mut steps = Vec::with_capacity(gait.n_steps);
    for _ in 0..gait.n_steps {
        x[side] = x[1 - side] + step;
        steps.push(Footstep {
            side,
            pose: landing_pose(x[side], terrain),
        });
        side = 1 - side;
    }
    Ok(steps)
}
