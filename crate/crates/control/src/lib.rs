//! DCM walking planner and whole-body controller for the planar biped.

pub mod dcm;
pub mod gait;
pub mod scheduler;
pub mod swing;
pub mod vrp;
pub mod wbc;

pub use dcm::{dcm_backward_pass, DcmPhase, DcmSample, DcmTrajectory};
pub use gait::{landing_pose, plan_footsteps, FootPose, Footstep, GaitParams};
pub use scheduler::{export_plan_csv, GaitScheduler, Reference, SwingReference, WalkingPlan};
pub use swing::{swing_trajectory, FootTrajectory};
pub use vrp::{vrp_waypoints, Support, VrpPlan};
pub use wbc::{
    build_wbc_qp, com_force, dcm_control_law, gravity_compensation, tracking_errors, Measured, TickOutput, TickStatus,
    TrackingErrors, WbcGains, WbcProblem, WholeBodyController,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("command {command} m/s outside ±{max} m/s")]
    CommandOutOfRange { command: f64, max: f64 },
    #[error("invalid gait parameters: {0}")]
    InvalidGait(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<csv::Error> for PlanError {
    fn from(e: csv::Error) -> Self {
        PlanError::Io(e.to_string())
    }
}
