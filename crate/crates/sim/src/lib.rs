//! Planar floating-base biped simulator.
//!
//! Coordinates are `q = [x, z, pitch, hip_l, knee_l, ankle_l, hip_r,
//! knee_r, ankle_r]`, with angles counter-clockwise positive in the x-z
//! plane (x forward, z up). A positive hip angle swings the leg forward.

pub mod contact;
pub mod dynamics;
pub mod integrator;
pub mod kinematics;
pub mod model;
pub mod pose;
pub mod state;
pub mod trace;

pub use contact::{contact_model, ContactWrench, Terrain, NC};
pub use dynamics::{bias_forces, forward_dynamics, inverse_dynamics, kinetic_energy, mass_matrix, passive_forces, potential_energy};
pub use integrator::{advance, step, DEFAULT_DT};
pub use kinematics::{foot_pose, foot_pose_jacobian, Kinematics, Mat9, Vec9};
pub use model::{FootGeometry, Joint, Link, RobotModel, FOOT_BODY, NB, NJ, NQ};
pub use pose::standing_pose;
pub use state::{com_state, dcm, ActuationBuffer, SimState};
pub use trace::TraceWriter;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid terrain: {0}")]
    InvalidTerrain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("step size must be positive, got {0}")]
    InvalidStep(f64),
    #[error("mass matrix is not positive definite")]
    SingularMassMatrix,
    #[error("simulation diverged at t = {t}")]
    Diverged { t: f64 },
    #[error("target pose is out of reach")]
    Unreachable,
    #[error("io error: {0}")]
    Io(String),
}

impl From<csv::Error> for SimError {
    fn from(e: csv::Error) -> Self {
        SimError::Io(e.to_string())
    }
}
