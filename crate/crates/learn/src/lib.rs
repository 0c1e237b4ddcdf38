//! Learning engine: reverse-mode differentiation, recurrent Gaussian
//! actor, privileged critic, and the PPO + supervised-likelihood update.

pub mod checkpoint;
pub mod gae;
pub mod gradcheck;
pub mod loss;
pub mod mat;
pub mod networks;
pub mod nn;
pub mod optim;
pub mod ppo;
pub mod tape;

pub use checkpoint::Checkpoint;
pub use gae::{compute_gae, normalize};
pub use mat::Mat;
pub use networks::{CriticNet, Hidden, PolicyIds, PolicyNet, LOG_STD_MAX, LOG_STD_MIN};
pub use nn::{GruLayer, Linear, Mlp, Module};
pub use optim::{clip_grad_norm, Adam};
pub use ppo::{
    actor_loss, critic_loss, gradients_for, ActorBatch, ActorLoss, ActorStep, Learner, LossWeights,
    SupervisionPairing, TrainConfig, Trajectory, Transition, UpdateStats,
};
pub use tape::{Graph, Gradients, Id};

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
