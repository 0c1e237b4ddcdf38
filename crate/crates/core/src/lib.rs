//! Supervised residual learning for the planar biped: domain
//! randomization, Base/Oracle/residual policies, the training loop and the
//! experiment harness.

pub mod config;
pub mod episode;
pub mod harness;
pub mod policy;
pub mod randomization;
pub mod train;

pub use config::{Config, ControlConfig, ExperimentSpec};
pub use episode::{run_episode, Agent, EpisodeMetrics, EpisodeOptions, EpisodeOutcome, TraceRow, Variant};
pub use train::{train, EvalPoint, Progress, RunDir, TrainOptions, TrainOutcome, UpdateLog};

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("planner error: {0}")]
    Plan(#[from] resloco_control::PlanError),
    #[error("simulation error: {0}")]
    Sim(#[from] resloco_sim::SimError),
    #[error("learning error: {0}")]
    Learn(#[from] resloco_learn::LearnError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown channel {name:?}; available: {available}")]
    UnknownChannel { name: String, available: String },
}
