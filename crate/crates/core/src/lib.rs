//! Self-imitation policy optimization on small, exactly enumerable
//! multi-turn tool environments.
//!
//! The crate is organised bottom-up:
//!
//! * [`env`]: deterministic tool MDPs with enumerated state tables.
//! * [`policy`]: tabular softmax policy, sampling, checkpoints.
//! * [`reward`]: composite reward and the cosine curricula.
//! * [`advantage`]: group-relative advantages and the baseline buffer.
//! * [`replay`]: positive-advantage replay with recalibrated refiltering.
//! * [`trainer`]: the clipped objectives, filters and the training step.
//! * [`harness`]: config files, run directories, comparison and evaluation.

pub mod advantage;
pub mod env;
pub mod error;
pub mod harness;
pub mod policy;
pub mod replay;
pub mod reward;
pub mod trainer;
pub mod trajectory;

pub use env::{ActionId, Env, EnvState, EpisodeSpec, StepOutcome};
pub use error::{Error, Result};
pub use policy::{PolicyParams, PolicySnapshot, RngStream};
pub use reward::RewardBreakdown;
pub use trainer::{MetricsRecord, TrainConfig, Trainer, Variant};
pub use trajectory::{Trajectory, Turn};
