//! Advantage actor-critic agent.

pub mod adam;
pub mod model;
pub mod net;
pub mod train;

pub use model::{A2cModel, A2cPolicy, ActMode};
pub use net::{ActorCriticNet, NetConfig};
pub use train::{train, CurvePoint, EmbeddingMode, TrainConfig, TrainOutcome};
