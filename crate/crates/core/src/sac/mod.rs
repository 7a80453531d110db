//! Off-policy actor-critic machinery: a tiny flat-parameter MLP, Adam,
//! a ring replay buffer and the agent tying them together.

pub mod adam;
pub mod agent;
pub mod mlp;
pub mod replay;

pub use adam::Adam;
pub use agent::{SacAgent, SacDiagnostics, SacHyperParams, LOG_STD_MAX, LOG_STD_MIN};
pub use mlp::{Mlp, MlpCache};
pub use replay::{ReplayBuffer, Transition};
