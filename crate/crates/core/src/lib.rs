//! Imitation learning from state-only demonstrations.
//!
//! The learner combines an inverse dynamics model that labels teacher
//! transitions with pseudo-actions, a behavioural-cloning policy, a forward
//! dynamics generator conditioned on the policy's action distribution, and a
//! recurrent discriminator trained adversarially against teacher windows.

pub mod baselines;
pub mod data;
pub mod env;
pub mod error;
pub mod experts;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod sail;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases used throughout training.
pub type Tensor = nn::Tensor<f64>;
pub type ParamStore = nn::ParamStore<f64>;
pub type Graph<'p> = nn::Graph<'p, f64>;
pub type Adam = nn::Adam<f64>;
