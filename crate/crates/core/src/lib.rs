//! Federated reinforcement learning for epidemic intervention policy.
//!
//! Simulated province clients each train an agent against an independent
//! compartment-model epidemic environment. A server periodically averages
//! the clients' network parameters into a global model, and a centralized
//! trainer provides the baseline the global model is compared against.
//!
//! Module map:
//!
//! - [`env`]: the epidemic decision environment (reset/step).
//! - [`nn`]: parameter vectors, dense networks and the Adam optimizer.
//! - [`agents`]: A2C, PPO, DDPG and TD3 behind a common [`agents::Agent`] trait.
//! - [`federation`]: client selection, local training, averaging, evaluation.
//! - [`experiment`]: run configuration, metrics files, plots and run comparison.

pub mod agents;
pub mod env;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
