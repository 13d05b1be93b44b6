//! Dense-network machinery: flat parameter vectors, tanh MLPs with exact
//! reverse-mode gradients, and the Adam optimizer.

mod mlp;
mod optim;
mod params;

pub use mlp::{Backprop, MlpSpec, OutputHead, Trace};
pub use optim::{clip_grad_norm, Adam, AdamConfig};
pub use params::{average_params, Layout, ParamVector};
