//! Minimal double-precision numeric core: dense arrays, MLP layers, exact
//! reverse-mode gradients, seeded counter-based randomness, and the two
//! optimizers used by training and sampling.

pub mod array;
pub mod mlp;
pub mod optim;
pub mod rng;
pub mod tape;

pub use array::{RealMatrix, RealVector};
pub use mlp::{Activation, Layer, MlpParams, MlpVars};
pub use optim::{adam_step, momentum_step, OptimizerState};
pub use rng::RngStream;
pub use tape::{grad_scalar, Gradients, Shape, Tape, Var};
