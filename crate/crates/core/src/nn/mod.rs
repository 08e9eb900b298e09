//! Minimal f64 neural-network stack: matrices, reverse-mode autodiff,
//! transformer layers, AdamW, and a bit-exact checkpoint container.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod matrix;
pub mod optim;
pub mod params;
pub mod tape;

pub use matrix::Matrix;
pub use params::{ParamId, ParamSet};
pub use tape::{Grads, NodeId, Tape};
