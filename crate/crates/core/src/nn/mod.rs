//! Dense multilayer perceptrons with exact backpropagation and Adam.
//!
//! This is the numeric substrate shared by the structural, regression and
//! generative learners. Batches are row-major `(samples, features)` matrices.

mod adam;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use mlp::{Activation, Gradients, Mlp, Trace};
