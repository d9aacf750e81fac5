//! Minimal dense numerical kernel: matrices, multilayer perceptrons with
//! hand-derived gradients, softmax cross-entropy, Adam, and a
//! finite-difference gradient checker.

mod adam;
mod gradcheck;
mod loss;
mod matrix;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{
    gradient_check, gradient_check_detailed, relative_error, GradCheck, GRADIENT_FLOOR,
};
pub use loss::{softmax, softmax_cross_entropy};
pub use matrix::{axpy, dot, Matrix};
pub use mlp::{Activation, Dense, Mlp, MlpCache, MlpGrads};
