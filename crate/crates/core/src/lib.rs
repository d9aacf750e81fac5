//! Training and auditing harness for attention-pooled multiple-instance
//! classifiers.
//!
//! The crate trains populations of attention-based set classifiers on
//! synthetic bag-classification tasks with hidden instance labels and
//! measures how well the learned attention identifies the instances that
//! determine the bag label (IAUC), alone and when attention is averaged over
//! ensembles.
//!
//! - [`nn`]: dense kernel (MLP, softmax cross-entropy, Adam, gradient check)
//! - [`model`]: the attention-pooled classifier and its training loop
//! - [`data`]: MIL / AND / XOR bag generation and source ingestion
//! - [`eval`]: AUROC, IAUC, Spearman, ΔIAUC, accuracy
//! - [`ensemble`]: attention-averaging ensembles and bad-ensemble curves
//! - [`harness`]: grid search, repetition campaigns, reports and the CLI

pub mod binio;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod harness;
pub mod model;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
