use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{dot, softmax, Matrix};

/// Normalised attention weights over the instances of one bag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttentionProfile(Vec<f64>);

impl AttentionProfile {
    /// Wraps weights after checking they form a distribution (within 1e-6).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let profile = AttentionProfile(weights);
        profile.validate()?;
        Ok(profile)
    }

    pub(crate) fn new_unchecked(weights: Vec<f64>) -> Self {
        AttentionProfile(weights)
    }

    /// The uniform distribution over `m` instances.
    pub fn uniform(m: usize) -> Self {
        AttentionProfile(vec![1.0 / m as f64; m])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Input("attention profile is empty".into()));
        }
        if self.0.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(Error::Input("attention weights must be finite and non-negative".into()));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Input(format!("attention weights sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Raw scores `wᵀ tanh(V z_m)` together with the `tanh` activations `H` (M × L).
pub(crate) fn attention_logits(
    embeddings: &Matrix,
    v: &Matrix,
    w: &[f64],
) -> Result<(Vec<f64>, Matrix)> {
    if v.cols() != embeddings.cols() {
        return Err(Error::Dimension {
            context: "attention V columns",
            expected: embeddings.cols(),
            actual: v.cols(),
        });
    }
    if w.len() != v.rows() {
        return Err(Error::Dimension {
            context: "attention w length",
            expected: v.rows(),
            actual: w.len(),
        });
    }
    let mut hidden = embeddings.matmul_transposed(v)?;
    for h in hidden.data_mut() {
        *h = h.tanh();
    }
    let scores = (0..hidden.rows()).map(|m| dot(hidden.row(m), w)).collect();
    Ok((scores, hidden))
}

/// `a_m = softmax_m(wᵀ tanh(V z_mᵀ))` over the rows of `embeddings`.
pub fn attention_scores(embeddings: &Matrix, v: &Matrix, w: &[f64]) -> Result<AttentionProfile> {
    if embeddings.rows() == 0 {
        return Err(Error::Input("attention over an empty bag".into()));
    }
    let (scores, _) = attention_logits(embeddings, v, w)?;
    Ok(AttentionProfile(softmax(&scores)))
}
