use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Mean softmax cross-entropy over the rows of `logits` and its gradient with
/// respect to the logits, `(softmax - one_hot) / batch`.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::Dimension {
            context: "softmax_cross_entropy labels",
            expected: logits.rows(),
            actual: labels.len(),
        });
    }
    if logits.rows() == 0 || logits.cols() < 2 {
        return Err(Error::Input(format!(
            "softmax_cross_entropy needs a non-empty batch of at least 2 logits, got {:?}",
            logits.shape()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= logits.cols()) {
        return Err(Error::Input(format!("label {bad} out of range")));
    }

    let batch = logits.rows() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let log_sum = sum.ln();
        total += log_sum - (row[label] - max);
        for (g, &z) in grad.row_mut(r).iter_mut().zip(row) {
            *g = (z - max).exp() / sum / batch;
        }
        grad.row_mut(r)[label] -= 1.0 / batch;
    }
    Ok((total / batch, grad))
}

/// Numerically stable softmax of a vector. The normaliser is summed in
/// sorted order, so permuting `scores` permutes the output bit for bit.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let mut sorted = out.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let sum: f64 = sorted.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}
