use ndarray::Array2;

use crate::dataset::EventClass;

/// Probability floor applied before taking the log in cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Softmax with max subtraction.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Row-wise softmax in place.
pub fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

pub fn cross_entropy(probs: &[f64], label: EventClass) -> f64 {
    -probs[label.index()].max(PROB_FLOOR).ln()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy of a batch of probability rows, and the gradient of that
/// mean with respect to the logits, `(p - onehot) / batch`.
pub(crate) fn batch_loss_and_dlogits(probs: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = labels.len() as f64;
    let mut loss = 0.0;
    let mut d = probs.clone();
    for (r, &y) in labels.iter().enumerate() {
        loss -= probs[[r, y]].max(PROB_FLOOR).ln();
        d[[r, y]] -= 1.0;
    }
    d.mapv_inplace(|v| v / n);
    (loss / n, d)
}

pub(crate) fn batch_loss(probs: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = labels.iter().enumerate().map(|(r, &y)| -probs[[r, y]].max(PROB_FLOOR).ln()).sum();
    total / labels.len() as f64
}
