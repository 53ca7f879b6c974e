use ndarray::Array2;

use super::model::Network;
use crate::error::{Error, Result};

/// Relative difference used by the gradient check.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Largest relative error between the backpropagated gradient and central
/// differences with step `eps`, over every parameter.
///
/// Large steps (around `1e-1`) inflate the truncation error of the central
/// difference and make the check fail on a correct gradient.
pub fn gradient_check<N: Network>(model: &N, x: &Array2<f64>, labels: &[usize], eps: f64) -> Result<f64> {
    let (_, grads) = model.loss_and_grad(x, labels)?;
    compare_gradients(model, x, labels, &grads, eps)
}

/// Same as [`gradient_check`] with externally supplied gradients.
pub fn compare_gradients<N: Network>(model: &N, x: &Array2<f64>, labels: &[usize], grads: &N, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {eps}")));
    }
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut probe = model.clone();
    let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    if shapes != analytic.iter().map(Vec::len).collect::<Vec<_>>() {
        return Err(Error::Shape("gradient tensors do not match the model".into()));
    }
    let mut worst = 0.0f64;
    for (k, grad) in analytic.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let orig = probe.tensors()[k][i];
            probe.tensors_mut()[k][i] = orig + eps;
            let up = probe.loss(x, labels)?;
            probe.tensors_mut()[k][i] = orig - eps;
            let down = probe.loss(x, labels)?;
            probe.tensors_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    Ok(worst)
}
