use serde::{Deserialize, Serialize};

use super::model::Network;
use super::train::TrainConfig;
use crate::error::{Error, Result};

/// First and second moment estimates for every parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Number of updates applied so far.
    pub t: u64,
}

impl AdamState {
    pub fn new<N: Network>(model: &N) -> AdamState {
        let zeros: Vec<Vec<f64>> = model.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState { m: zeros.clone(), v: zeros, t: 0 }
    }
}

/// Bias-corrected Adam update of one tensor at step `t >= 1`.
pub fn adam_update(theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &TrainConfig) {
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powf(t as f64);
    let c2 = 1.0 - b2.powf(t as f64);
    for k in 0..theta.len() {
        m[k] = b1 * m[k] + (1.0 - b1) * g[k];
        v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
        let mh = m[k] / c1;
        let vh = v[k] / c2;
        theta[k] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
    }
}

/// Advances the step counter and applies one update to every tensor of `params`.
pub fn adam_step<N: Network>(params: &mut N, grads: &N, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    let gs = grads.tensors();
    let mut ps = params.tensors_mut();
    if ps.len() != gs.len() || ps.len() != state.m.len() {
        return Err(Error::Shape("parameter, gradient and optimizer tensors differ in count".into()));
    }
    for (k, (p, g)) in ps.iter().zip(&gs).enumerate() {
        if p.len() != g.len() || p.len() != state.m[k].len() {
            return Err(Error::Shape(format!("tensor {k} size mismatch")));
        }
    }
    state.t += 1;
    for (k, (p, g)) in ps.iter_mut().zip(&gs).enumerate() {
        adam_update(p, g, &mut state.m[k], &mut state.v[k], state.t, cfg);
    }
    Ok(())
}
