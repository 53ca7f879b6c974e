//! Complex-step differentiation of a straightforward scalar re-implementation of
//! the LSTM classifier. `Im f(θ + ih) / h` has no subtractive cancellation, so it
//! recovers derivatives to near machine precision and serves as an oracle that
//! is independent of both the batched forward pass and the analytic backward pass.

use num_complex::Complex64 as C;
use pon_sentinel::nn::{LstmClassifier, Network};

const STEP: f64 = 1e-30;

fn sigmoid(z: C) -> C {
    C::new(1.0, 0.0) / (C::new(1.0, 0.0) + (-z).exp())
}

/// Loss of one window with parameters given as flat tensors in `Network::tensors` order.
fn loss(model: &LstmClassifier, params: &[Vec<C>], window: &[f64], label: usize) -> C {
    let mut seq: Vec<Vec<C>> = window.iter().map(|&v| vec![C::new(v, 0.0)]).collect();
    let mut k = 0;
    for layer in &model.lstm {
        let (inp, hs) = (layer.input_size(), layer.hidden_size());
        let (wx, wh, b) = (&params[k], &params[k + 1], &params[k + 2]);
        k += 3;
        let mut h = vec![C::new(0.0, 0.0); hs];
        let mut c = vec![C::new(0.0, 0.0); hs];
        let mut out = Vec::with_capacity(seq.len());
        for x in &seq {
            let pre = |row: usize| {
                let mut z = b[row];
                for i in 0..inp {
                    z += wx[row * inp + i] * x[i];
                }
                for j in 0..hs {
                    z += wh[row * hs + j] * h[j];
                }
                z
            };
            let mut nh = vec![C::new(0.0, 0.0); hs];
            for u in 0..hs {
                let f = sigmoid(pre(u));
                let i = sigmoid(pre(hs + u));
                let g = pre(2 * hs + u).tanh();
                let o = sigmoid(pre(3 * hs + u));
                c[u] = f * c[u] + i * g;
                nh[u] = o * c[u].tanh();
            }
            h = nh;
            out.push(h.clone());
        }
        seq = out;
    }
    let last = seq.last().expect("nonempty window");
    let dense = |w: &[C], b: &[C], x: &[C], tanh: bool| -> Vec<C> {
        let n = x.len();
        (0..b.len())
            .map(|r| {
                let z = b[r] + (0..n).map(|j| w[r * n + j] * x[j]).sum::<C>();
                if tanh {
                    z.tanh()
                } else {
                    z
                }
            })
            .collect()
    };
    let d1 = dense(&params[k], &params[k + 1], last, true);
    let z = dense(&params[k + 2], &params[k + 3], &d1, false);
    let m = z.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
    let lse = C::new(m, 0.0) + z.iter().map(|v| (v - m).exp()).sum::<C>().ln();
    lse - z[label]
}

/// Complex-step gradient of the single-window loss, in `Network::tensors` order.
pub fn gradient(model: &LstmClassifier, window: &[f64], label: usize) -> Vec<Vec<f64>> {
    let mut params: Vec<Vec<C>> = model.tensors().iter().map(|t| t.iter().map(|&v| C::new(v, 0.0)).collect()).collect();
    let mut out = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let mut g = Vec::with_capacity(params[k].len());
        for i in 0..params[k].len() {
            params[k][i].im = STEP;
            g.push(loss(model, &params, window, label).im / STEP);
            params[k][i].im = 0.0;
        }
        out.push(g);
    }
    out
}

/// Largest `|a - b| / max(|a|, |b|, 1e-12)` between the analytic gradient and the oracle.
pub fn max_relative_error(model: &LstmClassifier, window: &[f64], label: usize) -> f64 {
    let x = ndarray::Array2::from_shape_vec((1, window.len()), window.to_vec()).expect("row");
    let (_, g) = model.loss_and_grad(&x, &[label]).expect("valid input");
    let oracle = gradient(model, window, label);
    let mut worst = 0.0f64;
    for (a, o) in g.tensors().iter().zip(&oracle) {
        for (&p, &q) in a.iter().zip(o) {
            worst = worst.max(pon_sentinel::nn::relative_error(p, q));
        }
    }
    worst
}
