use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::dense::{Activation, Dense};
use super::loss::{argmax, batch_loss, batch_loss_and_dlogits, softmax_rows};
use super::lstm::LstmLayer;
use crate::dataset::{EventClass, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::seed;

/// Rows per forward pass when running inference over large inputs.
pub const INFERENCE_CHUNK: usize = 512;

/// Anything that maps `N x L` windows to class probabilities.
pub trait Classifier {
    fn input_len(&self) -> usize;

    fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>>;

    fn predict_batch(&self, x: &Array2<f64>) -> Result<Vec<EventClass>> {
        let p = self.predict_proba(x)?;
        Ok(p.rows()
            .into_iter()
            .map(|r| EventClass::from_index(argmax(r.as_slice().expect("contiguous row"))).expect("7 outputs"))
            .collect())
    }

    /// Class and probabilities for a single window.
    fn predict(&self, window: &[f64]) -> Result<(EventClass, Vec<f64>)> {
        let x = Array2::from_shape_vec((1, window.len()), window.to_vec()).map_err(|e| Error::Shape(e.to_string()))?;
        let p = self.predict_proba(&x)?;
        let probs = p.row(0).to_vec();
        let class = EventClass::from_index(argmax(&probs)).expect("7 outputs");
        Ok((class, probs))
    }
}

/// A differentiable classifier trained by [`train`](super::train::train).
///
/// Gradients are returned as a value of the same type so the optimizer can walk
/// parameters and gradients in lockstep through [`Network::tensors`].
pub trait Network: Classifier + Clone {
    fn logits(&self, x: &Array2<f64>) -> Result<Array2<f64>>;

    /// Mean cross-entropy over the batch and its gradient.
    fn loss_and_grad(&self, x: &Array2<f64>, labels: &[usize]) -> Result<(f64, Self)>;

    fn zeros_like(&self) -> Self;

    /// Every parameter tensor as a flat slice, in a fixed order.
    fn tensors(&self) -> Vec<&[f64]>;

    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn loss(&self, x: &Array2<f64>, labels: &[usize]) -> Result<f64> {
        let mut z = self.logits(x)?;
        softmax_rows(&mut z);
        Ok(batch_loss(&z, labels))
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

fn check_input(x: &Array2<f64>, len: usize) -> Result<()> {
    if x.ncols() != len {
        return Err(Error::Shape(format!("expected windows of {len} values, got {}", x.ncols())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("window contains non-finite values".into()));
    }
    Ok(())
}

fn check_labels(x: &Array2<f64>, labels: &[usize]) -> Result<()> {
    if labels.len() != x.nrows() || x.nrows() == 0 {
        return Err(Error::Shape(format!("{} labels for {} windows", labels.len(), x.nrows())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= EventClass::COUNT) {
        return Err(Error::InvalidArgument(format!("label index {bad}")));
    }
    Ok(())
}

fn chunked_proba(x: &Array2<f64>, logits: impl Fn(&Array2<f64>) -> Result<Array2<f64>>) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((x.nrows(), EventClass::COUNT));
    let mut start = 0;
    while start < x.nrows() {
        let end = (start + INFERENCE_CHUNK).min(x.nrows());
        let mut z = logits(&x.slice(s![start..end, ..]).to_owned())?;
        softmax_rows(&mut z);
        out.slice_mut(s![start..end, ..]).assign(&z);
        start = end;
    }
    Ok(out)
}

fn dense_tensors(d: &Dense) -> [&[f64]; 2] {
    [d.w.as_slice().expect("standard layout"), d.b.as_slice().expect("standard layout")]
}

fn dense_tensors_mut(d: &mut Dense) -> [&mut [f64]; 2] {
    [d.w.as_slice_mut().expect("standard layout"), d.b.as_slice_mut().expect("standard layout")]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmArch {
    pub seq_len: usize,
    pub hidden: usize,
    pub layers: usize,
    pub dense: usize,
}

impl Default for LstmArch {
    fn default() -> Self {
        LstmArch { seq_len: WINDOW_LEN, hidden: 32, layers: 1, dense: 16 }
    }
}

impl LstmArch {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.hidden == 0 || self.layers == 0 || self.dense == 0 {
            return Err(Error::InvalidConfig(format!("all architecture sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Stacked LSTM over scalar amplitudes, then a tanh dense layer and a 7-way output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmClassifier {
    pub seq_len: usize,
    pub lstm: Vec<LstmLayer>,
    pub hidden: Dense,
    pub output: Dense,
}

impl LstmClassifier {
    pub fn new(arch: LstmArch, seed: u64) -> Result<LstmClassifier> {
        arch.validate()?;
        let mut rng = seed::rng(seed);
        let mut lstm = Vec::with_capacity(arch.layers);
        for k in 0..arch.layers {
            let input = if k == 0 { 1 } else { arch.hidden };
            lstm.push(LstmLayer::glorot(input, arch.hidden, &mut rng));
        }
        let hidden = Dense::glorot(arch.hidden, arch.dense, Activation::Tanh, &mut rng);
        let output = Dense::glorot(arch.dense, EventClass::COUNT, Activation::Linear, &mut rng);
        Ok(LstmClassifier { seq_len: arch.seq_len, lstm, hidden, output })
    }

    pub fn arch(&self) -> LstmArch {
        LstmArch {
            seq_len: self.seq_len,
            hidden: self.lstm[0].hidden_size(),
            layers: self.lstm.len(),
            dense: self.hidden.outputs(),
        }
    }

    /// Checks that layer shapes chain together and all parameters are finite.
    pub fn validate(&self) -> Result<()> {
        if self.lstm.is_empty() || self.seq_len == 0 {
            return Err(Error::Shape("model needs at least one LSTM layer and a positive sequence length".into()));
        }
        let mut input = 1;
        for (k, layer) in self.lstm.iter().enumerate() {
            let h = layer.hidden_size();
            if layer.input_size() != input || layer.w_x.nrows() != 4 * h || layer.w_h.nrows() != 4 * h || layer.b.len() != 4 * h
            {
                return Err(Error::Shape(format!("LSTM layer {k} has inconsistent shapes")));
            }
            input = h;
        }
        if self.hidden.inputs() != input
            || self.hidden.b.len() != self.hidden.outputs()
            || self.output.inputs() != self.hidden.outputs()
            || self.output.outputs() != EventClass::COUNT
            || self.output.b.len() != EventClass::COUNT
        {
            return Err(Error::Shape("dense head does not match the LSTM output".into()));
        }
        if self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(())
    }

    fn raw_logits(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut inputs: Vec<Array2<f64>> = (0..self.seq_len).map(|t| x.slice(s![.., t..t + 1]).to_owned()).collect();
        for layer in &self.lstm {
            let trace = layer.forward(inputs);
            inputs = trace.hiddens[1..].to_vec();
        }
        let last = inputs.last().expect("seq_len > 0");
        self.output.forward(&self.hidden.forward(last))
    }
}

impl Classifier for LstmClassifier {
    fn input_len(&self) -> usize {
        self.seq_len
    }

    fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_input(x, self.seq_len)?;
        chunked_proba(x, |c| Ok(self.raw_logits(c)))
    }
}

impl Network for LstmClassifier {
    fn logits(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_input(x, self.seq_len)?;
        Ok(self.raw_logits(x))
    }

    fn loss_and_grad(&self, x: &Array2<f64>, labels: &[usize]) -> Result<(f64, Self)> {
        check_input(x, self.seq_len)?;
        check_labels(x, labels)?;
        let mut traces = Vec::with_capacity(self.lstm.len());
        let mut inputs: Vec<Array2<f64>> = (0..self.seq_len).map(|t| x.slice(s![.., t..t + 1]).to_owned()).collect();
        for layer in &self.lstm {
            let trace = layer.forward(inputs);
            inputs = trace.hiddens[1..].to_vec();
            traces.push(trace);
        }
        let last = traces.last().expect("at least one layer").last_hidden();
        let d1 = self.hidden.forward(last);
        let mut z = self.output.forward(&d1);
        softmax_rows(&mut z);
        let (loss, dz) = batch_loss_and_dlogits(&z, labels);

        let mut grad = self.zeros_like();
        let dd1 = self.output.backward(&d1, &z, &dz, &mut grad.output);
        let dh = self.hidden.backward(last, &d1, &dd1, &mut grad.hidden);

        let mut upstream: Vec<Option<Array2<f64>>> = vec![None; self.seq_len];
        upstream[self.seq_len - 1] = Some(dh);
        for k in (0..self.lstm.len()).rev() {
            let dx = self.lstm[k].backward(&traces[k], &upstream, &mut grad.lstm[k], k > 0)?;
            if k > 0 {
                upstream = dx.into_iter().map(Some).collect();
            }
        }
        Ok((loss, grad))
    }

    fn zeros_like(&self) -> Self {
        LstmClassifier {
            seq_len: self.seq_len,
            lstm: self.lstm.iter().map(LstmLayer::zeros_like).collect(),
            hidden: self.hidden.zeros_like(),
            output: self.output.zeros_like(),
        }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.lstm {
            out.push(l.w_x.as_slice().expect("standard layout"));
            out.push(l.w_h.as_slice().expect("standard layout"));
            out.push(l.b.as_slice().expect("standard layout"));
        }
        out.extend(dense_tensors(&self.hidden));
        out.extend(dense_tensors(&self.output));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.lstm {
            out.push(l.w_x.as_slice_mut().expect("standard layout"));
            out.push(l.w_h.as_slice_mut().expect("standard layout"));
            out.push(l.b.as_slice_mut().expect("standard layout"));
        }
        out.extend(dense_tensors_mut(&mut self.hidden));
        out.extend(dense_tensors_mut(&mut self.output));
        out
    }
}

/// Feed-forward baseline on the flattened window: dense layers with tanh and a
/// linear 7-way output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `sizes` lists the hidden widths; input is `input_len`, output is 7.
    pub fn new(input_len: usize, sizes: &[usize], seed: u64) -> Result<Mlp> {
        if input_len == 0 || sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        let mut rng = seed::rng(seed);
        let mut layers = Vec::new();
        let mut prev = input_len;
        for &n in sizes {
            layers.push(Dense::glorot(prev, n, Activation::Tanh, &mut rng));
            prev = n;
        }
        layers.push(Dense::glorot(prev, EventClass::COUNT, Activation::Linear, &mut rng));
        Ok(Mlp { layers })
    }

    /// The 60-32-16-7 baseline.
    pub fn baseline(seed: u64) -> Mlp {
        Mlp::new(WINDOW_LEN, &[32, 16], seed).expect("fixed sizes are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.layers.last() else {
            return Err(Error::Shape("empty network".into()));
        };
        for pair in self.layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Shape("consecutive layers do not chain".into()));
            }
        }
        if last.outputs() != EventClass::COUNT || self.layers.iter().any(|l| l.b.len() != l.outputs()) {
            return Err(Error::Shape("bad output layer".into()));
        }
        if self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(())
    }

    fn activations(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.clone()];
        for l in &self.layers {
            let next = l.forward(acts.last().expect("nonempty"));
            acts.push(next);
        }
        acts
    }
}

impl Classifier for Mlp {
    fn input_len(&self) -> usize {
        self.layers[0].inputs()
    }

    fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_input(x, self.input_len())?;
        chunked_proba(x, |c| Ok(self.activations(c).pop().expect("nonempty")))
    }
}

impl Network for Mlp {
    fn logits(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_input(x, self.input_len())?;
        Ok(self.activations(x).pop().expect("nonempty"))
    }

    fn loss_and_grad(&self, x: &Array2<f64>, labels: &[usize]) -> Result<(f64, Self)> {
        check_input(x, self.input_len())?;
        check_labels(x, labels)?;
        let mut acts = self.activations(x);
        let n = self.layers.len();
        softmax_rows(&mut acts[n]);
        let (loss, mut d) = batch_loss_and_dlogits(&acts[n], labels);
        let mut grad = self.zeros_like();
        for k in (0..n).rev() {
            d = self.layers[k].backward(&acts[k], &acts[k + 1], &d, &mut grad.layers[k]);
        }
        Ok((loss, grad))
    }

    fn zeros_like(&self) -> Self {
        Mlp { layers: self.layers.iter().map(Dense::zeros_like).collect() }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(dense_tensors).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(dense_tensors_mut).collect()
    }
}
