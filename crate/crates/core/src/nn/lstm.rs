//! LSTM layer with hand-derived backpropagation through time.
//!
//! The four gates are stacked row-wise in the order forget, input, candidate,
//! output, so `w_x` is `4H x I`, `w_h` is `4H x H` and `b` has `4H` entries.
//! All computations run on batches of sequences, one `B x I` matrix per step.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Candidate = 2,
    Output = 3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub w_x: Array2<f64>,
    pub w_h: Array2<f64>,
    pub b: Array1<f64>,
}

/// Activations of one cell update for a single sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
}

/// Everything the backward pass needs from a forward pass over a batch.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    /// Input at each step, `B x I`.
    pub inputs: Vec<Array2<f64>>,
    /// Activated gates at each step, `B x 4H` in gate order.
    pub gates: Vec<Array2<f64>>,
    /// Cell states `c_0 ..= c_T`.
    pub cells: Vec<Array2<f64>>,
    /// `tanh(c_t)` for `t = 1 ..= T`.
    pub tanh_cells: Vec<Array2<f64>>,
    /// Hidden states `h_0 ..= h_T`.
    pub hiddens: Vec<Array2<f64>>,
}

impl LstmTrace {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn last_hidden(&self) -> &Array2<f64> {
        self.hiddens.last().expect("trace holds h_0")
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmLayer {
    pub fn zeros(input_size: usize, hidden_size: usize) -> LstmLayer {
        LstmLayer {
            w_x: Array2::zeros((4 * hidden_size, input_size)),
            w_h: Array2::zeros((4 * hidden_size, hidden_size)),
            b: Array1::zeros(4 * hidden_size),
        }
    }

    /// Glorot-uniform per gate matrix (fan-in + fan-out of the `H x I` and
    /// `H x H` blocks). Forget-gate biases start at 1, all others at 0.
    pub fn glorot<R: Rng>(input_size: usize, hidden_size: usize, rng: &mut R) -> LstmLayer {
        let lx = (6.0 / (input_size + hidden_size) as f64).sqrt();
        let lh = (6.0 / (2 * hidden_size) as f64).sqrt();
        LstmLayer {
            w_x: Array2::from_shape_simple_fn((4 * hidden_size, input_size), || rng.random_range(-lx..=lx)),
            w_h: Array2::from_shape_simple_fn((4 * hidden_size, hidden_size), || rng.random_range(-lh..=lh)),
            b: Array1::from_shape_fn(4 * hidden_size, |k| if k < hidden_size { 1.0 } else { 0.0 }),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_x.ncols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.ncols()
    }

    pub fn zeros_like(&self) -> LstmLayer {
        LstmLayer::zeros(self.input_size(), self.hidden_size())
    }

    /// Input weights, recurrent weights and bias of one gate.
    pub fn gate(&self, gate: Gate) -> (ArrayView2<'_, f64>, ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let h = self.hidden_size();
        let rows = gate as usize * h..(gate as usize + 1) * h;
        (
            self.w_x.slice(s![rows.clone(), ..]),
            self.w_h.slice(s![rows.clone(), ..]),
            self.b.slice(s![rows]),
        )
    }

    /// One batched cell update. Returns `(gates, c, tanh(c), h)`.
    fn step(
        &self,
        x: &Array2<f64>,
        h_prev: &Array2<f64>,
        c_prev: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
        let batch = x.nrows();
        let hs = self.hidden_size();
        let mut z = Array2::zeros((batch, 4 * hs));
        for mut row in z.rows_mut() {
            row.assign(&self.b);
        }
        general_mat_mul(1.0, x, &self.w_x.t(), 1.0, &mut z);
        general_mat_mul(1.0, h_prev, &self.w_h.t(), 1.0, &mut z);

        let mut c = Array2::zeros((batch, hs));
        let mut tc = Array2::zeros((batch, hs));
        let mut h = Array2::zeros((batch, hs));
        {
            let zs = z.as_slice_mut().expect("standard layout");
            let cp = c_prev.as_slice().expect("standard layout");
            let cs = c.as_slice_mut().expect("standard layout");
            let ts = tc.as_slice_mut().expect("standard layout");
            let hsl = h.as_slice_mut().expect("standard layout");
            for r in 0..batch {
                let g = &mut zs[r * 4 * hs..(r + 1) * 4 * hs];
                for v in &mut g[..2 * hs] {
                    *v = sigmoid(*v);
                }
                for v in &mut g[2 * hs..3 * hs] {
                    *v = v.tanh();
                }
                for v in &mut g[3 * hs..] {
                    *v = sigmoid(*v);
                }
                for j in 0..hs {
                    let k = r * hs + j;
                    let cn = g[j] * cp[k] + g[hs + j] * g[2 * hs + j];
                    cs[k] = cn;
                    let t = cn.tanh();
                    ts[k] = t;
                    hsl[k] = g[3 * hs + j] * t;
                }
            }
        }
        (z, c, tc, h)
    }

    /// Single-sequence cell update from explicit previous states.
    pub fn cell_forward(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<CellState> {
        let hs = self.hidden_size();
        if x.len() != self.input_size() || h_prev.len() != hs || c_prev.len() != hs {
            return Err(Error::Shape(format!(
                "cell expects x[{}], h[{hs}], c[{hs}]; got x[{}], h[{}], c[{}]",
                self.input_size(),
                x.len(),
                h_prev.len(),
                c_prev.len()
            )));
        }
        let row = |v: &[f64]| Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row vector");
        let (g, c, _, h) = self.step(&row(x), &row(h_prev), &row(c_prev));
        let g = g.row(0);
        Ok(CellState {
            h: h.row(0).to_vec(),
            c: c.row(0).to_vec(),
            forget: g.slice(s![..hs]).to_vec(),
            input: g.slice(s![hs..2 * hs]).to_vec(),
            candidate: g.slice(s![2 * hs..3 * hs]).to_vec(),
            output: g.slice(s![3 * hs..]).to_vec(),
        })
    }

    /// Runs the layer over a batch of sequences starting from zero states.
    pub fn forward(&self, inputs: Vec<Array2<f64>>) -> LstmTrace {
        let batch = inputs.first().map_or(0, |x| x.nrows());
        let hs = self.hidden_size();
        let steps = inputs.len();
        let mut trace = LstmTrace {
            gates: Vec::with_capacity(steps),
            cells: Vec::with_capacity(steps + 1),
            tanh_cells: Vec::with_capacity(steps),
            hiddens: Vec::with_capacity(steps + 1),
            inputs,
        };
        trace.cells.push(Array2::zeros((batch, hs)));
        trace.hiddens.push(Array2::zeros((batch, hs)));
        for t in 0..steps {
            let (g, c, tc, h) = self.step(&trace.inputs[t], &trace.hiddens[t], &trace.cells[t]);
            trace.gates.push(g);
            trace.cells.push(c);
            trace.tanh_cells.push(tc);
            trace.hiddens.push(h);
        }
        trace
    }

    /// Runs one scalar-input sequence; returns the final hidden state and the trace.
    pub fn sequence_forward(&self, seq: &[f64]) -> Result<(Vec<f64>, LstmTrace)> {
        if self.input_size() != 1 {
            return Err(Error::Shape(format!("layer takes {}-dimensional input", self.input_size())));
        }
        if seq.is_empty() {
            return Err(Error::Shape("empty sequence".into()));
        }
        let inputs = seq.iter().map(|&v| Array2::from_elem((1, 1), v)).collect();
        let trace = self.forward(inputs);
        Ok((trace.last_hidden().row(0).to_vec(), trace))
    }

    /// Backpropagation through time.
    ///
    /// `dh[t]` is the loss gradient flowing into `h_{t+1}` from outside the layer
    /// (the head, or the layer above); `None` entries are zero. Parameter
    /// gradients are accumulated into `grad`. When `want_dx` is set the gradient
    /// with respect to each step's input is returned.
    pub fn backward(
        &self,
        trace: &LstmTrace,
        dh: &[Option<Array2<f64>>],
        grad: &mut LstmLayer,
        want_dx: bool,
    ) -> Result<Vec<Array2<f64>>> {
        let steps = trace.steps();
        if dh.len() != steps {
            return Err(Error::Shape(format!("{} upstream gradients for {steps} steps", dh.len())));
        }
        let hs = self.hidden_size();
        let batch = trace.hiddens[0].nrows();
        if trace.hiddens[0].ncols() != hs || trace.inputs.first().is_some_and(|x| x.ncols() != self.input_size()) {
            return Err(Error::Shape("trace does not match layer dimensions".into()));
        }
        let mut dh_next = Array2::<f64>::zeros((batch, hs));
        let mut dc_next = Array2::<f64>::zeros((batch, hs));
        let mut dz = Array2::<f64>::zeros((batch, 4 * hs));
        let mut dxs = if want_dx { vec![Array2::zeros((0, 0)); steps] } else { Vec::new() };

        for t in (0..steps).rev() {
            if let Some(up) = &dh[t] {
                if up.dim() != (batch, hs) {
                    return Err(Error::Shape(format!("upstream gradient at step {t} has shape {:?}", up.dim())));
                }
                dh_next += up;
            }
            {
                let g = trace.gates[t].as_slice().expect("standard layout");
                let cp = trace.cells[t].as_slice().expect("standard layout");
                let tc = trace.tanh_cells[t].as_slice().expect("standard layout");
                let dhs = dh_next.as_slice().expect("standard layout");
                let dcs = dc_next.as_slice_mut().expect("standard layout");
                let dzs = dz.as_slice_mut().expect("standard layout");
                for r in 0..batch {
                    let gr = &g[r * 4 * hs..(r + 1) * 4 * hs];
                    let dzr = &mut dzs[r * 4 * hs..(r + 1) * 4 * hs];
                    for j in 0..hs {
                        let k = r * hs + j;
                        let (f, i, cand, o) = (gr[j], gr[hs + j], gr[2 * hs + j], gr[3 * hs + j]);
                        let dhv = dhs[k];
                        let do_ = dhv * tc[k];
                        let dc = dcs[k] + dhv * o * (1.0 - tc[k] * tc[k]);
                        dzr[j] = dc * cp[k] * f * (1.0 - f);
                        dzr[hs + j] = dc * cand * i * (1.0 - i);
                        dzr[2 * hs + j] = dc * i * (1.0 - cand * cand);
                        dzr[3 * hs + j] = do_ * o * (1.0 - o);
                        dcs[k] = dc * f;
                    }
                }
            }
            general_mat_mul(1.0, &dz.t(), &trace.inputs[t], 1.0, &mut grad.w_x);
            general_mat_mul(1.0, &dz.t(), &trace.hiddens[t], 1.0, &mut grad.w_h);
            grad.b += &dz.sum_axis(Axis(0));
            general_mat_mul(1.0, &dz, &self.w_h, 0.0, &mut dh_next);
            if want_dx {
                dxs[t] = dz.dot(&self.w_x);
            }
        }
        Ok(dxs)
    }
}
