use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
}

/// Fully connected layer, `y = act(x W^T + b)` on row-major batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `outputs x inputs`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Dense {
        Dense { w: Array2::zeros((outputs, inputs)), b: Array1::zeros(outputs), activation }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Dense {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let w = Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-limit..=limit));
        Dense { w, b: Array1::zeros(outputs), activation }
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn zeros_like(&self) -> Dense {
        Dense::zeros(self.inputs(), self.outputs(), self.activation)
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = Array2::zeros((x.nrows(), self.outputs()));
        for mut row in y.rows_mut() {
            row.assign(&self.b);
        }
        general_mat_mul(1.0, x, &self.w.t(), 1.0, &mut y);
        if self.activation == Activation::Tanh {
            y.mapv_inplace(f64::tanh);
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input. `y` is this layer's forward output.
    pub fn backward(&self, x: &Array2<f64>, y: &Array2<f64>, dy: &Array2<f64>, grad: &mut Dense) -> Array2<f64> {
        let dz = match self.activation {
            Activation::Linear => dy.clone(),
            Activation::Tanh => {
                let mut dz = dy.clone();
                dz.zip_mut_with(y, |d, &t| *d *= 1.0 - t * t);
                dz
            }
        };
        general_mat_mul(1.0, &dz.t(), x, 1.0, &mut grad.w);
        grad.b += &dz.sum_axis(Axis(0));
        dz.dot(&self.w)
    }
}
