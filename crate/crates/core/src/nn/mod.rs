//! Recurrent window classifier written directly on top of `ndarray`.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod sweep;
pub mod train;

pub use adam::{adam_step, adam_update, AdamState};
pub use checkpoint::{Checkpoint, ModelParams};
pub use dense::{Activation, Dense};
pub use gradcheck::{compare_gradients, gradient_check, relative_error};
pub use loss::{argmax, cross_entropy, softmax};
pub use lstm::{CellState, Gate, LstmLayer, LstmTrace};
pub use model::{Classifier, LstmArch, LstmClassifier, Mlp, Network};
pub use sweep::{cross_grid, default_grid, sweep, write_sweep_csv, SweepCell, SweepRow};
pub use train::{clip_global_norm, evaluate, train, train_with, EpochRecord, Evaluation, History, TrainConfig, TrainOutcome};
