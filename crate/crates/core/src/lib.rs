pub mod baselines;
pub mod dataset;
pub mod diagnose;
pub mod error;
pub mod nn;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};

pub use dataset::{generate_dataset, split_dataset, Dataset, EventClass, GenConfig, TopologySampler, Window, WINDOW_LEN};
pub use diagnose::{diagnose, register_reference, DiagnosisReport, ReferenceMap};
pub use nn::{Checkpoint, Classifier, Evaluation, LstmArch, LstmClassifier, TrainConfig};
pub use sim::{simulate, Branch, BranchId, FaultSpec, OtdrConfig, OtdrTrace, PonTopology};
