use std::io::Write;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::loss::batch_loss;
use super::model::{Classifier, Network};
use crate::dataset::{Dataset, EventClass};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-loss improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    /// Rescale each mini-batch gradient to at most this global L2 norm; `None` disables clipping.
    #[serde(default)]
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            clip_norm: Some(1.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.clip_norm.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad training configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Fraction of validation windows classified correctly.
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    /// CSV with header `epoch,train_loss,val_loss,val_acc`, preceded by an
    /// optional `#` comment line.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "epoch,train_loss,val_loss,val_acc")?;
        for r in &self.epochs {
            writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.val_acc)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<N> {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: N,
    pub history: History,
    pub best_epoch: usize,
}

/// Scales every gradient tensor so their joint L2 norm is at most `max`; returns the norm before scaling.
pub fn clip_global_norm<N: Network>(grad: &mut N, max: f64) -> f64 {
    let norm = grad.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum::<f64>().sqrt();
    if norm > max {
        let s = max / norm;
        for t in grad.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

fn gather(x: &Array2<f64>, labels: &[usize], idx: &[usize]) -> (Array2<f64>, Vec<usize>) {
    (x.select(Axis(0), idx), idx.iter().map(|&i| labels[i]).collect())
}

pub fn train<N: Network>(init: N, train_ds: &Dataset, val_ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome<N>> {
    train_with(init, train_ds, val_ds, cfg, |_| {})
}

/// Mini-batch Adam with a fixed per-epoch shuffle derived from `cfg.seed`.
/// `on_epoch` sees each record as soon as the epoch finishes.
pub fn train_with<N: Network>(
    init: N,
    train_ds: &Dataset,
    val_ds: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<N>> {
    cfg.validate()?;
    if train_ds.is_empty() || val_ds.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be nonempty".into()));
    }
    let (x, y) = (train_ds.features(), train_ds.labels());
    let (vx, vy) = (val_ds.features(), val_ds.labels());
    let n = x.nrows();

    let mut model = init;
    let mut state = AdamState::new(&model);
    let mut best = (f64::INFINITY, model.clone(), 0);
    let mut history = History::default();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::sub_rng(cfg.seed, epoch as u64));
        let mut total = 0.0;
        for (step, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (bx, by) = gather(&x, &y, idx);
            let (loss, mut grad) = model.loss_and_grad(&bx, &by)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            if let Some(max) = cfg.clip_norm {
                clip_global_norm(&mut grad, max);
            }
            total += loss * idx.len() as f64;
            adam_step(&mut model, &grad, &mut state, cfg)?;
        }
        let probs = model.predict_proba(&vx)?;
        let val_loss = batch_loss(&probs, &vy);
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, step: usize::MAX });
        }
        let correct = probs
            .rows()
            .into_iter()
            .zip(&vy)
            .filter(|(r, &t)| super::loss::argmax(r.as_slice().expect("contiguous row")) == t)
            .count();
        let record = EpochRecord { epoch, train_loss: total / n as f64, val_loss, val_acc: correct as f64 / vy.len() as f64 };
        on_epoch(&record);
        history.epochs.push(record);

        if val_loss < best.0 {
            best = (val_loss, model.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome { model: best.1, history, best_epoch: best.2 })
}

/// Per-class accuracy summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Mean of the confusion-matrix diagonal.
    pub accuracy: f64,
    /// Row-normalized: `confusion[i][j]` is the fraction of class `i` predicted as `j`.
    pub confusion: Vec<Vec<f64>>,
    pub counts: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn from_predictions(truth: &[EventClass], predicted: &[EventClass]) -> Result<Evaluation> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!("{} labels for {} predictions", truth.len(), predicted.len())));
        }
        let k = EventClass::COUNT;
        let mut counts = vec![vec![0usize; k]; k];
        for (t, p) in truth.iter().zip(predicted) {
            counts[t.index()][p.index()] += 1;
        }
        let mut confusion = vec![vec![0.0; k]; k];
        for (i, row) in counts.iter().enumerate() {
            let total: usize = row.iter().sum();
            if total == 0 {
                return Err(Error::InsufficientClass(EventClass::ALL[i].to_string(), 0));
            }
            for j in 0..k {
                confusion[i][j] = row[j] as f64 / total as f64;
            }
        }
        let accuracy = (0..k).map(|i| confusion[i][i]).sum::<f64>() / k as f64;
        Ok(Evaluation { accuracy, confusion, counts })
    }

    pub fn class_accuracy(&self, class: EventClass) -> f64 {
        self.confusion[class.index()][class.index()]
    }

    /// Column of the largest off-diagonal entry in the row of `class`; lowest index on ties.
    pub fn top_confusion(&self, class: EventClass) -> EventClass {
        let i = class.index();
        let mut best: Option<usize> = None;
        for j in (0..EventClass::COUNT).filter(|&j| j != i) {
            if best.is_none_or(|b| self.confusion[i][j] > self.confusion[i][b]) {
                best = Some(j);
            }
        }
        EventClass::ALL[best.expect("seven classes")]
    }

    /// Confusion matrix as CSV with a `true` column followed by one column per predicted class.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {c}")?;
        }
        let header: Vec<String> = EventClass::ALL.iter().map(|c| c.to_string()).collect();
        writeln!(out, "true,{}", header.join(","))?;
        for (c, row) in EventClass::ALL.iter().zip(&self.confusion) {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{c},{}", vals.join(","))?;
        }
        Ok(())
    }
}

pub fn evaluate<C: Classifier + ?Sized>(model: &C, ds: &Dataset) -> Result<Evaluation> {
    let truth: Vec<EventClass> =
        ds.labels().into_iter().map(|i| EventClass::from_index(i).expect("dataset labels are valid")).collect();
    let predicted = model.predict_batch(&ds.features())?;
    Evaluation::from_predictions(&truth, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor_is_identity() {
        let truth: Vec<EventClass> = EventClass::ALL.iter().cycle().take(70).copied().collect();
        let e = Evaluation::from_predictions(&truth, &truth).unwrap();
        assert_eq!(e.accuracy, 1.0);
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(e.confusion[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn rows_normalized_and_mean_diagonal() {
        let truth = [EventClass::C0, EventClass::C0, EventClass::C0, EventClass::C0];
        let mut t: Vec<EventClass> = truth.to_vec();
        let mut p: Vec<EventClass> = vec![EventClass::C0, EventClass::C4, EventClass::C4, EventClass::C1];
        for c in &EventClass::ALL[1..] {
            t.push(*c);
            p.push(*c);
        }
        let e = Evaluation::from_predictions(&t, &p).unwrap();
        assert_eq!(e.confusion[0], vec![0.25, 0.25, 0.0, 0.0, 0.5, 0.0, 0.0]);
        assert!((e.accuracy - (0.25 + 6.0) / 7.0).abs() < 1e-15);
        assert_eq!(e.top_confusion(EventClass::C0), EventClass::C4);
        assert_eq!(e.top_confusion(EventClass::C3), EventClass::C0);
    }

    #[test]
    fn empty_class_is_an_error() {
        let t = [EventClass::C0, EventClass::C1];
        assert!(matches!(Evaluation::from_predictions(&t, &t), Err(Error::InsufficientClass(..))));
    }

    #[test]
    fn history_csv() {
        let h = History {
            epochs: vec![EpochRecord { epoch: 1, train_loss: 1.5, val_loss: 1.25, val_acc: 0.5 }],
        };
        let mut buf = Vec::new();
        h.write_csv(&mut buf, Some("seed=3")).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# seed=3\nepoch,train_loss,val_loss,val_acc\n1,1.5,1.25,0.5\n");
    }
}
