//! Shallow reference classifiers and wall-clock measurement helpers.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, EventClass};
use crate::error::{Error, Result};
use crate::nn::{train, Classifier, LstmArch, LstmClassifier, Mlp, TrainConfig, TrainOutcome};

pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes with independent per-feature normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub priors: Vec<f64>,
    /// `classes x features`
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl GnbModel {
    /// Fits `classes` classes; every class must have at least one sample.
    pub fn fit(x: &Array2<f64>, labels: &[usize], classes: usize) -> Result<GnbModel> {
        if labels.len() != x.nrows() {
            return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), x.nrows())));
        }
        let d = x.ncols();
        let mut counts = vec![0usize; classes];
        let mut means = vec![vec![0.0; d]; classes];
        for (row, &y) in x.rows().into_iter().zip(labels) {
            if y >= classes {
                return Err(Error::InvalidArgument(format!("label {y} outside {classes} classes")));
            }
            counts[y] += 1;
            means[y].iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            let name = EventClass::from_index(c).map_or_else(|| c.to_string(), |e| e.to_string());
            return Err(Error::InsufficientClass(name, 0));
        }
        for (m, &n) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= n as f64);
        }
        let mut variances = vec![vec![0.0; d]; classes];
        for (row, &y) in x.rows().into_iter().zip(labels) {
            for ((s, v), m) in variances[y].iter_mut().zip(row).zip(&means[y]) {
                *s += (v - m) * (v - m);
            }
        }
        for (var, &n) in variances.iter_mut().zip(&counts) {
            var.iter_mut().for_each(|v| *v = (*v / n as f64).max(VARIANCE_FLOOR));
        }
        let total = labels.len() as f64;
        let priors = counts.iter().map(|&n| n as f64 / total).collect();
        Ok(GnbModel { priors, means, variances })
    }

    pub fn classes(&self) -> usize {
        self.priors.len()
    }

    pub fn features(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Unnormalized log posterior of every class.
    pub fn log_posteriors(&self, x: &[f64]) -> Vec<f64> {
        const LN_2PI: f64 = 1.8378770664093453;
        (0..self.classes())
            .map(|c| {
                let ll: f64 = x
                    .iter()
                    .zip(&self.means[c])
                    .zip(&self.variances[c])
                    .map(|((v, m), s)| -0.5 * (LN_2PI + s.ln() + (v - m) * (v - m) / s))
                    .sum();
                self.priors[c].ln() + ll
            })
            .collect()
    }

    /// Maximum a posteriori class index; lowest index on ties.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        crate::nn::argmax(&self.log_posteriors(x))
    }
}

impl Classifier for GnbModel {
    fn input_len(&self) -> usize {
        self.features()
    }

    fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.features() {
            return Err(Error::Shape(format!("expected {} features, got {}", self.features(), x.ncols())));
        }
        if self.classes() != EventClass::COUNT {
            return Err(Error::Shape(format!("model has {} classes, expected 7", self.classes())));
        }
        let mut out = Array2::zeros((x.nrows(), self.classes()));
        for (row, mut o) in x.rows().into_iter().zip(out.rows_mut()) {
            let lp = self.log_posteriors(row.as_slice().expect("contiguous row"));
            let p = crate::nn::softmax(&lp);
            o.iter_mut().zip(p).for_each(|(a, b)| *a = b);
        }
        Ok(out)
    }
}

pub fn fit_gnb(train: &Dataset) -> Result<GnbModel> {
    GnbModel::fit(&train.features(), &train.labels(), EventClass::COUNT)
}

pub fn predict_gnb(model: &GnbModel, window: &[f64]) -> Result<EventClass> {
    if window.len() != model.features() {
        return Err(Error::Shape(format!("expected {} values, got {}", model.features(), window.len())));
    }
    EventClass::from_index(model.predict_index(window))
        .ok_or_else(|| Error::Shape("model has more than 7 classes".into()))
}

/// Trains the dense 60-32-16-7 baseline with the shared Adam loop.
pub fn fit_ann(train_ds: &Dataset, val_ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome<Mlp>> {
    train(Mlp::baseline(cfg.seed), train_ds, val_ds, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Inference,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Train => "train",
            Phase::Inference => "inference",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub phase: Phase,
    pub input_size: usize,
    /// Median wall-clock seconds over the repetitions.
    pub seconds: f64,
}

/// Which model family a training benchmark fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchModel {
    Gnb,
    Ann,
    Lstm(LstmArch),
}

impl BenchModel {
    pub fn name(&self) -> &'static str {
        match self {
            BenchModel::Gnb => "gnb",
            BenchModel::Ann => "ann",
            BenchModel::Lstm(_) => "lstm",
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall-clock seconds of `f` over `repetitions` runs.
pub fn time_median(repetitions: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    if repetitions < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 repetitions, got {repetitions}")));
    }
    let mut times = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    Ok(median(times))
}

/// Inference time of each named classifier over every window of `ds`.
pub fn benchmark_inference(models: &[(&str, &dyn Classifier)], ds: &Dataset, repetitions: usize) -> Result<Vec<BenchRow>> {
    let x = ds.features();
    models
        .iter()
        .map(|(name, m)| {
            let seconds = time_median(repetitions, || m.predict_batch(&x).map(|_| ()))?;
            Ok(BenchRow { model: name.to_string(), phase: Phase::Inference, input_size: ds.len(), seconds })
        })
        .collect()
}

/// Training time of each model family on prefixes of `ds` of the given sizes.
///
/// Neural models run exactly `cfg.max_epochs` epochs (early stopping is turned
/// off) and validate on the first 256 windows of the prefix.
pub fn benchmark_training(
    models: &[BenchModel],
    ds: &Dataset,
    sizes: &[usize],
    repetitions: usize,
    cfg: &TrainConfig,
) -> Result<Vec<BenchRow>> {
    let cfg = TrainConfig { patience: 0, ..cfg.clone() };
    let mut rows = Vec::new();
    for &size in sizes {
        if size == 0 || size > ds.len() {
            return Err(Error::InvalidArgument(format!("input size {size} outside 1..={}", ds.len())));
        }
        let part = ds.subset(&(0..size).collect::<Vec<_>>());
        let val = part.subset(&(0..size.min(256)).collect::<Vec<_>>());
        for model in models {
            let seconds = time_median(repetitions, || match *model {
                BenchModel::Gnb => fit_gnb(&part).map(|_| ()),
                BenchModel::Ann => fit_ann(&part, &val, &cfg).map(|_| ()),
                BenchModel::Lstm(arch) => train(LstmClassifier::new(arch, cfg.seed)?, &part, &val, &cfg).map(|_| ()),
            })?;
            rows.push(BenchRow { model: model.name().to_string(), phase: Phase::Train, input_size: size, seconds });
        }
    }
    Ok(rows)
}

/// CSV with header `model,phase,input_size,seconds`, preceded by an optional `#` comment.
pub fn write_bench_csv<W: Write>(rows: &[BenchRow], mut out: W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "model,phase,input_size,seconds")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.model, r.phase, r.input_size, r.seconds)?;
    }
    Ok(())
}
