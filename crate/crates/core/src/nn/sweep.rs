//! Architecture sweep over LSTM depth and dense width on one fixed dataset.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::model::{LstmArch, LstmClassifier};
use super::train::{evaluate, train, TrainConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepCell {
    pub layers: usize,
    pub neurons: usize,
}

/// Depth axis at 16 dense neurons plus width axis at one layer, without repeating the shared cell.
pub fn default_grid() -> Vec<SweepCell> {
    let mut cells: Vec<SweepCell> = (1..=4).map(|layers| SweepCell { layers, neurons: 16 }).collect();
    cells.extend([8, 32, 64].map(|neurons| SweepCell { layers: 1, neurons }));
    cells
}

/// Full cross product of the given layer counts and neuron counts.
pub fn cross_grid(layers: &[usize], neurons: &[usize]) -> Vec<SweepCell> {
    layers.iter().flat_map(|&l| neurons.iter().map(move |&n| SweepCell { layers: l, neurons: n })).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub layers: usize,
    pub neurons: usize,
    /// Mean per-class test accuracy; `None` when the cell failed.
    pub accuracy: Option<f64>,
    pub train_seconds: Option<f64>,
    pub best_epoch: Option<usize>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Trains one model per cell with the same seed and data. A cell that fails
/// to train becomes a row carrying its error and the sweep moves on.
pub fn sweep(
    grid: &[SweepCell],
    base: LstmArch,
    train_ds: &Dataset,
    val_ds: &Dataset,
    test_ds: &Dataset,
    cfg: &TrainConfig,
    mut on_row: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for cell in grid {
        let arch = LstmArch { layers: cell.layers, dense: cell.neurons, ..base };
        let start = Instant::now();
        let result = LstmClassifier::new(arch, cfg.seed).and_then(|init| train(init, train_ds, val_ds, cfg)).and_then(|out| {
            let secs = start.elapsed().as_secs_f64();
            evaluate(&out.model, test_ds).map(|e| (e.accuracy, secs, out.best_epoch))
        });
        let row = match result {
            Ok((acc, secs, best)) => SweepRow {
                layers: cell.layers,
                neurons: cell.neurons,
                accuracy: Some(acc),
                train_seconds: Some(secs),
                best_epoch: Some(best),
                error: None,
            },
            Err(e) => SweepRow {
                layers: cell.layers,
                neurons: cell.neurons,
                accuracy: None,
                train_seconds: None,
                best_epoch: None,
                error: Some(format!("{}: {e}", e.kind())),
            },
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

/// CSV with header `layers,neurons,accuracy,train_seconds,best_epoch,status`; failed cells leave the numeric columns empty.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W, comment: Option<&str>) -> Result<()> {
    fn opt<T: ToString>(v: &Option<T>) -> String {
        v.as_ref().map(T::to_string).unwrap_or_default()
    }
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "layers,neurons,accuracy,train_seconds,best_epoch,status")?;
    for r in rows {
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => format!("\"failed: {}\"", e.replace('"', "'")),
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.layers,
            r.neurons,
            opt(&r.accuracy),
            opt(&r.train_seconds),
            opt(&r.best_epoch),
            status
        )?;
    }
    Ok(())
}
