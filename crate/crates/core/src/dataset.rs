//! Windowing, labeling and augmentation of OTDR traces into classifier datasets.
//!
//! A window is a fixed run of [`WINDOW_LEN`] samples holding at most two
//! reflections. Its class encodes how many reflections it covers and which
//! of them are faulty. Training windows are produced from healthy windows by
//! scaling designated reflections down, adding noise, and normalizing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::sim::{self, Branch, BranchId, OtdrConfig, OtdrTrace, PonTopology, ReflectionCenter};

/// Samples per classifier input window.
pub const WINDOW_LEN: usize = 60;

/// Pattern classes a window can exhibit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventClass {
    /// Two normal reflections.
    C0,
    /// Two reflections, the first faulty.
    C1,
    /// Two reflections, the second faulty.
    C2,
    /// Two reflections, both faulty.
    C3,
    /// One normal reflection.
    C4,
    /// One faulty reflection.
    C5,
    /// No reflection.
    C6,
}

impl EventClass {
    pub const ALL: [EventClass; 7] = [
        EventClass::C0,
        EventClass::C1,
        EventClass::C2,
        EventClass::C3,
        EventClass::C4,
        EventClass::C5,
        EventClass::C6,
    ];
    pub const COUNT: usize = 7;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<EventClass> {
        Self::ALL.get(i).copied()
    }

    /// Number of reflections a window of this class contains.
    pub fn reflections(self) -> usize {
        match self {
            EventClass::C0 | EventClass::C1 | EventClass::C2 | EventClass::C3 => 2,
            EventClass::C4 | EventClass::C5 => 1,
            EventClass::C6 => 0,
        }
    }

    /// Positions (within the covered reflections) that are faulty.
    pub fn faulty_positions(self) -> &'static [usize] {
        match self {
            EventClass::C0 | EventClass::C4 | EventClass::C6 => &[],
            EventClass::C1 | EventClass::C5 => &[0],
            EventClass::C2 => &[1],
            EventClass::C3 => &[0, 1],
        }
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.index())
    }
}

impl FromStr for EventClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix('C')
            .and_then(|d| d.parse::<usize>().ok())
            .and_then(EventClass::from_index)
            .ok_or_else(|| Error::Format(format!("unknown event class '{s}'")))
    }
}

/// Where a generated window came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    /// Index into the topology pool.
    pub topology: usize,
    pub psnr_db: f64,
    /// Reduction ratio applied to each covered reflection, in covered order.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub values: Vec<f64>,
    /// Start sample in the parent trace.
    pub source_offset: usize,
    /// Branches whose reflection center lies inside the window, ascending by distance.
    pub covered_branch_ids: Vec<BranchId>,
    pub label: Option<EventClass>,
    pub meta: Option<SampleMeta>,
}

/// Cuts `trace` into windows at `start + k * stride`; a trailing remainder shorter
/// than [`WINDOW_LEN`] is dropped. `centers` (possibly empty) fills `covered_branch_ids`.
pub fn split_into_windows(
    trace: &OtdrTrace,
    start: usize,
    stride: usize,
    centers: &[ReflectionCenter],
) -> Result<Vec<Window>> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    if start >= trace.len() {
        return Err(Error::OutOfRange { index: start as i64, len: trace.len() });
    }
    let mut out = Vec::new();
    let mut offset = start;
    while offset + WINDOW_LEN <= trace.len() {
        out.push(Window {
            values: trace.samples[offset..offset + WINDOW_LEN].to_vec(),
            source_offset: offset,
            covered_branch_ids: covered_ids(centers, offset),
            label: None,
            meta: None,
        });
        offset += stride;
    }
    Ok(out)
}

/// Branches whose center falls in `[offset, offset + WINDOW_LEN)`, in distance order.
pub fn covered_ids(centers: &[ReflectionCenter], offset: usize) -> Vec<BranchId> {
    centers
        .iter()
        .filter(|c| c.index >= offset && c.index < offset + WINDOW_LEN)
        .map(|c| c.id)
        .collect()
}

/// Min-max scaling to [0, 1]; a constant input maps to all zeros.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = min_max(values);
    if hi > lo {
        values.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; values.len()]
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Class of a window given the branches it covers and which branches are faulty.
pub fn label_window(covered: &[BranchId], faulty: &BTreeSet<BranchId>) -> Result<EventClass> {
    let f = |id: &BranchId| faulty.contains(id);
    Ok(match covered {
        [] => EventClass::C6,
        [a] => {
            if f(a) {
                EventClass::C5
            } else {
                EventClass::C4
            }
        }
        [a, b] => match (f(a), f(b)) {
            (false, false) => EventClass::C0,
            (true, false) => EventClass::C1,
            (false, true) => EventClass::C2,
            (true, true) => EventClass::C3,
        },
        _ => return Err(Error::TooManyReflections(covered.len())),
    })
}

/// Isolated contribution of one covered reflection to a window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowReflection {
    pub id: BranchId,
    pub height: f64,
    /// Position of the reflection center within the window.
    pub center: usize,
    /// Excess above the baseline, sample by sample.
    pub profile: Vec<f64>,
}

/// A healthy window kept in decomposed form so individual reflections can be rescaled.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanWindow {
    pub source_offset: usize,
    pub baseline: f64,
    /// Covered reflections in distance order.
    pub reflections: Vec<WindowReflection>,
    /// Clipped tails of neighboring reflections whose centers lie outside the window.
    pub context: Vec<f64>,
    /// Healthy reference peak of the parent trace (its tallest reflector).
    pub anchor: f64,
}

impl CleanWindow {
    /// Builds the healthy window starting at `start` in the trace of `topo`.
    pub fn from_topology(topo: &PonTopology, cfg: &OtdrConfig, start: usize) -> Result<CleanWindow> {
        let centers = sim::reflection_centers(topo, cfg)?;
        let half = cfg.half_extent();
        let mut reflections = Vec::new();
        let mut context = vec![0.0; WINDOW_LEN];
        for c in &centers {
            let rel = c.index as i64 - start as i64;
            if rel + half < 0 || rel - half >= WINDOW_LEN as i64 {
                continue;
            }
            let profile: Vec<f64> =
                (0..WINDOW_LEN as i64).map(|k| c.height * cfg.pulse_shape(k - rel)).collect();
            if (0..WINDOW_LEN as i64).contains(&rel) {
                reflections.push(WindowReflection { id: c.id, height: c.height, center: rel as usize, profile });
            } else {
                context.iter_mut().zip(&profile).for_each(|(x, p)| *x += p);
            }
        }
        if reflections.len() > 2 {
            return Err(Error::TooManyReflections(reflections.len()));
        }
        Ok(CleanWindow { source_offset: start, baseline: cfg.baseline_level, reflections, context, anchor: topo.max_height() })
    }

    /// Raw amplitudes of the healthy window.
    pub fn values(&self) -> Vec<f64> {
        self.scaled_values(&vec![1.0; self.reflections.len()])
    }

    fn scaled_values(&self, ratios: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = self.context.iter().map(|c| self.baseline + c).collect();
        for (r, ratio) in self.reflections.iter().zip(ratios) {
            v.iter_mut().zip(&r.profile).for_each(|(x, p)| *x += ratio * p);
        }
        v
    }
}

/// Maps raw window amplitudes into [0, 1] on the scale a per-trace min-max would
/// give: the baseline sits near 0 and the trace's tallest healthy reflector near 1.
/// The expected trace extremes under noise (three sigma) widen the range.
pub fn anchored_normalize(values: &[f64], baseline: f64, anchor: f64, noise_sigma: f64) -> Vec<f64> {
    let lo = baseline - 3.0 * noise_sigma;
    let hi = baseline + anchor + 3.0 * noise_sigma;
    values.iter().map(|x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0)).collect()
}

/// Parameters of synthetic dataset generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub per_class: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub psnr_min_db: f64,
    pub psnr_max_db: f64,
    /// Reflection centers land at least this many samples inside the window edges;
    /// the window start is otherwise jittered uniformly over every valid position.
    pub edge_margin: usize,
    /// Probability that a faulty reflection is a complete break (ratio 0).
    #[serde(default)]
    pub break_fraction: f64,
    pub seed: u64,
    pub otdr: OtdrConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            per_class: 1000,
            ratio_min: 1.0 / 50.0,
            ratio_max: 0.5,
            psnr_min_db: 5.0,
            psnr_max_db: 30.0,
            edge_margin: 2,
            break_fraction: 0.0,
            seed: 0,
            otdr: OtdrConfig::default().with_len(4096),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.per_class == 0 {
            return bad("per_class must be >= 1".into());
        }
        if !(0.0 < self.ratio_min && self.ratio_min < self.ratio_max && self.ratio_max <= 1.0) {
            return bad(format!("need 0 < ratio_min < ratio_max <= 1, got [{}, {}]", self.ratio_min, self.ratio_max));
        }
        if self.psnr_min_db.is_nan() || self.psnr_max_db.is_nan() || self.psnr_min_db > self.psnr_max_db {
            return bad(format!("empty PSNR range [{}, {}]", self.psnr_min_db, self.psnr_max_db));
        }
        if !self.psnr_min_db.is_finite() && self.psnr_min_db != self.psnr_max_db {
            return bad("an infinite PSNR bound needs psnr_min_db == psnr_max_db".into());
        }
        if 2 * self.edge_margin >= WINDOW_LEN {
            return bad(format!("edge_margin {} leaves no room in a window", self.edge_margin));
        }
        if !(0.0..=1.0).contains(&self.break_fraction) {
            return bad(format!("break_fraction must be in [0, 1], got {}", self.break_fraction));
        }
        self.otdr.validate()
    }
}

/// Applies explicit reduction ratios and noise to a healthy window.
///
/// `ratios` holds one multiplier per covered reflection. A reflection scaled to
/// exactly zero has vanished from the window and no longer counts toward the label.
pub fn augment_with(normal: &CleanWindow, ratios: &[f64], psnr_db: f64, noise_seed: u64) -> Result<Window> {
    if ratios.len() != normal.reflections.len() {
        return Err(Error::InvalidArgument(format!(
            "{} ratios for {} reflections",
            ratios.len(),
            normal.reflections.len()
        )));
    }
    let raw = normal.scaled_values(ratios);
    let peak = normal.reflections.iter().map(|r| r.height).fold(None, |m: Option<f64>, h| {
        Some(m.map_or(h, |m| m.max(h)))
    });
    let peak = peak.unwrap_or(normal.anchor);
    let noisy = sim::add_awgn(&raw, peak, psnr_db, noise_seed)?;
    let sigma = sim::noise_sigma(peak, psnr_db);
    let values = anchored_normalize(&noisy, normal.baseline, normal.anchor, sigma);

    let visible: Vec<BranchId> = normal
        .reflections
        .iter()
        .zip(ratios)
        .filter(|(_, &r)| r > 0.0)
        .map(|(r, _)| r.id)
        .collect();
    let faulty: BTreeSet<BranchId> = normal
        .reflections
        .iter()
        .zip(ratios)
        .filter(|(_, &r)| r < 1.0)
        .map(|(r, _)| r.id)
        .collect();
    let label = label_window(&visible, &faulty)?;
    Ok(Window {
        values,
        source_offset: normal.source_offset,
        covered_branch_ids: normal.reflections.iter().map(|r| r.id).collect(),
        label: Some(label),
        meta: Some(SampleMeta { topology: 0, psnr_db, ratios: ratios.to_vec() }),
    })
}

/// Turns a healthy window into a noisy sample of `target`: each faulty reflection's
/// excess is scaled by an independent ratio drawn from `[ratio_min, ratio_max]`
/// (or zeroed with probability `break_fraction`), then noise is added at a PSNR
/// drawn from `[psnr_min_db, psnr_max_db]`, referenced to the tallest healthy
/// reflection in the window.
pub fn augment_window(normal: &CleanWindow, target: EventClass, gen: &GenConfig, seed: u64) -> Result<Window> {
    if normal.reflections.len() != target.reflections() {
        return Err(Error::ClassMismatch { target: target.to_string(), found: normal.reflections.len() });
    }
    let mut rng = seed::rng(seed);
    let mut ratios = vec![1.0; normal.reflections.len()];
    for &pos in target.faulty_positions() {
        ratios[pos] = if gen.break_fraction > 0.0 && rng.random::<f64>() < gen.break_fraction {
            0.0
        } else {
            rng.random_range(gen.ratio_min..=gen.ratio_max)
        };
    }
    let psnr = if gen.psnr_min_db == gen.psnr_max_db {
        gen.psnr_min_db
    } else {
        rng.random_range(gen.psnr_min_db..=gen.psnr_max_db)
    };
    augment_with(normal, &ratios, psnr, rng.random())
}

/// Random topologies made of well-separated groups of one or two branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySampler {
    pub groups_min: usize,
    pub groups_max: usize,
    /// Probability that a group is a close pair rather than a single branch.
    pub pair_probability: f64,
    /// Distance between the two branches of a pair, meters.
    pub pair_spacing_m: (f64, f64),
    /// Distance between consecutive groups, meters.
    pub group_gap_m: (f64, f64),
    pub height: (f64, f64),
    pub split_offset_m: (f64, f64),
}

impl Default for TopologySampler {
    fn default() -> Self {
        TopologySampler {
            groups_min: 3,
            groups_max: 6,
            pair_probability: 0.5,
            pair_spacing_m: (2.0, 6.0),
            group_gap_m: (8.0, 16.0),
            height: (0.7, 1.0),
            split_offset_m: (5.0, 15.0),
        }
    }
}

impl TopologySampler {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> PonTopology {
        let groups = rng.random_range(self.groups_min..=self.groups_max);
        let mut branches = Vec::new();
        let mut d = rng.random_range(2.0..6.0);
        let push = |d: f64, rng: &mut R, branches: &mut Vec<Branch>| {
            let id = branches.len() as BranchId + 1;
            branches.push(Branch { id, distance_m: d, reflect_height: rng.random_range(self.height.0..=self.height.1) });
        };
        for g in 0..groups {
            if g > 0 {
                d += rng.random_range(self.group_gap_m.0..=self.group_gap_m.1);
            }
            push(d, rng, &mut branches);
            if rng.random::<f64>() < self.pair_probability {
                d += rng.random_range(self.pair_spacing_m.0..=self.pair_spacing_m.1);
                push(d, rng, &mut branches);
            }
        }
        let split = rng.random_range(self.split_offset_m.0..=self.split_offset_m.1);
        PonTopology::new(branches, split).expect("sampled topology is valid")
    }

    pub fn pool(&self, n: usize, seed: u64) -> Vec<PonTopology> {
        (0..n).map(|i| self.sample(&mut seed::sub_rng(seed, i as u64))).collect()
    }
}

/// Labeled windows plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub windows: Vec<Window>,
    pub class_counts: BTreeMap<EventClass, usize>,
    pub seed: u64,
    pub config: Option<GenConfig>,
}

impl Dataset {
    /// Builds a dataset; every window must carry a label.
    pub fn new(windows: Vec<Window>, seed: u64, config: Option<GenConfig>) -> Result<Dataset> {
        let mut class_counts = BTreeMap::new();
        for (i, w) in windows.iter().enumerate() {
            let label = w.label.ok_or_else(|| Error::InvalidArgument(format!("window {i} is unlabeled")))?;
            if w.values.len() != WINDOW_LEN {
                return Err(Error::Shape(format!("window {i} has {} values", w.values.len())));
            }
            *class_counts.entry(label).or_insert(0) += 1;
        }
        Ok(Dataset { windows, class_counts, seed, config })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.label.expect("dataset windows are labeled").index()).collect()
    }

    /// Inputs as an `N x WINDOW_LEN` matrix.
    pub fn features(&self) -> Array2<f64> {
        let flat: Vec<f64> = self.windows.iter().flat_map(|w| w.values.iter().copied()).collect();
        Array2::from_shape_vec((self.windows.len(), WINDOW_LEN), flat).expect("windows have fixed length")
    }

    /// A sub-dataset holding the given indices, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let windows = indices.iter().map(|&i| self.windows[i].clone()).collect();
        Dataset::new(windows, self.seed, self.config.clone()).expect("subset of a valid dataset")
    }

    /// Writes the line-oriented dataset format: a header carrying the generation
    /// config, then one tab-separated record per window.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let config = match &self.config {
            Some(c) => serde_json::to_string(c)?,
            None => "-".into(),
        };
        writeln!(out, "#pon-dataset v1 seed={} windows={} config={}", self.seed, self.windows.len(), config)?;
        for w in &self.windows {
            let values: Vec<String> = w.values.iter().map(|x| x.to_string()).collect();
            let ids = if w.covered_branch_ids.is_empty() {
                "-".to_string()
            } else {
                w.covered_branch_ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
            };
            let meta = match &w.meta {
                Some(m) => {
                    let ratios = if m.ratios.is_empty() {
                        "-".to_string()
                    } else {
                        m.ratios.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
                    };
                    format!("topology={};psnr_db={};ratios={}", m.topology, m.psnr_db, ratios)
                }
                None => "-".into(),
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                values.join(","),
                w.label.map_or("-".to_string(), |l| l.to_string()),
                ids,
                w.source_offset,
                meta
            )?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Dataset> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty dataset file".into()))??;
        let rest = header
            .strip_prefix("#pon-dataset v1 ")
            .ok_or_else(|| Error::Format("dataset header must start with '#pon-dataset v1'".into()))?;
        let (seed_tok, rest) = rest.split_once(' ').ok_or_else(|| Error::Format("truncated dataset header".into()))?;
        let seed: u64 = seed_tok
            .strip_prefix("seed=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad seed in dataset header".into()))?;
        let (count_tok, config_tok) =
            rest.split_once(' ').ok_or_else(|| Error::Format("truncated dataset header".into()))?;
        let count: usize = count_tok
            .strip_prefix("windows=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad window count in dataset header".into()))?;
        let config = match config_tok.strip_prefix("config=") {
            Some("-") => None,
            Some(json) => Some(serde_json::from_str(json)?),
            None => return Err(Error::Format("missing config in dataset header".into())),
        };
        let mut windows = Vec::with_capacity(count);
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            windows.push(parse_record(&line).map_err(|e| Error::Format(format!("record {}: {e}", n + 1)))?);
        }
        if windows.len() != count {
            return Err(Error::Format(format!("header declares {count} windows, file holds {}", windows.len())));
        }
        Dataset::new(windows, seed, config)
    }
}

fn parse_record(line: &str) -> Result<Window> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(Error::Format(format!("expected 5 tab-separated fields, got {}", fields.len())));
    }
    let values = fields[0]
        .split(',')
        .map(|v| v.parse::<f64>().map_err(|_| Error::Format(format!("bad value '{v}'"))))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != WINDOW_LEN {
        return Err(Error::Format(format!("expected {WINDOW_LEN} values, got {}", values.len())));
    }
    let label = match fields[1] {
        "-" => None,
        l => Some(l.parse()?),
    };
    let covered_branch_ids = match fields[2] {
        "-" => vec![],
        ids => ids
            .split(',')
            .map(|i| i.parse().map_err(|_| Error::Format(format!("bad branch id '{i}'"))))
            .collect::<Result<_>>()?,
    };
    let source_offset = fields[3].parse().map_err(|_| Error::Format(format!("bad offset '{}'", fields[3])))?;
    let meta = match fields[4] {
        "-" => None,
        m => {
            let mut kv = BTreeMap::new();
            for part in m.split(';') {
                let (k, v) = part.split_once('=').ok_or_else(|| Error::Format(format!("bad meta '{part}'")))?;
                kv.insert(k, v);
            }
            let get = |k: &str| kv.get(k).copied().ok_or_else(|| Error::Format(format!("meta missing '{k}'")));
            let ratios = match get("ratios")? {
                "-" => vec![],
                r => r
                    .split(',')
                    .map(|x| x.parse().map_err(|_| Error::Format(format!("bad ratio '{x}'"))))
                    .collect::<Result<_>>()?,
            };
            Some(SampleMeta {
                topology: get("topology")?.parse().map_err(|_| Error::Format("bad topology index".into()))?,
                psnr_db: get("psnr_db")?.parse().map_err(|_| Error::Format("bad psnr".into()))?,
                ratios,
            })
        }
    };
    Ok(Window { values, source_offset, covered_branch_ids, label, meta })
}

/// Valid window starts that put exactly `centers[first..=last]` inside the window,
/// at least `margin` samples from either edge.
fn group_start_range(centers: &[ReflectionCenter], first: usize, last: usize, margin: usize) -> Option<(usize, usize)> {
    let c_first = centers[first].index as i64;
    let c_last = centers[last].index as i64;
    let mut lo = (c_last + margin as i64 - (WINDOW_LEN as i64 - 1)).max(0);
    let mut hi = c_first - margin as i64;
    if first > 0 {
        lo = lo.max(centers[first - 1].index as i64 + 1);
    }
    if let Some(next) = centers.get(last + 1) {
        hi = hi.min(next.index as i64 - WINDOW_LEN as i64);
    }
    (lo <= hi).then_some((lo as usize, hi as usize))
}

/// Draws a window start in `topo` whose content matches `reflections` covered centers.
fn draw_start<R: Rng>(
    centers: &[ReflectionCenter],
    reflections: usize,
    margin: usize,
    rng: &mut R,
) -> Option<usize> {
    if reflections == 0 {
        let (lo, hi) = match (centers.first(), centers.last()) {
            (Some(f), Some(l)) => ((f.index as i64 - 2 * WINDOW_LEN as i64).max(0), l.index as i64 + WINDOW_LEN as i64),
            _ => (0, 4 * WINDOW_LEN as i64),
        };
        for _ in 0..64 {
            let s = rng.random_range(lo..=hi) as usize;
            if centers.iter().all(|c| c.index < s || c.index >= s + WINDOW_LEN) {
                return Some(s);
            }
        }
        return None;
    }
    if centers.len() < reflections {
        return None;
    }
    let candidates: Vec<(usize, usize)> = (0..=centers.len() - reflections)
        .filter_map(|first| group_start_range(centers, first, first + reflections - 1, margin))
        .collect();
    let &(lo, hi) = candidates.get(rng.random_range(0..candidates.len().max(1)))?;
    Some(rng.random_range(lo..=hi))
}

/// Generates a class-balanced dataset of `per_class` windows per class from
/// healthy windows of the pooled topologies. Window `i` has class `i mod 7` and
/// its own derived seed, so the result depends only on the inputs.
pub fn generate_dataset(gen: &GenConfig, topo_pool: &[PonTopology]) -> Result<Dataset> {
    gen.validate()?;
    if topo_pool.is_empty() {
        return Err(Error::InvalidArgument("topology pool is empty".into()));
    }
    let centers: Vec<Vec<ReflectionCenter>> =
        topo_pool.iter().map(|t| sim::reflection_centers(t, &gen.otdr)).collect::<Result<_>>()?;
    let total = gen.per_class * EventClass::COUNT;
    let mut windows = Vec::with_capacity(total);
    for i in 0..total {
        let class = EventClass::ALL[i % EventClass::COUNT];
        let mut rng = seed::sub_rng(gen.seed, i as u64);
        let mut found = None;
        for _ in 0..256 {
            let t = rng.random_range(0..topo_pool.len());
            if let Some(start) = draw_start(&centers[t], class.reflections(), gen.edge_margin, &mut rng) {
                found = Some((t, start));
                break;
            }
        }
        let (t, start) = found.ok_or_else(|| {
            Error::InvalidArgument(format!("topology pool cannot produce a {class} window"))
        })?;
        let normal = CleanWindow::from_topology(&topo_pool[t], &gen.otdr, start)?;
        let mut w = augment_window(&normal, class, gen, rng.random())?;
        if let Some(m) = w.meta.as_mut() {
            m.topology = t;
        }
        windows.push(w);
    }
    Dataset::new(windows, gen.seed, Some(gen.clone()))
}

/// Stratified split into train/validation/test parts with the given fractions.
pub fn split_dataset(ds: &Dataset, fractions: [f64; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("split fractions {fractions:?} must sum to 1")));
    }
    let mut by_class: BTreeMap<EventClass, Vec<usize>> = BTreeMap::new();
    for (i, w) in ds.windows.iter().enumerate() {
        by_class.entry(w.label.expect("dataset windows are labeled")).or_default().push(i);
    }
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (class, mut idx) in by_class {
        let n = idx.len();
        if n < 3 {
            return Err(Error::InsufficientClass(class.to_string(), n));
        }
        idx.shuffle(&mut seed::sub_rng(seed, class.index() as u64));
        let n_train = (fractions[0] * n as f64).round() as usize;
        let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
        parts[0].extend_from_slice(&idx[..n_train]);
        parts[1].extend_from_slice(&idx[n_train..n_train + n_val]);
        parts[2].extend_from_slice(&idx[n_train + n_val..]);
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    Ok((ds.subset(&parts[0]), ds.subset(&parts[1]), ds.subset(&parts[2])))
}
