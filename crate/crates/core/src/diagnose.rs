//! Reference registration and faulty-branch identification from window classes.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{label_window, EventClass, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::nn::Classifier;
use crate::sim::{reflection_centers, BranchId, OtdrConfig, OtdrTrace, PonTopology, ReflectionCenter};

pub const REFERENCE_FORMAT: &str = "pon-sentinel/reference";
pub const REFERENCE_VERSION: u32 = 1;

/// Below this fraction of the reference amplitude range a monitored trace is
/// scaled with the reference constants instead of its own extremes.
pub const RANGE_FALLBACK_FRACTION: f64 = 0.5;

/// Fewest reflection-free samples needed for a trace-wide noise estimate;
/// with fewer, the first this many samples of each window are used.
pub const NOISE_PROBE_LEN: usize = 10;

/// MAD-to-sigma factor for Gaussian noise.
const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDescriptor {
    pub window_index: usize,
    pub source_offset: usize,
    /// Ascending by distance.
    pub expected_branch_ids: Vec<BranchId>,
    pub expected_class: EventClass,
    /// Trace index of each expected reflection center, parallel to `expected_branch_ids`.
    pub expected_centers: Vec<usize>,
    /// Normalized height above baseline of each expected reflection in the reference trace.
    pub reference_excess: Vec<f64>,
}

/// Amplitude scaling of a trace region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub lo: f64,
    pub hi: f64,
}

impl Normalization {
    pub fn of(values: &[f64]) -> Normalization {
        let (lo, hi) = crate::dataset::min_max(values);
        Normalization { lo, hi }
    }

    pub fn range(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let r = self.range();
        if r > 0.0 {
            values.iter().map(|v| ((v - self.lo) / r).clamp(0.0, 1.0)).collect()
        } else {
            vec![0.0; values.len()]
        }
    }
}

/// Where each healthy reflection shows up in the windowed reference trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMap {
    pub format: String,
    pub version: u32,
    pub topology_hash: String,
    pub otdr: OtdrConfig,
    pub stride: usize,
    /// Sample index just after the splitter.
    pub split_index: usize,
    /// Start of the first window; at most `WINDOW_LEN - 1` samples before the split
    /// so that no window holds more than two reflections.
    pub first_start: usize,
    /// One past the last sample of the last window.
    pub region_end: usize,
    pub normalization: Normalization,
    pub windows: Vec<WindowDescriptor>,
}

impl ReferenceMap {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<ReferenceMap> {
        let r: ReferenceMap = serde_json::from_str(s)?;
        if r.format != REFERENCE_FORMAT || r.version != REFERENCE_VERSION {
            return Err(Error::Format(format!("unsupported reference {} v{}", r.format, r.version)));
        }
        Ok(r)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ReferenceMap> {
        ReferenceMap::from_json(&fs::read_to_string(path)?)
    }

    /// Rejects a reference built for a different topology.
    pub fn check_topology(&self, topo: &PonTopology) -> Result<()> {
        if topo.hash() != self.topology_hash {
            return Err(Error::ReferenceMismatch(format!(
                "reference was registered for topology {}, got {}",
                self.topology_hash,
                topo.hash()
            )));
        }
        Ok(())
    }
}

fn window_starts(first: usize, stride: usize, len: usize) -> impl Iterator<Item = usize> {
    (0..).map(move |k| first + k * stride).take_while(move |s| s + WINDOW_LEN <= len)
}

/// Smallest distance from a covered center to its window's edges over all windows,
/// or `None` when some window holds more than two reflections or a reflection is
/// not covered by any window.
fn phase_margin(centers: &[ReflectionCenter], first: usize, stride: usize, len: usize) -> Option<usize> {
    let mut margin = usize::MAX;
    let mut covered = vec![false; centers.len()];
    for s in window_starts(first, stride, len) {
        let inside: Vec<usize> =
            (0..centers.len()).filter(|&i| centers[i].index >= s && centers[i].index < s + WINDOW_LEN).collect();
        if inside.len() > 2 {
            return None;
        }
        for i in inside {
            covered[i] = true;
            let c = centers[i].index;
            margin = margin.min((c - s).min(s + WINDOW_LEN - 1 - c));
        }
    }
    covered.iter().all(|&c| c).then_some(margin)
}

/// Records, for a trace taken under normal operation, which branches each window
/// holds and which class the model should report for it.
///
/// Windows start near the split point. The exact start is chosen among the
/// `WINDOW_LEN` positions ending at the split so that every window holds at most
/// two reflections with the largest possible distance between reflection centers
/// and window edges; ties go to the position closest to the split.
pub fn register_reference(trace: &OtdrTrace, topo: &PonTopology, cfg: &OtdrConfig, stride: usize) -> Result<ReferenceMap> {
    cfg.validate()?;
    topo.validate()?;
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    if trace.len() != cfg.trace_len_samples {
        return Err(Error::ReferenceMismatch(format!(
            "trace has {} samples, configuration expects {}",
            trace.len(),
            cfg.trace_len_samples
        )));
    }
    if !trace.meta.topology_hash.is_empty() && trace.meta.topology_hash != topo.hash() {
        return Err(Error::ReferenceMismatch("trace was recorded for a different topology".into()));
    }
    let len = trace.len();
    let centers = reflection_centers(topo, cfg)?;
    let split = cfg.split_index(topo)?;
    if split + WINDOW_LEN > len {
        return Err(Error::InvalidConfig(format!("trace of {len} samples leaves no window after the split at {split}")));
    }

    let mut best: Option<(usize, usize)> = None;
    for first in (split.saturating_sub(WINDOW_LEN - 1)..=split).rev() {
        if let Some(m) = phase_margin(&centers, first, stride, len) {
            if best.is_none_or(|(bm, _)| m > bm) {
                best = Some((m, first));
            }
        }
    }
    let Some((_, first)) = best else {
        let worst = window_starts(split, stride, len)
            .map(|s| centers.iter().filter(|c| c.index >= s && c.index < s + WINDOW_LEN).count())
            .max()
            .unwrap_or(0);
        return Err(if worst > 2 {
            Error::TooManyReflections(worst)
        } else {
            Error::InvalidTopology("some reflections fall outside every analysis window".into())
        });
    };

    let starts: Vec<usize> = window_starts(first, stride, len).collect();
    let region_end = starts.last().map_or(first, |s| s + WINDOW_LEN);
    let region = &trace.samples[first..region_end];
    let norm = Normalization::of(region);
    let mut sorted = region.to_vec();
    sorted.sort_by(f64::total_cmp);
    let baseline = sorted[sorted.len() / 2];

    let mut windows = Vec::with_capacity(starts.len());
    for (k, &s) in starts.iter().enumerate() {
        let inside: Vec<&ReflectionCenter> =
            centers.iter().filter(|c| c.index >= s && c.index < s + WINDOW_LEN).collect();
        let ids: Vec<BranchId> = inside.iter().map(|c| c.id).collect();
        let expected_class = label_window(&ids, &BTreeSet::new())?;
        let reference_excess = inside
            .iter()
            .map(|c| if norm.range() > 0.0 { (trace.samples[c.index] - baseline) / norm.range() } else { 0.0 })
            .collect();
        windows.push(WindowDescriptor {
            window_index: k,
            source_offset: s,
            expected_branch_ids: ids,
            expected_class,
            expected_centers: inside.iter().map(|c| c.index).collect(),
            reference_excess,
        });
    }
    Ok(ReferenceMap {
        format: REFERENCE_FORMAT.to_string(),
        version: REFERENCE_VERSION,
        topology_hash: topo.hash(),
        otdr: cfg.clone(),
        stride,
        split_index: split,
        first_start: first,
        region_end,
        normalization: norm,
        windows,
    })
}

/// Faulty branches implied by a predicted class, and whether the class is
/// compatible with the number of expected reflections.
pub fn map_class_to_faults(predicted: EventClass, expected: &[BranchId]) -> (BTreeSet<BranchId>, bool) {
    use EventClass::*;
    let set = |ids: &[BranchId]| ids.iter().copied().collect::<BTreeSet<_>>();
    match (expected, predicted) {
        ([_, _], C0) => (set(&[]), true),
        ([a, _], C1) => (set(&[*a]), true),
        ([_, b], C2) => (set(&[*b]), true),
        ([a, b], C3 | C6) => (set(&[*a, *b]), true),
        ([_], C4) => (set(&[]), true),
        ([a], C5 | C6) => (set(&[*a]), true),
        ([], C6) => (set(&[]), true),
        _ => (set(&[]), false),
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Baseline and noise sigma of `values`: the median, and the median absolute
/// deviation scaled to a Gaussian sigma.
pub fn noise_floor(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mut v = values.to_vec();
    let base = median(&mut v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - base).abs()).collect();
    (base, MAD_SCALE * median(&mut dev))
}

/// Normalized samples of the analysis region lying farther than one pulse
/// half-extent from every registered reflection center.
pub fn quiet_samples(samples: &[f64], reference: &ReferenceMap, norm: Normalization) -> Vec<f64> {
    let half = reference.otdr.half_extent();
    let centers: Vec<i64> =
        reference.windows.iter().flat_map(|w| w.expected_centers.iter().map(|&c| c as i64)).collect();
    let end = reference.region_end.min(samples.len());
    (reference.first_start..end)
        .filter(|&i| centers.iter().all(|&c| (i as i64 - c).abs() > half))
        .map(|i| norm.apply(&samples[i..i + 1])[0])
        .collect()
}

/// Faulty branches for a window whose predicted class contradicts the reference.
///
/// `floor` is the (baseline, sigma) pair of the normalized trace. The tallest
/// sample is taken as the surviving reflection when it clears
/// `baseline + 3 sigma`; it is matched to the nearest expected center and every
/// other expected branch is reported faulty. The matched branch itself is faulty
/// when the class says its reflection is attenuated (C3, C5); for C1 and C2 its
/// height is compared against half of the reference height.
pub fn resolve_conflict(
    values: &[f64],
    predicted: EventClass,
    window: &WindowDescriptor,
    floor: (f64, f64),
) -> BTreeSet<BranchId> {
    let expected = &window.expected_branch_ids;
    let (base, sigma) = floor;
    let peak = crate::nn::argmax(values);
    if values.is_empty() || values[peak] <= base + 3.0 * sigma {
        return expected.iter().copied().collect();
    }
    let Some(matched) = (0..expected.len())
        .min_by_key(|&i| (window.expected_centers[i] as i64 - (window.source_offset + peak) as i64).unsigned_abs())
    else {
        return BTreeSet::new();
    };
    let mut faulty: BTreeSet<BranchId> =
        expected.iter().enumerate().filter(|&(i, _)| i != matched).map(|(_, &id)| id).collect();
    let matched_faulty = match predicted {
        EventClass::C3 | EventClass::C5 | EventClass::C6 => true,
        EventClass::C0 | EventClass::C4 => false,
        EventClass::C1 | EventClass::C2 => values[peak] - base < 0.5 * window.reference_excess[matched],
    };
    if matched_faulty {
        faulty.insert(expected[matched]);
    }
    faulty
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDiagnosis {
    pub window_index: usize,
    pub source_offset: usize,
    pub expected_branch_ids: Vec<BranchId>,
    pub expected_class: EventClass,
    pub predicted_class: EventClass,
    pub probabilities: Vec<f64>,
    pub faulty_branch_ids: BTreeSet<BranchId>,
    /// False when the predicted class contradicted the reference and the peak
    /// matching rule decided the faulty set.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub topology_hash: String,
    pub checkpoint_id: Option<String>,
    pub timestamp: Option<String>,
    /// True when the trace was scaled with the reference constants.
    pub used_reference_scale: bool,
    pub windows: Vec<WindowDiagnosis>,
    pub faulty_branch_ids: BTreeSet<BranchId>,
}

impl DiagnosisReport {
    pub fn predicted_classes(&self) -> Vec<EventClass> {
        self.windows.iter().map(|w| w.predicted_class).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Plain-text table with one row per window holding reflections, or per
    /// window with a finding.
    pub fn to_table(&self) -> String {
        let ids = |v: &mut dyn Iterator<Item = &BranchId>| {
            let s: Vec<String> = v.map(|i| i.to_string()).collect();
            if s.is_empty() {
                "-".to_string()
            } else {
                s.join(",")
            }
        };
        let mut out = String::new();
        let _ = writeln!(out, "{:>6} {:>7} {:>10} {:>8} {:>9} {:>6} {:>10}", "window", "offset", "branches", "expected", "predicted", "p", "faulty");
        for w in &self.windows {
            if w.expected_branch_ids.is_empty() && w.consistent && w.faulty_branch_ids.is_empty() && w.predicted_class == EventClass::C6 {
                continue;
            }
            let _ = writeln!(
                out,
                "{:>6} {:>7} {:>10} {:>8} {:>9} {:>6.3} {:>10}{}",
                w.window_index,
                w.source_offset,
                ids(&mut w.expected_branch_ids.iter()),
                w.expected_class.to_string(),
                w.predicted_class.to_string(),
                w.probabilities[w.predicted_class.index()],
                ids(&mut w.faulty_branch_ids.iter()),
                if w.consistent { "" } else { "  (resolved)" }
            );
        }
        let _ = writeln!(out, "faulty branches: {}", ids(&mut self.faulty_branch_ids.iter()));
        out
    }
}

/// Classifies every reference window of a monitored trace and turns the classes
/// into a faulty-branch set.
pub fn diagnose(trace: &OtdrTrace, reference: &ReferenceMap, model: &dyn Classifier, stride: usize) -> Result<DiagnosisReport> {
    if stride != reference.stride {
        return Err(Error::ReferenceMismatch(format!("stride {stride} differs from the reference stride {}", reference.stride)));
    }
    if trace.len() != reference.otdr.trace_len_samples || trace.sampling_time_ns != reference.otdr.sampling_time_ns {
        return Err(Error::ReferenceMismatch(format!(
            "trace ({} samples at {} ns) does not match the reference ({} samples at {} ns)",
            trace.len(),
            trace.sampling_time_ns,
            reference.otdr.trace_len_samples,
            reference.otdr.sampling_time_ns
        )));
    }
    if !trace.meta.topology_hash.is_empty() && trace.meta.topology_hash != reference.topology_hash {
        return Err(Error::ReferenceMismatch(format!(
            "trace topology {} differs from reference topology {}",
            trace.meta.topology_hash, reference.topology_hash
        )));
    }
    if model.input_len() != WINDOW_LEN {
        return Err(Error::Shape(format!("model expects {} values per window", model.input_len())));
    }
    let region = &trace.samples[reference.first_start..reference.region_end];
    let own = Normalization::of(region);
    let used_reference_scale = own.range() < RANGE_FALLBACK_FRACTION * reference.normalization.range();
    let norm = if used_reference_scale { reference.normalization } else { own };
    let quiet = quiet_samples(&trace.samples, reference, norm);
    let trace_floor = (quiet.len() >= NOISE_PROBE_LEN).then(|| noise_floor(&quiet));

    let mut windows = Vec::with_capacity(reference.windows.len());
    for d in &reference.windows {
        let values = norm.apply(&trace.samples[d.source_offset..d.source_offset + WINDOW_LEN]);
        let (predicted_class, probabilities) = model.predict(&values)?;
        let (mut faulty, consistent) = map_class_to_faults(predicted_class, &d.expected_branch_ids);
        if !consistent {
            let floor = trace_floor.unwrap_or_else(|| noise_floor(&values[..NOISE_PROBE_LEN]));
            faulty = resolve_conflict(&values, predicted_class, d, floor);
        }
        windows.push(WindowDiagnosis {
            window_index: d.window_index,
            source_offset: d.source_offset,
            expected_branch_ids: d.expected_branch_ids.clone(),
            expected_class: d.expected_class,
            predicted_class,
            probabilities,
            faulty_branch_ids: faulty,
            consistent,
        });
    }
    let faulty_branch_ids = windows.iter().flat_map(|w| w.faulty_branch_ids.iter().copied()).collect();
    Ok(DiagnosisReport {
        topology_hash: reference.topology_hash.clone(),
        checkpoint_id: None,
        timestamp: None,
        used_reference_scale,
        windows,
        faulty_branch_ids,
    })
}
