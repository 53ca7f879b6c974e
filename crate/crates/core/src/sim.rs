//! OTDR trace synthesis for reflector-terminated PON branches.
//!
//! Traces live in a linear, pre-normalized amplitude domain: the Rayleigh
//! floor sits at `baseline_level` and a healthy reflector adds a unit-peak
//! Gaussian bell scaled by its `reflect_height`. Reflections from branches of
//! similar length simply superimpose. Faults scale a branch's reflection by a
//! reduction ratio, and measurement noise is additive white Gaussian noise at
//! a requested PSNR.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Identifier of a branch, unique within a topology.
pub type BranchId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: BranchId,
    /// Optical distance from the splitter to the branch's end reflector.
    pub distance_m: f64,
    /// Nominal normalized peak height of the healthy reflector, in (0, 1].
    pub reflect_height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PonTopology {
    pub branches: Vec<Branch>,
    /// Distance from the trace origin to the point just after the splitter.
    pub split_index_offset_m: f64,
}

impl PonTopology {
    pub fn new(branches: Vec<Branch>, split_index_offset_m: f64) -> Result<Self> {
        let topo = PonTopology { branches, split_index_offset_m };
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_index_offset_m >= 0.0 && self.split_index_offset_m.is_finite()) {
            return Err(Error::InvalidTopology(format!(
                "split_index_offset_m must be finite and >= 0, got {}",
                self.split_index_offset_m
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.branches {
            if b.id == 0 {
                return Err(Error::InvalidTopology("branch ids must be positive".into()));
            }
            if !seen.insert(b.id) {
                return Err(Error::InvalidTopology(format!("duplicate branch id {}", b.id)));
            }
            if !(b.distance_m > 0.0 && b.distance_m.is_finite()) {
                return Err(Error::InvalidTopology(format!(
                    "branch {} distance must be > 0, got {}",
                    b.id, b.distance_m
                )));
            }
            if !(b.reflect_height > 0.0 && b.reflect_height <= 1.0) {
                return Err(Error::InvalidTopology(format!(
                    "branch {} reflect_height must be in (0, 1], got {}",
                    b.id, b.reflect_height
                )));
            }
        }
        for pair in self.branches.windows(2) {
            if pair[1].distance_m <= pair[0].distance_m {
                return Err(Error::InvalidTopology(format!(
                    "branches must be sorted strictly ascending by distance ({} then {})",
                    pair[0].id, pair[1].id
                )));
            }
        }
        Ok(())
    }

    pub fn branch(&self, id: BranchId) -> Option<&Branch> {
        self.branches.iter().find(|b| b.id == id)
    }

    pub fn ids(&self) -> Vec<BranchId> {
        self.branches.iter().map(|b| b.id).collect()
    }

    /// Tallest healthy reflector height, or 1.0 for an empty topology.
    pub fn max_height(&self) -> f64 {
        self.branches.iter().map(|b| b.reflect_height).fold(None, |m: Option<f64>, h| {
            Some(m.map_or(h, |m| m.max(h)))
        }).unwrap_or(1.0)
    }

    /// Stable content hash, used to reject stale references.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("topology serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let topo: PonTopology = serde_json::from_str(text)?;
        topo.validate()?;
        Ok(topo)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtdrConfig {
    pub sampling_time_ns: f64,
    pub pulse_width_ns: f64,
    pub group_index: f64,
    pub baseline_level: f64,
    pub reflection_extent_samples: usize,
    pub trace_len_samples: usize,
}

impl Default for OtdrConfig {
    fn default() -> Self {
        OtdrConfig {
            sampling_time_ns: 2.0,
            pulse_width_ns: 10.0,
            group_index: 1.468,
            baseline_level: 0.05,
            reflection_extent_samples: 30,
            trace_len_samples: 1024,
        }
    }
}

impl OtdrConfig {
    pub fn with_len(mut self, trace_len_samples: usize) -> Self {
        self.trace_len_samples = trace_len_samples;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.sampling_time_ns > 0.0 && self.sampling_time_ns.is_finite()) {
            return bad(format!("sampling_time_ns must be > 0, got {}", self.sampling_time_ns));
        }
        if !(self.pulse_width_ns > 0.0 && self.pulse_width_ns.is_finite()) {
            return bad(format!("pulse_width_ns must be > 0, got {}", self.pulse_width_ns));
        }
        if !(self.group_index > 1.0 && self.group_index.is_finite()) {
            return bad(format!("group_index must be > 1, got {}", self.group_index));
        }
        if !(0.0..1.0).contains(&self.baseline_level) {
            return bad(format!("baseline_level must be in [0, 1), got {}", self.baseline_level));
        }
        if self.trace_len_samples == 0 {
            return bad("trace_len_samples must be positive".into());
        }
        if (self.reflection_extent_samples as f64) < self.pulse_samples() {
            return bad(format!(
                "reflection_extent_samples {} shorter than the pulse ({} samples)",
                self.reflection_extent_samples,
                self.pulse_samples()
            ));
        }
        Ok(())
    }

    /// Fiber length covered by one sample: c * dt / (2 * n).
    pub fn sample_spacing_m(&self) -> f64 {
        SPEED_OF_LIGHT * self.sampling_time_ns * 1e-9 / (2.0 * self.group_index)
    }

    /// Pulse width expressed in samples.
    pub fn pulse_samples(&self) -> f64 {
        self.pulse_width_ns / self.sampling_time_ns
    }

    /// Standard deviation (in samples) of the reflection bell, whose FWHM is the pulse width.
    pub fn pulse_sigma_samples(&self) -> f64 {
        self.pulse_samples() / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }

    /// Largest offset from the center still inside the reflection footprint.
    pub fn half_extent(&self) -> i64 {
        ((self.reflection_extent_samples as i64) - 1) / 2
    }

    /// Unit-peak reflection shape at `offset` samples from its center.
    pub fn pulse_shape(&self, offset: i64) -> f64 {
        if offset.abs() > self.half_extent() {
            return 0.0;
        }
        let s = self.pulse_sigma_samples();
        let x = offset as f64;
        (-(x * x) / (2.0 * s * s)).exp()
    }

    /// Sample index of the point at `distance_m` from the trace origin.
    pub fn distance_to_index(&self, distance_m: f64) -> Result<usize> {
        if !(distance_m >= 0.0 && distance_m.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "distance must be finite and >= 0, got {distance_m}"
            )));
        }
        let idx = (distance_m / self.sample_spacing_m()).round();
        if idx >= self.trace_len_samples as f64 {
            return Err(Error::OutOfRange { index: idx as i64, len: self.trace_len_samples });
        }
        Ok(idx as usize)
    }

    /// Index where post-splitter analysis begins.
    pub fn split_index(&self, topo: &PonTopology) -> Result<usize> {
        self.distance_to_index(topo.split_index_offset_m)
    }
}

/// Reflection center of one branch, as a trace sample index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionCenter {
    pub id: BranchId,
    pub index: usize,
    pub height: f64,
}

/// Center indices of every branch's reflection, in distance order.
pub fn reflection_centers(topo: &PonTopology, cfg: &OtdrConfig) -> Result<Vec<ReflectionCenter>> {
    topo.branches
        .iter()
        .map(|b| {
            let index = cfg.distance_to_index(topo.split_index_offset_m + b.distance_m)?;
            Ok(ReflectionCenter { id: b.id, index, height: b.reflect_height })
        })
        .collect()
}

/// Branch reduction ratios; a branch absent from the map is healthy (ratio 1).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec(pub BTreeMap<BranchId, f64>);

impl FaultSpec {
    pub fn none() -> Self {
        FaultSpec::default()
    }

    pub fn with(mut self, id: BranchId, ratio: f64) -> Self {
        self.0.insert(id, ratio);
        self
    }

    pub fn ratio(&self, id: BranchId) -> f64 {
        self.0.get(&id).copied().unwrap_or(1.0)
    }

    /// Branches whose reflection is reduced at all.
    pub fn faulty_ids(&self) -> std::collections::BTreeSet<BranchId> {
        self.0.iter().filter(|(_, &r)| r < 1.0).map(|(&id, _)| id).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, topo: &PonTopology) -> Result<()> {
        for (&id, &r) in &self.0 {
            if topo.branch(id).is_none() {
                return Err(Error::InvalidArgument(format!("fault references unknown branch {id}")));
            }
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidArgument(format!(
                    "reduction ratio for branch {id} must be in [0, 1], got {r}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for FaultSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        let parts: Vec<String> = self.0.iter().map(|(id, r)| format!("{id}:{r}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses `"2:0.5,3:0"` (or `"-"` for no faults).
impl FromStr for FaultSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut spec = FaultSpec::none();
        if s.is_empty() || s == "-" {
            return Ok(spec);
        }
        for part in s.split(',') {
            let (id, ratio) = part
                .split_once(':')
                .ok_or_else(|| Error::Format(format!("fault entry '{part}' is not id:ratio")))?;
            let id: BranchId = id.trim().parse().map_err(|_| Error::Format(format!("bad branch id '{id}'")))?;
            let ratio: f64 = ratio.trim().parse().map_err(|_| Error::Format(format!("bad ratio '{ratio}'")))?;
            spec.0.insert(id, ratio);
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub topology_hash: String,
    pub faults: FaultSpec,
    /// PSNR of the added noise; `None` for a noiseless trace.
    pub psnr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtdrTrace {
    pub samples: Vec<f64>,
    pub sampling_time_ns: f64,
    pub meta: TraceMeta,
}

/// Noiseless trace: baseline plus every branch's (fault-scaled) reflection.
///
/// `seed` is only recorded in the metadata; synthesis itself draws no random numbers.
pub fn synthesize_trace(
    topo: &PonTopology,
    cfg: &OtdrConfig,
    faults: &FaultSpec,
    seed: u64,
) -> Result<OtdrTrace> {
    cfg.validate()?;
    topo.validate()?;
    faults.validate(topo)?;
    let mut samples = vec![cfg.baseline_level; cfg.trace_len_samples];
    let half = cfg.half_extent();
    for center in reflection_centers(topo, cfg)? {
        let scale = center.height * faults.ratio(center.id);
        if scale == 0.0 {
            continue;
        }
        let c = center.index as i64;
        let lo = (c - half).max(0);
        let hi = (c + half).min(cfg.trace_len_samples as i64 - 1);
        for i in lo..=hi {
            samples[i as usize] += scale * cfg.pulse_shape(i - c);
        }
    }
    Ok(OtdrTrace {
        samples,
        sampling_time_ns: cfg.sampling_time_ns,
        meta: TraceMeta { seed, topology_hash: topo.hash(), faults: faults.clone(), psnr_db: None },
    })
}

/// Noise standard deviation for peak height `peak` at `psnr_db` (20·log10 amplitude convention).
pub fn noise_sigma(peak: f64, psnr_db: f64) -> f64 {
    if psnr_db == f64::INFINITY {
        0.0
    } else {
        peak / 10f64.powf(psnr_db / 20.0)
    }
}

/// Adds i.i.d. Gaussian noise with sigma = peak / 10^(psnr_db / 20).
/// `psnr_db = +inf` returns the input unchanged.
pub fn add_awgn(samples: &[f64], peak: f64, psnr_db: f64, seed: u64) -> Result<Vec<f64>> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidArgument(format!("peak height must be > 0, got {peak}")));
    }
    if psnr_db.is_nan() || psnr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(format!("psnr_db must be finite or +inf, got {psnr_db}")));
    }
    let sigma = noise_sigma(peak, psnr_db);
    if sigma == 0.0 {
        return Ok(samples.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = seed::rng(seed);
    Ok(samples.iter().map(|&x| x + normal.sample(&mut rng)).collect())
}

/// Synthesizes a trace and, when `psnr_db` is given, adds noise whose peak
/// reference is the tallest healthy reflector in the topology.
pub fn simulate(
    topo: &PonTopology,
    cfg: &OtdrConfig,
    faults: &FaultSpec,
    psnr_db: Option<f64>,
    seed: u64,
) -> Result<OtdrTrace> {
    let mut trace = synthesize_trace(topo, cfg, faults, seed)?;
    if let Some(psnr) = psnr_db {
        trace.samples = add_awgn(&trace.samples, topo.max_height(), psnr, seed::derive_seed(seed, 1))?;
        trace.meta.psnr_db = Some(psnr);
    }
    Ok(trace)
}

impl OtdrTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Writes the text trace format: one header line, then one amplitude per line.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let psnr = self.meta.psnr_db.map_or_else(|| "none".to_string(), |p| p.to_string());
        writeln!(
            out,
            "#otdr sampling_time_ns={} length={} seed={} topology={} faults={} psnr_db={}",
            self.sampling_time_ns,
            self.samples.len(),
            self.meta.seed,
            if self.meta.topology_hash.is_empty() { "-" } else { &self.meta.topology_hash },
            self.meta.faults,
            psnr
        )?;
        for x in &self.samples {
            writeln!(out, "{x}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty trace file".into()))??;
        let rest = header
            .strip_prefix("#otdr")
            .ok_or_else(|| Error::Format("trace header must start with '#otdr'".into()))?;
        let mut fields = BTreeMap::new();
        for tok in rest.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header token '{tok}'")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| Error::Format(format!("trace header missing '{k}'")));
        let parse_err = |k: &str| Error::Format(format!("bad value for '{k}'"));
        let sampling_time_ns: f64 = get("sampling_time_ns")?.parse().map_err(|_| parse_err("sampling_time_ns"))?;
        let length: usize = get("length")?.parse().map_err(|_| parse_err("length"))?;
        let seed: u64 = get("seed")?.parse().map_err(|_| parse_err("seed"))?;
        let topology_hash = match fields.get("topology").map(String::as_str) {
            None | Some("-") => String::new(),
            Some(h) => h.to_string(),
        };
        let faults = match fields.get("faults") {
            Some(f) => f.parse()?,
            None => FaultSpec::none(),
        };
        let psnr_db = match fields.get("psnr_db").map(String::as_str) {
            None | Some("none") => None,
            Some(p) => Some(p.parse().map_err(|_| parse_err("psnr_db"))?),
        };
        let mut samples = Vec::with_capacity(length);
        for (n, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let x: f64 = line
                .parse()
                .map_err(|_| Error::Format(format!("bad amplitude on data line {}: '{line}'", n + 1)))?;
            if !x.is_finite() {
                return Err(Error::Format(format!("non-finite amplitude on data line {}", n + 1)));
            }
            samples.push(x);
        }
        if samples.len() != length {
            return Err(Error::Format(format!(
                "header declares {length} samples but file holds {}",
                samples.len()
            )));
        }
        Ok(OtdrTrace { samples, sampling_time_ns, meta: TraceMeta { seed, topology_hash, faults, psnr_db } })
    }
}
