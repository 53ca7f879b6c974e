use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use pon_sentinel::baselines::{self, BenchModel};
use pon_sentinel::nn::{self, Checkpoint, LstmArch, LstmClassifier, ModelParams, TrainConfig};
use pon_sentinel::seed::derive_seed;
use pon_sentinel::{Dataset, FaultSpec, GenConfig, OtdrConfig, OtdrTrace, PonTopology, ReferenceMap, TopologySampler};

const TRAIN_FILE: &str = "train.tsv";
const VAL_FILE: &str = "val.tsv";
const TEST_FILE: &str = "test.tsv";

#[derive(Parser)]
#[command(name = "pon-sentinel", version, about = "Simulate OTDR traces, train window classifiers and diagnose PON branches")]
struct Cli {
    /// Master seed; every random draw of the command derives from it.
    #[arg(long, global = true, env = "PON_SENTINEL_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one OTDR trace for a topology and fault set.
    Simulate(SimulateArgs),
    /// Generate a labeled dataset and split it into train/val/test files.
    Gendata(GendataArgs),
    /// Train an LSTM classifier and write a checkpoint.
    Train(TrainArgs),
    /// Accuracy and confusion matrix of a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Train one model per architecture cell on a shared dataset.
    Sweep(SweepArgs),
    /// Time the LSTM against the naive Bayes and dense baselines.
    Bench(BenchArgs),
    /// Build a reference map from a healthy trace.
    Register(RegisterArgs),
    /// Diagnose a trace against a reference map.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct OtdrArgs {
    #[arg(long, default_value_t = 2.0)]
    sampling_ns: f64,
    #[arg(long, default_value_t = 10.0)]
    pulse_ns: f64,
    #[arg(long, default_value_t = 1.468)]
    group_index: f64,
    #[arg(long, default_value_t = 0.05)]
    baseline: f64,
    /// Samples per synthesized trace.
    #[arg(long)]
    trace_len: Option<usize>,
}

impl OtdrArgs {
    fn config(&self, default_len: usize) -> OtdrConfig {
        OtdrConfig {
            sampling_time_ns: self.sampling_ns,
            pulse_width_ns: self.pulse_ns,
            group_index: self.group_index,
            baseline_level: self.baseline,
            trace_len_samples: self.trace_len.unwrap_or(default_len),
            ..OtdrConfig::default()
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Comma-separated `id:ratio` pairs, e.g. `2:0.3,5:0`.
    #[arg(long, default_value = "")]
    faults: String,
    /// Noise level in dB; omit for a noiseless trace.
    #[arg(long)]
    psnr: Option<f64>,
    #[command(flatten)]
    otdr: OtdrArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GendataArgs {
    /// Output directory for the train/val/test files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5000)]
    per_class: usize,
    #[arg(long, default_value_t = 5.0)]
    psnr_min: f64,
    #[arg(long, default_value_t = 30.0)]
    psnr_max: f64,
    #[arg(long, default_value_t = 0.02)]
    ratio_min: f64,
    #[arg(long, default_value_t = 0.5)]
    ratio_max: f64,
    #[arg(long, default_value_t = 0.0)]
    break_fraction: f64,
    /// Number of random topologies to draw windows from.
    #[arg(long, default_value_t = 200)]
    pool: usize,
    /// Draw windows from this topology only instead of a random pool.
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.2,0.2")]
    split: Vec<f64>,
    #[command(flatten)]
    otdr: OtdrArgs,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// Width of the dense layer between the LSTM and the output.
    #[arg(long, default_value_t = 16)]
    neurons: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = pon_sentinel::WINDOW_LEN)]
    window_len: usize,
}

impl ModelArgs {
    fn arch(&self) -> anyhow::Result<LstmArch> {
        if self.window_len != pon_sentinel::WINDOW_LEN {
            return Err(pon_sentinel::Error::InvalidConfig(format!(
                "window length {} unsupported; datasets use {}",
                self.window_len,
                pon_sentinel::WINDOW_LEN
            ))
            .into());
        }
        Ok(LstmArch { seq_len: self.window_len, hidden: self.hidden, layers: self.layers, dense: self.neurons })
    }
}

#[derive(Args)]
struct OptimArgs {
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Early-stopping patience in epochs; 0 disables it.
    #[arg(long, default_value_t = 10)]
    patience: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    #[arg(long, default_value_t = 1.0)]
    clip: f64,
}

impl OptimArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch,
            max_epochs: self.epochs,
            patience: self.patience,
            clip_norm: (self.clip > 0.0).then_some(self.clip),
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Directory written by `gendata`.
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch history CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset file, or a `gendata` directory (its test split is used).
    #[arg(long)]
    dataset: PathBuf,
    /// Confusion-matrix CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// LSTM layer counts of the depth axis.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    layers: Vec<usize>,
    /// Dense widths of the width axis.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    neurons: Vec<usize>,
    /// Train every layer/neuron combination instead of the two axes.
    #[arg(long)]
    cross: bool,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Training-set sizes for the training-time rows; empty skips them.
    #[arg(long, value_delimiter = ',')]
    train_sizes: Vec<usize>,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RegisterArgs {
    /// Healthy trace of the installed network.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    topology: PathBuf,
    #[arg(long, default_value_t = pon_sentinel::WINDOW_LEN)]
    stride: usize,
    /// Acquisition settings of the trace; its length is taken from the file.
    #[command(flatten)]
    otdr: OtdrArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = pon_sentinel::WINDOW_LEN)]
    stride: usize,
    /// Recorded verbatim in the report.
    #[arg(long)]
    timestamp: Option<String>,
    /// JSON report path; the table is always printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("error kind=usage message={}", serde_json::Value::String(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e
                .chain()
                .find_map(|c| {
                    c.downcast_ref::<pon_sentinel::Error>()
                        .map(|e| e.kind())
                        .or_else(|| c.downcast_ref::<std::io::Error>().map(|_| "io"))
                })
                .unwrap_or("runtime");
            eprintln!("error kind={kind} message={}", serde_json::Value::String(format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Simulate(a) => simulate(a, seed),
        Command::Gendata(a) => gendata(a, seed),
        Command::Train(a) => train(a, seed),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a, seed),
        Command::Bench(a) => bench(a, seed),
        Command::Register(a) => register(a),
        Command::Diagnose(a) => diagnose(a),
    }
}

fn read_topology(path: &Path) -> anyhow::Result<PonTopology> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(PonTopology::from_json(&text)?)
}

fn read_trace(path: &Path) -> anyhow::Result<OtdrTrace> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(OtdrTrace::read_from(BufReader::new(f))?)
}

fn read_dataset(path: &Path) -> anyhow::Result<Dataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Dataset::read_from(BufReader::new(f))?)
}

fn read_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

/// Train and validation parts of a `gendata` directory.
fn read_split(dir: &Path) -> anyhow::Result<(Dataset, Dataset)> {
    Ok((read_dataset(&dir.join(TRAIN_FILE))?, read_dataset(&dir.join(VAL_FILE))?))
}

/// A dataset file, or the test part of a `gendata` directory.
fn read_eval_set(path: &Path) -> anyhow::Result<Dataset> {
    if path.is_dir() {
        read_dataset(&path.join(TEST_FILE))
    } else {
        read_dataset(path)
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Config snapshot for CSV comment lines.
fn snapshot(command: &str, config: serde_json::Value) -> String {
    format!("pon-sentinel {command} {config}")
}

fn simulate(a: SimulateArgs, seed: u64) -> anyhow::Result<()> {
    let topo = read_topology(&a.topology)?;
    let faults: FaultSpec = a.faults.parse()?;
    let trace = pon_sentinel::simulate(&topo, &a.otdr.config(OtdrConfig::default().trace_len_samples), &faults, a.psnr, seed)?;
    let mut out = create(&a.out)?;
    trace.write_to(&mut out)?;
    out.flush()?;
    Ok(())
}

fn gendata(a: GendataArgs, seed: u64) -> anyhow::Result<()> {
    let [ft, fv, fs]: [f64; 3] = a.split.as_slice().try_into().map_err(|_| {
        pon_sentinel::Error::InvalidArgument(format!("--split needs three fractions, got {}", a.split.len()))
    })?;
    let gen = GenConfig {
        per_class: a.per_class,
        ratio_min: a.ratio_min,
        ratio_max: a.ratio_max,
        psnr_min_db: a.psnr_min,
        psnr_max_db: a.psnr_max,
        break_fraction: a.break_fraction,
        seed: derive_seed(seed, 0),
        otdr: a.otdr.config(GenConfig::default().otdr.trace_len_samples),
        ..GenConfig::default()
    };
    let pool = match &a.topology {
        Some(p) => vec![read_topology(p)?],
        None => TopologySampler::default().pool(a.pool, derive_seed(seed, 1)),
    };
    let ds = pon_sentinel::generate_dataset(&gen, &pool)?;
    let (train, val, test) = pon_sentinel::split_dataset(&ds, [ft, fv, fs], derive_seed(seed, 2))?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (name, part) in [(TRAIN_FILE, &train), (VAL_FILE, &val), (TEST_FILE, &test)] {
        let mut out = create(&a.out.join(name))?;
        part.write_to(&mut out)?;
        out.flush()?;
    }
    println!("windows train={} val={} test={}", train.len(), val.len(), test.len());
    Ok(())
}

fn train(a: TrainArgs, seed: u64) -> anyhow::Result<()> {
    let (train_ds, val_ds) = read_split(&a.dataset)?;
    let arch = a.model.arch()?;
    let cfg = a.optim.config(seed);
    let init = LstmClassifier::new(arch, seed)?;
    let out = nn::train_with(init, &train_ds, &val_ds, &cfg, |r| {
        eprintln!("epoch {} train_loss {:.5} val_loss {:.5} val_acc {:.4}", r.epoch, r.train_loss, r.val_loss, r.val_acc);
    })?;
    let ckpt = Checkpoint::new(ModelParams::Lstm(out.model), cfg.clone());
    ckpt.save(&a.out)?;
    if let Some(path) = &a.history {
        let mut w = create(path)?;
        out.history.write_csv(&mut w, Some(&snapshot("train", serde_json::json!({ "train": cfg, "arch": arch }))))?;
        w.flush()?;
    }
    println!("best_epoch {} checkpoint {}", out.best_epoch, ckpt.id()?);
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let ckpt = read_checkpoint(&a.checkpoint)?;
    let ds = read_eval_set(&a.dataset)?;
    let e = nn::evaluate(ckpt.classifier(), &ds)?;
    println!("accuracy {}", e.accuracy);
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        let snap = serde_json::json!({ "checkpoint": ckpt.id()?, "windows": ds.len() });
        e.write_csv(&mut w, Some(&snapshot("eval", snap)))?;
        w.flush()?;
    }
    Ok(())
}

fn sweep(a: SweepArgs, seed: u64) -> anyhow::Result<()> {
    let (train_ds, val_ds) = read_split(&a.dataset)?;
    let test_ds = read_eval_set(&a.dataset)?;
    let grid = if a.cross {
        nn::cross_grid(&a.layers, &a.neurons)
    } else {
        axes_grid(&a.layers, &a.neurons)
    };
    let base = LstmArch { hidden: a.hidden, ..LstmArch::default() };
    let cfg = a.optim.config(seed);
    let rows = nn::sweep(&grid, base, &train_ds, &val_ds, &test_ds, &cfg, |r| match (&r.accuracy, &r.error) {
        (Some(acc), _) => eprintln!("layers {} neurons {} accuracy {acc:.4}", r.layers, r.neurons),
        (_, Some(e)) => eprintln!("layers {} neurons {} failed: {e}", r.layers, r.neurons),
        _ => {}
    })?;
    let mut w = create(&a.out)?;
    nn::write_sweep_csv(&rows, &mut w, Some(&snapshot("sweep", serde_json::json!({ "train": cfg, "base": base, "grid": grid }))))?;
    w.flush()?;
    Ok(())
}

/// Depth axis at the middle width (16 when present) and width axis at the smallest depth.
fn axes_grid(layers: &[usize], neurons: &[usize]) -> Vec<nn::SweepCell> {
    let (Some(&l0), Some(&n0)) = (layers.iter().min(), neurons.iter().find(|&&n| n == 16).or(neurons.first())) else {
        return Vec::new();
    };
    let mut cells: Vec<nn::SweepCell> = layers.iter().map(|&l| nn::SweepCell { layers: l, neurons: n0 }).collect();
    for &n in neurons {
        let cell = nn::SweepCell { layers: l0, neurons: n };
        if !cells.contains(&cell) {
            cells.push(cell);
        }
    }
    cells
}

fn bench(a: BenchArgs, seed: u64) -> anyhow::Result<()> {
    let ckpt = read_checkpoint(&a.checkpoint)?;
    let ModelParams::Lstm(lstm) = &ckpt.model else {
        bail!(pon_sentinel::Error::InvalidArgument("bench needs an LSTM checkpoint".into()));
    };
    let (train_ds, val_ds) = read_split(&a.dataset)?;
    let test_ds = read_eval_set(&a.dataset)?;
    let cfg = a.optim.config(seed);
    let gnb = baselines::fit_gnb(&train_ds)?;
    let ann = baselines::fit_ann(&train_ds, &val_ds, &cfg)?.model;
    let models: [(&str, &dyn nn::Classifier); 3] = [("gnb", &gnb), ("ann", &ann), ("lstm", lstm)];
    for (name, m) in models {
        println!("{name} accuracy {}", nn::evaluate(m, &test_ds)?.accuracy);
    }
    let mut rows = baselines::benchmark_inference(&models, &test_ds, a.reps)?;
    if !a.train_sizes.is_empty() {
        let families = [BenchModel::Gnb, BenchModel::Ann, BenchModel::Lstm(lstm.arch())];
        rows.extend(baselines::benchmark_training(&families, &train_ds, &a.train_sizes, a.reps, &cfg)?);
    }
    let mut w = create(&a.out)?;
    let snap = serde_json::json!({ "checkpoint": ckpt.id()?, "reps": a.reps, "train": cfg });
    baselines::write_bench_csv(&rows, &mut w, Some(&snapshot("bench", snap)))?;
    w.flush()?;
    Ok(())
}

fn register(a: RegisterArgs) -> anyhow::Result<()> {
    let topo = read_topology(&a.topology)?;
    let trace = read_trace(&a.trace)?;
    let cfg = a.otdr.config(trace.len()).with_len(trace.len());
    if cfg.sampling_time_ns != trace.sampling_time_ns {
        bail!(pon_sentinel::Error::InvalidArgument(format!(
            "trace sampled at {} ns but --sampling-ns is {}",
            trace.sampling_time_ns, cfg.sampling_time_ns
        )));
    }
    let reference = pon_sentinel::register_reference(&trace, &topo, &cfg, a.stride)?;
    write_text(&a.out, &reference.to_json()?)?;
    println!("windows {}", reference.windows.len());
    Ok(())
}

fn diagnose(a: DiagnoseArgs) -> anyhow::Result<()> {
    let trace = read_trace(&a.trace)?;
    let reference = ReferenceMap::load(&a.reference)?;
    let ckpt = read_checkpoint(&a.checkpoint)?;
    let mut report = pon_sentinel::diagnose(&trace, &reference, ckpt.classifier(), a.stride)?;
    report.checkpoint_id = Some(ckpt.id()?);
    report.timestamp = a.timestamp;
    if let Some(path) = &a.out {
        write_text(path, &report.to_json()?)?;
    }
    print!("{}", report.to_table());
    Ok(())
}
