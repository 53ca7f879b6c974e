//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//!
//! The process exits 0 even when a criterion fails so that the ordinary test
//! run stays green; set `ACCEPTANCE_STRICT=1` to turn any failure into a
//! nonzero exit. `ACCEPTANCE_PER_CLASS` shrinks the noisy dataset for a
//! quick smoke run; the tolerances stay the same.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::Rng;

use common::complex_step;
use pon_sentinel::baselines::{benchmark_inference, fit_ann, fit_gnb};
use pon_sentinel::dataset::label_window;
use pon_sentinel::diagnose::map_class_to_faults;
use pon_sentinel::nn::{
    default_grid, evaluate, gradient_check, softmax, sweep, train_with, Classifier, ModelParams, SweepRow,
};
use pon_sentinel::sim::{add_awgn, synthesize_trace};
use pon_sentinel::{
    diagnose, generate_dataset, register_reference, seed, simulate, split_dataset, Branch, BranchId, Checkpoint,
    Dataset, DiagnosisReport, EventClass, Evaluation, FaultSpec, GenConfig, LstmArch, LstmClassifier, OtdrConfig,
    PonTopology, TopologySampler, TrainConfig,
};

const NOISY_PER_CLASS: usize = 5000;
const POOL_SIZE: usize = 200;
const POOL_SEED: u64 = 11;
const GEN_SEED: u64 = 7;
const SPLIT_SEED: u64 = 3;
const MODEL_SEED: u64 = 1;
const TIMING_WINDOWS: usize = 33_404;
const SWEEP_PER_CLASS: usize = 1000;
const SWEEP_EPOCHS: usize = 50;
const STRIDE: usize = 60;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Verdict {
        Verdict { pass, detail: detail.into() }
    }
}

struct Report {
    lines: Vec<(usize, &'static str, Verdict, f64)>,
}

impl Report {
    fn record(&mut self, n: usize, name: &'static str, start: Instant, v: Verdict) {
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {n:>2} {} {name}: {} ({secs:.1} s)", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        self.lines.push((n, name, v, secs));
    }
}

/// Everything derived from the noisy training run, shared by later criteria.
struct NoisyRun {
    full: Dataset,
    train: Dataset,
    val: Dataset,
    test: Dataset,
    model: LstmClassifier,
    checkpoint_json: String,
    eval: Evaluation,
    best_epoch: usize,
    epochs_run: usize,
}

fn noisy_gen() -> GenConfig {
    let per_class = std::env::var("ACCEPTANCE_PER_CLASS").ok().and_then(|v| v.parse().ok()).unwrap_or(NOISY_PER_CLASS);
    GenConfig { per_class, seed: GEN_SEED, ..GenConfig::default() }
}

fn noisy_run() -> NoisyRun {
    let pool = TopologySampler::default().pool(POOL_SIZE, POOL_SEED);
    let full = generate_dataset(&noisy_gen(), &pool).expect("noisy dataset");
    let (train, val, test) = split_dataset(&full, [0.6, 0.2, 0.2], SPLIT_SEED).expect("split");
    let cfg = TrainConfig { seed: MODEL_SEED, ..TrainConfig::default() };
    let init = LstmClassifier::new(LstmArch::default(), MODEL_SEED).expect("model");
    let t = Instant::now();
    let out = train_with(init, &train, &val, &cfg, |r| {
        eprintln!(
            "  epoch {:>3} train_loss {:.4} val_loss {:.4} val_acc {:.4} ({:.0} s)",
            r.epoch,
            r.train_loss,
            r.val_loss,
            r.val_acc,
            t.elapsed().as_secs_f64()
        )
    })
    .expect("training");
    let eval = evaluate(&out.model, &test).expect("evaluation");
    let checkpoint_json = Checkpoint::new(ModelParams::Lstm(out.model.clone()), cfg).to_json().expect("checkpoint");
    NoisyRun {
        full,
        train,
        val,
        test,
        model: out.model,
        checkpoint_json,
        eval,
        best_epoch: out.best_epoch,
        epochs_run: out.history.epochs.len(),
    }
}

fn branch(id: BranchId, distance_m: f64) -> Branch {
    Branch { id, distance_m, reflect_height: 1.0 }
}

/// Healthy reference trace and diagnosis of a faulty trace on the same topology.
fn run_diagnosis(topo: &PonTopology, extra: usize, faults: &FaultSpec, model: &dyn Classifier) -> pon_sentinel::Result<DiagnosisReport> {
    let base = OtdrConfig::default();
    let cfg = base.clone().with_len(base.split_index(topo)? + extra);
    let healthy = simulate(topo, &cfg, &FaultSpec::none(), Some(30.0), 21)?;
    let faulty = simulate(topo, &cfg, faults, Some(30.0), 22)?;
    let reference = register_reference(&healthy, topo, &cfg, STRIDE)?;
    diagnose(&faulty, &reference, model, STRIDE)
}

fn eight_branch_topology() -> PonTopology {
    let d = [4.5, 7.8, 16.7, 20.0, 29.0, 32.3, 42.9, 55.1];
    PonTopology::new(d.iter().enumerate().map(|(i, &m)| branch(i as BranchId + 1, m)).collect(), 10.0).unwrap()
}

fn eight_branch_faults() -> FaultSpec {
    [(2, 0.3), (3, 0.35), (4, 0.25), (5, 0.3), (6, 0.4), (7, 0.3), (8, 0.35)]
        .into_iter()
        .fold(FaultSpec::none(), |f, (id, r)| f.with(id, r))
}

fn eight_branch(model: &dyn Classifier) -> pon_sentinel::Result<DiagnosisReport> {
    run_diagnosis(&eight_branch_topology(), 310, &eight_branch_faults(), model)
}

/// Round-trip attenuation in dB to a reflection height ratio.
fn attenuation_ratio(db: f64) -> f64 {
    10f64.powf(-2.0 * db / 10.0)
}

fn criterion_1() -> Verdict {
    let arch = LstmArch { seq_len: 5, hidden: 4, layers: 1, dense: 4 };
    let mut worst_fd: f64 = 0.0;
    let mut worst_cs: f64 = 0.0;
    let mut failing = 0;
    for i in 0..20u64 {
        let model = LstmClassifier::new(arch, 100 + i).unwrap();
        let mut rng = seed::sub_rng(0xACCE, i);
        let window: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let label = rng.random_range(0..EventClass::COUNT);
        let x = Array2::from_shape_vec((1, 5), window.clone()).unwrap();
        let e = gradient_check(&model, &x, &[label], 1e-5).unwrap();
        if e >= 1e-6 {
            failing += 1;
        }
        worst_fd = worst_fd.max(e);
        worst_cs = worst_cs.max(complex_step::max_relative_error(&model, &window, label));
    }
    Verdict::new(
        worst_fd < 1e-6,
        format!(
            "central differences max rel err {worst_fd:.2e} ({failing}/20 models >= 1e-6); complex-step oracle max rel err {worst_cs:.2e}"
        ),
    )
}

fn criterion_2(run: &NoisyRun) -> Verdict {
    let diag: Vec<String> =
        EventClass::ALL.iter().map(|&c| format!("{c}={:.3}", run.eval.class_accuracy(c))).collect();
    Verdict::new(
        run.eval.accuracy >= 0.90,
        format!(
            "mean diagonal {:.4} (need >= 0.90) on {} test windows of {}; best epoch {} of {}; {}",
            run.eval.accuracy,
            run.test.len(),
            run.full.len(),
            run.best_epoch,
            run.epochs_run,
            diag.join(" ")
        ),
    )
}

fn criterion_3(model: &LstmClassifier) -> Verdict {
    let pool = TopologySampler::default().pool(60, 0xC1EA);
    let gen = GenConfig {
        per_class: 500,
        ratio_min: 0.1,
        ratio_max: 0.6,
        psnr_min_db: 25.0,
        psnr_max_db: 35.0,
        break_fraction: 0.1,
        seed: 0xC1EA,
        ..GenConfig::default()
    };
    let ds = generate_dataset(&gen, &pool).unwrap();
    let e = evaluate(model, &ds).unwrap();
    let worst = EventClass::ALL.iter().map(|&c| e.class_accuracy(c)).fold(f64::INFINITY, f64::min);
    let diag: Vec<String> = EventClass::ALL.iter().map(|&c| format!("{c}={:.3}", e.class_accuracy(c))).collect();
    Verdict::new(worst >= 0.98, format!("min per-class {worst:.4} (need >= 0.98); {}", diag.join(" ")))
}

fn criterion_4(run: &NoisyRun) -> Verdict {
    let want = [(EventClass::C1, EventClass::C4), (EventClass::C2, EventClass::C4), (EventClass::C3, EventClass::C5), (EventClass::C6, EventClass::C5)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (row, col) in want {
        let got = run.eval.top_confusion(row);
        pass &= got == col;
        parts.push(format!("{row}->{got} ({:.3}, want {col})", run.eval.confusion[row.index()][got.index()]));
    }
    Verdict::new(pass, parts.join("; "))
}

fn criterion_5(model: &dyn Classifier) -> (Verdict, Option<String>) {
    let report = match eight_branch(model) {
        Ok(r) => r,
        Err(e) => return (Verdict::new(false, format!("diagnosis failed: {e}")), None),
    };
    let classes = report.predicted_classes();
    let lists: Vec<Vec<BranchId>> = report.windows.iter().map(|w| w.expected_branch_ids.clone()).collect();
    use EventClass::*;
    let want_classes = vec![C2, C3, C3, C5, C5];
    let want_lists: Vec<Vec<BranchId>> = vec![vec![1, 2], vec![3, 4], vec![5, 6], vec![7], vec![8]];
    let want_faulty: BTreeSet<BranchId> = (2..=8).collect();
    let pass = classes == want_classes && lists == want_lists && report.faulty_branch_ids == want_faulty;
    let detail = format!("classes {classes:?} over {lists:?}, faulty {:?}", report.faulty_branch_ids);
    (Verdict::new(pass, detail), report.to_json().ok())
}

fn criterion_6(model: &dyn Classifier) -> Verdict {
    let topo = PonTopology::new(vec![branch(1, 3.4), branch(2, 5.2), branch(3, 7.3), branch(4, 9.6)], 10.0).unwrap();
    let scenarios = [
        ("3rd 7 dB + 4th 4 dB", FaultSpec::none().with(3, attenuation_ratio(7.0)).with(4, attenuation_ratio(4.0)), vec![3, 4]),
        ("3rd 10 dB", FaultSpec::none().with(3, attenuation_ratio(10.0)), vec![3]),
        ("4th 4 dB", FaultSpec::none().with(4, attenuation_ratio(4.0)), vec![4]),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, faults, want) in scenarios {
        let want: BTreeSet<BranchId> = want.into_iter().collect();
        match run_diagnosis(&topo, 180, &faults, model) {
            Ok(r) => {
                pass &= r.faulty_branch_ids == want;
                parts.push(format!("{name}: {:?} via {:?}", r.faulty_branch_ids, r.predicted_classes()));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: error {e}"));
            }
        }
    }
    Verdict::new(pass, parts.join("; "))
}

fn criterion_7(run: &NoisyRun) -> Verdict {
    let gnb = fit_gnb(&run.train).unwrap();
    let ann = fit_ann(&run.train, &run.val, &TrainConfig { seed: MODEL_SEED, ..TrainConfig::default() }).unwrap().model;
    let gnb_acc = evaluate(&gnb, &run.test).unwrap().accuracy;
    let ann_acc = evaluate(&ann, &run.test).unwrap().accuracy;
    let lstm_acc = run.eval.accuracy;
    let timing_set = run.full.subset(&(0..TIMING_WINDOWS.min(run.full.len())).collect::<Vec<_>>());
    let rows = benchmark_inference(&[("gnb", &gnb), ("lstm", &run.model)], &timing_set, 3).unwrap();
    let (t_gnb, t_lstm) = (rows[0].seconds, rows[1].seconds);
    Verdict::new(
        lstm_acc > gnb_acc && lstm_acc > ann_acc && t_gnb < t_lstm,
        format!(
            "accuracy lstm {lstm_acc:.4} gnb {gnb_acc:.4} ann {ann_acc:.4}; inference on {} windows gnb {t_gnb:.3} s lstm {t_lstm:.3} s",
            timing_set.len()
        ),
    )
}

fn criterion_8(run: &NoisyRun) -> Verdict {
    // Every cell trains for the same number of epochs on a smaller set and
    // keeps its best-validation parameters; all cells share the noisy test split.
    let gen = GenConfig { per_class: SWEEP_PER_CLASS.min(run.full.len() / 7), seed: GEN_SEED + 1, ..noisy_gen() };
    let pool = TopologySampler::default().pool(POOL_SIZE, POOL_SEED);
    let data = generate_dataset(&gen, &pool).expect("sweep dataset");
    let (train, val, _) = split_dataset(&data, [0.6, 0.2, 0.2], SPLIT_SEED).expect("sweep split");
    let cfg = TrainConfig { max_epochs: SWEEP_EPOCHS, patience: 0, seed: MODEL_SEED, ..TrainConfig::default() };
    let rows = sweep(&default_grid(), LstmArch::default(), &train, &val, &run.test, &cfg, |r| {
        eprintln!("  sweep layers {} neurons {}: {:?} in {:?} s", r.layers, r.neurons, r.accuracy, r.train_seconds)
    })
    .unwrap();
    let find = |l: usize, n: usize| rows.iter().find(|r| r.layers == l && r.neurons == n);
    let acc = |r: Option<&SweepRow>| r.and_then(|r| r.accuracy).unwrap_or(f64::NAN);
    let depth: Vec<&SweepRow> = (1..=4).filter_map(|l| find(l, 16)).collect();
    let times: Vec<f64> = depth.iter().map(|r| r.train_seconds.unwrap_or(f64::NAN)).collect();
    let time_ok = depth.len() == 4 && times.windows(2).all(|w| w[0] < w[1]);
    let best_cell = rows.iter().filter_map(|r| r.accuracy).fold(f64::NEG_INFINITY, f64::max);
    let one_layer = acc(find(1, 16));
    let width_best = [8, 16, 32, 64].iter().map(|&n| acc(find(1, n))).fold(f64::NEG_INFINITY, f64::max);
    let depth_ok = one_layer >= best_cell - 0.01;
    let width_ok = one_layer >= width_best - 0.01;
    let cells: Vec<String> = rows
        .iter()
        .map(|r| format!("{}x{}={:.4}/{:.0}s", r.layers, r.neurons, r.accuracy.unwrap_or(f64::NAN), r.train_seconds.unwrap_or(f64::NAN)))
        .collect();
    Verdict::new(
        time_ok && depth_ok && width_ok,
        format!(
            "times increase with depth: {time_ok}; 1-layer {one_layer:.4} vs best cell {best_cell:.4}; 16 neurons vs best width {width_best:.4}; {} epochs per cell on {} windows; {}",
            SWEEP_EPOCHS,
            train.len(),
            cells.join(" ")
        ),
    )
}

fn criterion_9(first: &NoisyRun, first_report: Option<&str>) -> Verdict {
    let second = noisy_run();
    let same_ckpt = second.checkpoint_json == first.checkpoint_json;
    let report = eight_branch(&second.model).ok().and_then(|r| r.to_json().ok());
    let same_report = first_report.is_some() && report.as_deref() == first_report;
    Verdict::new(
        same_ckpt && same_report,
        format!("checkpoint bytes identical: {same_ckpt}; eight-branch report bytes identical: {same_report}"),
    )
}

/// Runs `test` over `cases` generated inputs; returns a failure description if any.
fn property<S: Strategy>(name: &str, cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Option<String> {
    let mut runner = TestRunner::new(ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() });
    runner.run(&strategy, test).err().map(|e| format!("{name}: {e}"))
}

fn criterion_10() -> Verdict {
    use EventClass::*;
    let mut failures: Vec<String> = Vec::new();

    failures.extend(property(
        "softmax",
        500,
        (prop::collection::vec(-50.0..50.0f64, 1..12), -100.0..100.0f64),
        |(z, c)| {
            let p = softmax(&z);
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let q = softmax(&shifted);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            Ok(())
        },
    ));

    let label_table: [(&[BranchId], &[BranchId], EventClass); 7] = [
        (&[1, 2], &[], C0),
        (&[1, 2], &[1], C1),
        (&[1, 2], &[2], C2),
        (&[1, 2], &[1, 2], C3),
        (&[7], &[], C4),
        (&[7], &[7], C5),
        (&[], &[], C6),
    ];
    for (ids, faulty, want) in label_table {
        let set: BTreeSet<BranchId> = faulty.iter().copied().collect();
        match label_window(ids, &set) {
            Ok(c) if c == want => {}
            other => failures.push(format!("label_window({ids:?}, {faulty:?}) = {other:?}, want {want}")),
        }
    }
    if label_window(&[1, 2, 3], &BTreeSet::new()).is_ok() {
        failures.push("label_window accepted three covered branches".into());
    }

    let two: &[BranchId] = &[4, 9];
    let one: &[BranchId] = &[7];
    let none: &[BranchId] = &[];
    type Row<'a> = (EventClass, &'a [BranchId], Option<Vec<BranchId>>);
    let map_table: Vec<Row> = vec![
        (C0, two, Some(vec![])),
        (C1, two, Some(vec![4])),
        (C2, two, Some(vec![9])),
        (C3, two, Some(vec![4, 9])),
        (C4, two, None),
        (C5, two, None),
        (C6, two, Some(vec![4, 9])),
        (C0, one, None),
        (C1, one, None),
        (C2, one, None),
        (C3, one, None),
        (C4, one, Some(vec![])),
        (C5, one, Some(vec![7])),
        (C6, one, Some(vec![7])),
        (C0, none, None),
        (C1, none, None),
        (C2, none, None),
        (C3, none, None),
        (C4, none, None),
        (C5, none, None),
        (C6, none, Some(vec![])),
    ];
    for (class, expected, want) in map_table {
        let (faulty, consistent) = map_class_to_faults(class, expected);
        let ok = match &want {
            Some(ids) => consistent && faulty == ids.iter().copied().collect::<BTreeSet<_>>(),
            None => !consistent,
        };
        if !ok {
            failures.push(format!("map_class_to_faults({class}, {expected:?}) = ({faulty:?}, {consistent}), want {want:?}"));
        }
    }

    let pool = TopologySampler::default().pool(20, 5);
    failures.extend(property("split", 12, (5usize..30, any::<u64>()), |(per_class, s)| {
        let ds = generate_dataset(&GenConfig { per_class, seed: s, ..GenConfig::default() }, &pool).unwrap();
        let (a, b, c) = split_dataset(&ds, [0.6, 0.2, 0.2], s).unwrap();
        prop_assert_eq!(a.len() + b.len() + c.len(), ds.len());
        let key = |w: &pon_sentinel::Window| format!("{:?}{:?}", w.values, w.label);
        let mut all: Vec<String> = a.windows.iter().chain(&b.windows).chain(&c.windows).map(key).collect();
        let mut orig: Vec<String> = ds.windows.iter().map(key).collect();
        all.sort();
        orig.sort();
        prop_assert_eq!(all, orig);
        for class in EventClass::ALL {
            let n = ds.class_counts[&class] as f64;
            for (part, f) in [(&a, 0.6), (&b, 0.2), (&c, 0.2)] {
                let got = part.class_counts.get(&class).copied().unwrap_or(0) as f64;
                prop_assert!((got - f * n).abs() <= 1.0, "class {} got {} of {}", class, got, n);
            }
        }
        Ok(())
    }));

    let cfg = OtdrConfig::default();
    failures.extend(property(
        "additivity",
        100,
        (prop::collection::vec((0.5..10.0f64, 0.3..1.0f64, 0.0..=1.0f64), 1..6), 2.0..20.0f64),
        |(spec, split)| {
            let mut d = 1.5;
            let branches: Vec<Branch> = spec
                .iter()
                .enumerate()
                .map(|(i, &(gap, h, _))| {
                    d += gap;
                    Branch { id: i as BranchId + 1, distance_m: d, reflect_height: h }
                })
                .collect();
            let topo = PonTopology::new(branches.clone(), split).unwrap();
            let faults = spec.iter().enumerate().fold(FaultSpec::none(), |f, (i, s)| f.with(i as BranchId + 1, s.2));
            let full = synthesize_trace(&topo, &cfg, &faults, 0).unwrap();
            let mut sum = vec![cfg.baseline_level; cfg.trace_len_samples];
            for (b, s) in branches.iter().zip(&spec) {
                let single = PonTopology::new(vec![b.clone()], split).unwrap();
                let part = synthesize_trace(&single, &cfg, &FaultSpec::none().with(b.id, s.2), 0).unwrap();
                for (acc, v) in sum.iter_mut().zip(&part.samples) {
                    *acc += v - cfg.baseline_level;
                }
            }
            for (a, b) in full.samples.iter().zip(&sum) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            Ok(())
        },
    ));

    for (psnr, peak) in [(5.0, 1.0), (20.0, 0.5), (30.0, 2.0)] {
        let n = 200_000;
        let noisy = add_awgn(&vec![0.0; n], peak, psnr, 77).unwrap();
        let mean = noisy.iter().sum::<f64>() / n as f64;
        let sd = (noisy.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let want = peak / 10f64.powf(psnr / 20.0);
        if (sd / want - 1.0).abs() > 0.01 || mean.abs() > 5.0 * want / (n as f64).sqrt() {
            failures.push(format!("noise at {psnr} dB: sd {sd} mean {mean}, want sd {want}"));
        }
    }

    failures.extend(property("checkpoint", 16, (any::<u64>(), 1usize..3, 1usize..6), |(s, layers, hidden)| {
        let arch = LstmArch { hidden, layers, dense: 3, ..LstmArch::default() };
        let model = LstmClassifier::new(arch, s).unwrap();
        let ckpt = Checkpoint::new(ModelParams::Lstm(model.clone()), TrainConfig { seed: s, ..TrainConfig::default() });
        let text = ckpt.to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), text);
        let mut rng = seed::rng(s);
        let x = Array2::from_shape_simple_fn((4, arch.seq_len), || rng.random::<f64>());
        prop_assert_eq!(back.classifier().predict_proba(&x).unwrap(), model.predict_proba(&x).unwrap());
        Ok(())
    }));

    Verdict::new(
        failures.is_empty(),
        if failures.is_empty() {
            "softmax, label table, fault-mapping table, split, additivity, noise sigma and checkpoint round-trip all hold".into()
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v != "0");
    let mut report = Report { lines: Vec::new() };

    let t = Instant::now();
    report.record(1, "gradient check", t, criterion_1());

    let t = Instant::now();
    let run = noisy_run();
    report.record(2, "noisy-test accuracy", t, criterion_2(&run));

    let t = Instant::now();
    report.record(3, "clean-test accuracy", t, criterion_3(&run.model));

    let t = Instant::now();
    report.record(4, "confusion structure", t, criterion_4(&run));

    let t = Instant::now();
    let (v5, table_json) = criterion_5(&run.model);
    report.record(5, "eight-branch diagnosis", t, v5);

    let t = Instant::now();
    report.record(6, "unseen four-branch topology", t, criterion_6(&run.model));

    let t = Instant::now();
    report.record(7, "baseline ordering", t, criterion_7(&run));

    let t = Instant::now();
    report.record(8, "architecture sweep", t, criterion_8(&run));

    let t = Instant::now();
    report.record(9, "determinism", t, criterion_9(&run, table_json.as_deref()));

    let t = Instant::now();
    report.record(10, "property suites", t, criterion_10());

    let passed = report.lines.iter().filter(|l| l.2.pass).count();
    let total_secs: f64 = report.lines.iter().map(|l| l.3).sum();
    println!("acceptance: {passed}/{} criteria passed in {total_secs:.0} s", report.lines.len());
    for (n, name, v, _) in &report.lines {
        println!("  {n:>2} {:<28} {}", name, if v.pass { "PASS" } else { "FAIL" });
    }
    if strict && passed != report.lines.len() {
        std::process::exit(1);
    }
}
