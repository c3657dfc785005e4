use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use prt_core::dataset::synth::{cohort, SynthConfig};
use prt_core::evaluation::{evaluate_fold, ReferencePassthrough};
use prt_core::parallel::{self, ExecMode};
use prt_core::preprocess::{prepare_all, WindowConfig, WindowPair};
use prt_core::respmetrics::RespConfig;
use prt_core::translator::{Trainer, TranslatorBundle, TranslatorConfig};

const MODES: [(&str, ExecMode); 2] = [
    ("sequential", ExecMode::Sequential),
    ("parallel", ExecMode::Parallel),
];

fn cohort_of(n: usize, duration_s: f64) -> Vec<prt_core::dataset::SubjectBundle> {
    cohort(&SynthConfig {
        subjects: n,
        duration_s,
        ..SynthConfig::default()
    })
}

fn bench_prepare(c: &mut Criterion) {
    let bundles = cohort_of(4, 240.0);
    let mut g = c.benchmark_group("prepare_all");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| prepare_all(black_box(&bundles), &WindowConfig::default(), mode).unwrap())
        });
    }
    g.finish();
}

fn bench_translate(c: &mut Criterion) {
    let subjects = prepare_all(
        &cohort_of(2, 240.0),
        &WindowConfig::default(),
        ExecMode::Parallel,
    )
    .unwrap();
    let pairs: Vec<WindowPair> = subjects.iter().flat_map(|s| s.eval_pairs.clone()).collect();
    let bundle = TranslatorBundle::init(&TranslatorConfig::default()).unwrap();
    let mut g = c.benchmark_group("translate_windows");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| parallel::map(mode, &pairs, |p| bundle.g.infer(&p.ppg.samples)))
        });
    }
    g.finish();
}

fn bench_trainer_step(c: &mut Criterion) {
    let subjects = prepare_all(
        &cohort_of(2, 120.0),
        &WindowConfig::default(),
        ExecMode::Parallel,
    )
    .unwrap();
    let pairs: Vec<WindowPair> = subjects
        .iter()
        .flat_map(|s| s.train_pairs.clone())
        .collect();
    let mut g = c.benchmark_group("trainer_step");
    for (name, mode) in MODES {
        let cfg = TranslatorConfig {
            exec: mode,
            ..TranslatorConfig::toy()
        };
        let mut trainer = Trainer::new(TranslatorBundle::init(&cfg).unwrap());
        let batch: Vec<&WindowPair> = pairs.iter().take(cfg.batch_size).collect();
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| trainer.step(black_box(&batch), cfg.learning_rate).unwrap())
        });
    }
    g.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let subjects = prepare_all(
        &cohort_of(4, 300.0),
        &WindowConfig::default(),
        ExecMode::Parallel,
    )
    .unwrap();
    let refs: Vec<_> = subjects.iter().collect();
    let resp = RespConfig::default();
    let mut g = c.benchmark_group("evaluate_fold");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| evaluate_fold(&ReferencePassthrough, black_box(&refs), 0, &resp, mode))
        });
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10).measurement_time(Duration::from_secs(5));
    targets = bench_prepare, bench_translate, bench_trainer_step, bench_evaluate
}
criterion_main!(benches);
